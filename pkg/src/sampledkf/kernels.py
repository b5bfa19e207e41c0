"""Exact Gaussian transition and covariance kernels for diagonal generators.

The filtering grid never forces a numerical ODE solve: for a diagonal
generator everything reduces to scalar exponential moments.  Augmenting the
state with the running output integral

    Y(t) = int_0^t C z(s) ds,        y(t) = Y(t) + w(t),

the pair (z, Y) is jointly Gaussian with block transition

    F_h = [ diag(e^(lambda_k h))            0   ]
          [ c_k (e^(lambda_k h)-1)/lambda_k  I_r ]

and one-step noise covariance Sigma_h assembled from (with M = B Q B*)

    Sigma_zz[k,l] = M_kl (e^((lambda_k+conj(lambda_l))h) - 1)/(lambda_k+conj(lambda_l))
    Sigma_zY[k,j] = sum_l M_kl conj(c_lj) int_0^h e^(lambda_k s) I1(conj(lambda_l), s) ds
    Sigma_YY[i,j] = sum_kl c_ki conj(c_lj) M_kl int_0^h I1(lambda_k, s) I1(conj(lambda_l), s) ds

where I1(a, s) = (e^(a s) - 1)/a.  The removable singularities (any exponent
combination approaching zero) are handled by the series branches in
``_scalars``; matrices are Hermitian-symmetrised after assembly so conjugate
paired models keep real traces.

``quadrature_oracle_transition`` rebuilds the same matrices from the defining
iterated integrals by adaptive quadrature (cmath + scipy.integrate.quad, no
shared code path) and exists purely to cross-check the closed forms.
"""

from __future__ import annotations

import cmath
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import IntegrationWarning, quad

from ._scalars import coupled_g2, coupled_g3, phi1
from .errors import NumericalError
from .spectral_model import ModalSystem

__all__ = [
    "AugmentedTransition",
    "phi_h",
    "transition_block",
    "augmented_covariance",
    "output_covariance_kernel",
    "state_output_cross",
    "quadrature_oracle_transition",
]


@dataclass(frozen=True)
class AugmentedTransition:
    """One exact discretisation step of the augmented pair (z, Y)."""

    step: float
    state_map: np.ndarray  # (N+r, N+r) complex
    noise_cov: np.ndarray  # (N+r, N+r) complex Hermitian PSD


def _hermitize(mat: np.ndarray) -> np.ndarray:
    return (mat + mat.conj().T) / 2.0


def phi_h(lam, t: float, h: float):
    """Interpolation-residual kernel of a single mode.

    phi_h(lambda, t, h) = (2 e^(lambda t) - e^(lambda (t-h)) - e^(lambda (t+h))) / (2 lambda)
    evaluated in the cancellation-free product form
    -(lambda/2) e^(lambda (t-h)) I1(lambda, h)^2, with phi_h(0, t, h) = 0.
    Requires 0 < h <= t so the backward exponential never grows; ``lam`` and
    ``t`` may be arrays with broadcastable shapes.
    """
    t = np.asarray(t, dtype=float)
    if not (h > 0 and np.all(h <= t)):
        raise ValueError("phi_h: need 0 < h <= t")
    lam = np.asarray(lam, dtype=complex)
    i1 = h * phi1(lam * h)
    return -(lam / 2.0) * np.exp(lam * (t - h)) * i1 * i1


def transition_block(system: ModalSystem, h: float) -> AugmentedTransition:
    """Exact transition of (z, Y) over a step 0 < h <= T."""
    if not 0 < h <= system.horizon * (1 + 1e-12):
        raise ValueError("transition step must satisfy 0 < h <= horizon")
    lam = system.eigenvalues
    n, r = system.num_modes, system.num_outputs
    cmat = system.output_coeffs

    fmat = np.zeros((n + r, n + r), dtype=complex)
    np.fill_diagonal(fmat[:n, :n], np.exp(lam * h))
    i1 = h * phi1(lam * h)
    fmat[n:, :n] = cmat.T * i1[None, :]
    fmat[n:, n:] = np.eye(r)

    sig = np.zeros((n + r, n + r), dtype=complex)
    if system.has_input_noise:
        bq = system.input_coeffs @ system.q_cov @ system.input_coeffs.conj().T
        a = (lam * h)[:, None]
        b = (lam.conj() * h)[None, :]
        szz = bq * (h * phi1(a + b))
        szy = (bq * (h * h * coupled_g2(a, b))) @ cmat.conj()
        syy = cmat.T @ (bq * (h ** 3 * coupled_g3(a, b))) @ cmat.conj()
        sig[:n, :n] = szz
        sig[:n, n:] = szy
        sig[n:, :n] = szy.conj().T
        sig[n:, n:] = syy
        sig = _hermitize(sig)
    return AugmentedTransition(step=float(h), state_map=fmat, noise_cov=sig)


def augmented_covariance(system: ModalSystem, t: float) -> np.ndarray:
    """Unconditional covariance of (z(t), Y(t)) started from the diagonal prior."""
    n, r = system.num_modes, system.num_outputs
    base = np.zeros((n + r, n + r), dtype=complex)
    np.fill_diagonal(base[:n, :n], system.prior_var)
    if t == 0:
        return base
    tr = transition_block(system, t)
    return _hermitize(tr.state_map @ base @ tr.state_map.conj().T + tr.noise_cov)


def _integrated_output_map(system: ModalSystem, dt: float) -> np.ndarray:
    """(r, N) map z(t) -> E[Y(t+dt) - Y(t) | z(t)], rows c_k I1(lambda_k, dt)."""
    i1 = dt * phi1(system.eigenvalues * dt)
    return system.output_coeffs.T * i1[None, :]


def output_covariance_kernel(system: ModalSystem, t: float, t2: float) -> np.ndarray:
    """Cov(Y(t), Y(t2)) of the integrated noiseless output, (r, r).

    Splits as Cov(Y(s), Y(s)) + Cov(Y(s), z(s)) D(|t2-t|)* with s = min(t, t2),
    since the later output integral is D(dt) z(s) plus noise independent of the
    past; both prior and input-noise parts ride along automatically.
    """
    for v in (t, t2):
        if not 0 <= v <= system.horizon * (1 + 1e-12):
            raise ValueError("output kernel times must lie in [0, horizon]")
    if t > t2:
        return output_covariance_kernel(system, t2, t).conj().T
    n = system.num_modes
    if t == 0:
        return np.zeros((system.num_outputs, system.num_outputs), dtype=complex)
    aug = augmented_covariance(system, t)
    cyy = aug[n:, n:]
    if t2 == t:
        return _hermitize(cyy)
    dmap = _integrated_output_map(system, t2 - t)
    return cyy + aug[n:, :n] @ dmap.conj().T


def state_output_cross(system: ModalSystem, t_state: float, t_obs: float) -> np.ndarray:
    """Cov(z(t_state), Y(t_obs)) for t_obs <= t_state, (N, r) per channel."""
    if not 0 <= t_obs <= t_state <= system.horizon * (1 + 1e-12):
        raise ValueError("need 0 <= t_obs <= t_state <= horizon")
    n = system.num_modes
    if t_obs == 0:
        return np.zeros((n, system.num_outputs), dtype=complex)
    aug = augmented_covariance(system, t_obs)
    decay = np.exp(system.eigenvalues * (t_state - t_obs))
    return decay[:, None] * aug[:n, n:]


# --------------------------------------------------------------------------
# independent adaptive-quadrature oracle

def _cquad(f, lo: float, hi: float, tol: float, entry: str = "integral"):
    with warnings.catch_warnings():
        warnings.simplefilter("error", IntegrationWarning)
        try:
            re = quad(lambda s: f(s).real, lo, hi,
                      epsabs=tol, epsrel=1e-11, limit=400)[0]
            im = quad(lambda s: f(s).imag, lo, hi,
                      epsabs=tol, epsrel=1e-11, limit=400)[0]
        except IntegrationWarning as exc:
            raise NumericalError(f"quadrature did not converge for {entry}: "
                                 f"{exc}") from exc
    return re + 1j * im


def quadrature_oracle_transition(system: ModalSystem, h: float,
                                 tol: float = 1e-13) -> AugmentedTransition:
    """Rebuild the transition from its defining iterated integrals.

    Every entry is evaluated by adaptive quadrature on the Ito-isometry form
    of the definitions; inner integrals are quadratures as well, so nothing is
    shared with the closed-form path.  ``tol`` is the absolute tolerance per
    entry (inner integrals are pushed one decade tighter).
    """
    if not 0 < h <= system.horizon * (1 + 1e-12):
        raise ValueError("transition step must satisfy 0 < h <= horizon")
    lam = [complex(v) for v in system.eigenvalues]
    n, r = system.num_modes, system.num_outputs
    cmat = system.output_coeffs

    fmat = np.zeros((n + r, n + r), dtype=complex)
    for k in range(n):
        fmat[k, k] = cmath.exp(lam[k] * h)
    for j in range(r):
        for k in range(n):
            fmat[n + j, k] = cmat[k, j] * _cquad(lambda s, lk=lam[k]: cmath.exp(lk * s),
                                                 0.0, h, tol / 10.0,
                                                 entry=f"state_map[{n + j},{k}]")
    fmat[n:, n:] = np.eye(r)

    sig = np.zeros((n + r, n + r), dtype=complex)
    if system.has_input_noise:
        bq = system.input_coeffs @ system.q_cov @ system.input_coeffs.conj().T

        def tail(lk: complex, r0: float) -> complex:
            # int_r0^h e^(lk (s - r0)) ds by quadrature
            return _cquad(lambda s: cmath.exp(lk * (s - r0)), r0, h, tol / 10.0,
                          entry="inner output integral")

        for k in range(n):
            for l in range(n):
                if bq[k, l] == 0:
                    continue
                lk, llc = lam[k], lam[l].conjugate()
                szz = _cquad(lambda rr: cmath.exp((lk + llc) * (h - rr)), 0.0, h,
                             tol, entry=f"noise_cov zz[{k},{l}]")
                sig[k, l] += bq[k, l] * szz
        for k in range(n):
            for j in range(r):
                acc = 0.0 + 0.0j
                for l in range(n):
                    if bq[k, l] == 0 or cmat[l, j] == 0:
                        continue
                    lk, llc = lam[k], lam[l].conjugate()
                    acc += bq[k, l] * cmat[l, j].conjugate() * _cquad(
                        lambda rr: cmath.exp(lk * (h - rr)) * tail(llc, rr),
                        0.0, h, tol, entry=f"noise_cov zY[{k},{n + j}]")
                sig[k, n + j] = acc
                sig[n + j, k] = acc.conjugate()
        for i in range(r):
            for j in range(r):
                acc = 0.0 + 0.0j
                for k in range(n):
                    for l in range(n):
                        if bq[k, l] == 0 or cmat[k, i] == 0 or cmat[l, j] == 0:
                            continue
                        lk, llc = lam[k], lam[l].conjugate()
                        acc += cmat[k, i] * cmat[l, j].conjugate() * bq[k, l] * _cquad(
                            lambda rr: tail(lk, rr) * tail(llc, rr), 0.0, h,
                            tol, entry=f"noise_cov YY[{n + i},{n + j}]")
                sig[n + i, n + j] = acc
    return AugmentedTransition(step=float(h), state_map=fmat, noise_cov=sig)
