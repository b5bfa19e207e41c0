"""Discrete-time estimation of the sampled system, two independent routes.

``sequential_filter`` is the production path: a Kalman recursion on the
augmented pair (z, Y_partial) where Y_partial accumulates int C z dt since the
previous sample, each observation is the increment y(t_i) - y(t_{i-1}) =
Y_partial + dw with dw ~ N(0, R (t_i - t_{i-1})), and Y_partial is reset to
zero after every update.  Means are touched only when a realised output path
is supplied; covariances never depend on the data.

``batch_condition`` is the oracle route: one Gaussian conditioning of z(T) on
the whole vector (y(t_1), ..., y(t_m)) using the closed-form kernels

    Cov(y(t_i), y(t_j)) = Cov(Y(t_i), Y(t_j)) + R min(t_i, t_j).

The two must agree to floating-point accuracy; keeping both alive is the
package's standing self-check (increment versus cumulative bookkeeping).

``increment_variance`` evaluates the one-insertion refinement gain

    E||ztilde_{j+1} - ztilde_j||^2
        = tr( e^(AT) P C_h* (C_h P C_h* + (h/2) R)^(-1) C_h P e^(A*T) )

where P conditions the initial state on the coarse observation set and C_h
has modal columns c_k phi_h(lambda_k, t, h); the interpolated observation
y(t) - (y(t-h) + y(t+h))/2 carries exactly (h/2) R of measurement noise.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError

from .errors import GramSingularError
from .kernels import (augmented_covariance, _integrated_output_map, phi_h,
                      transition_block)
from .spectral_model import ModalSystem

logger = logging.getLogger(__name__)

__all__ = ["AugmentedGaussianState", "FilterRun", "sequential_filter",
           "batch_condition", "increment_variance"]


@dataclass(frozen=True)
class AugmentedGaussianState:
    """Gaussian belief over the augmented vector (z, Y_partial) at a time."""

    time: float
    mean: np.ndarray
    cov: np.ndarray


@dataclass(frozen=True)
class FilterRun:
    """Result of conditioning z(T) on sampled outputs.

    trace_err is the posterior trace E||z(T) - zhat||^2; final_mean is filled
    only when observations were supplied.
    """

    grid: np.ndarray
    final_cov: np.ndarray
    trace_err: float
    final_mean: np.ndarray | None = None
    snapshots: list[AugmentedGaussianState] | None = None


def _validate_times(system: ModalSystem, times) -> np.ndarray:
    times = np.asarray(times, dtype=float).ravel()
    if times.size and (np.any(times <= 0)
                       or np.any(times > system.horizon * (1 + 1e-12))):
        raise ValueError("sample times must lie in (0, horizon]")
    if times.size > 1 and np.any(np.diff(times) <= 0):
        raise ValueError("sample times must be strictly increasing")
    return times


def _real_trace(cov: np.ndarray) -> float:
    tr = complex(np.trace(cov))
    if abs(tr.imag) > 1e-12 * max(1.0, abs(tr)):
        logger.warning("covariance trace has imaginary residue %.3e", tr.imag)
    return tr.real


def _filter_plan(system: ModalSystem, times: np.ndarray,
                 store_snapshots: bool = False):
    """Run the covariance recursion; return (run, steps, tail_transition).

    ``steps`` is a list of (transition, gain) per sample; the gain maps the
    innovation on the increment observation into the augmented state.
    """
    n, r = system.num_modes, system.num_outputs
    d = n + r
    cov = np.zeros((d, d), dtype=complex)
    cov[:n, :n] = np.diag(system.prior_var)
    cache: dict[float, object] = {}
    steps = []
    snapshots: list[AugmentedGaussianState] | None = [] if store_snapshots else None
    prev = 0.0
    for t in times:
        delta = float(t - prev)
        tr = cache.get(delta)
        if tr is None:
            tr = transition_block(system, delta)
            cache[delta] = tr
        fmat = tr.state_map
        cov = fmat @ cov @ fmat.conj().T + tr.noise_cov
        s = cov[n:, n:] + system.r_cov * delta
        gain = np.linalg.solve(s, cov[n:, :]).conj().T
        ikh = np.eye(d, dtype=complex)
        ikh[:, n:] -= gain
        cov = ikh @ cov @ ikh.conj().T + gain @ (system.r_cov * delta) @ gain.conj().T
        cov = (cov + cov.conj().T) / 2.0
        cov[n:, :] = 0.0
        cov[:, n:] = 0.0
        steps.append((tr, gain))
        if snapshots is not None:
            snapshots.append(AugmentedGaussianState(time=float(t), mean=None,
                                                    cov=cov[:n, :n].copy()))
        prev = t
    tail = system.horizon - prev
    tail_tr = None
    if tail > 1e-12 * system.horizon:
        tail_tr = cache.get(tail) or transition_block(system, tail)
        fmat = tail_tr.state_map
        cov = fmat @ cov @ fmat.conj().T + tail_tr.noise_cov
        cov = (cov + cov.conj().T) / 2.0
    final_cov = cov[:n, :n]
    run = FilterRun(grid=times, final_cov=final_cov,
                    trace_err=_real_trace(final_cov), snapshots=snapshots)
    return run, steps, tail_tr


def sequential_filter(system: ModalSystem, times, observations=None,
                      store_snapshots: bool = False) -> FilterRun:
    """Kalman recursion over the sample times, exact between samples.

    Parameters
    ----------
    times : strictly increasing times in (0, horizon]; may be empty, in which
        case the prior is just propagated to the horizon.
    observations : optional (m, r) array of cumulative sampled outputs y(t_i);
        increments are formed internally.  Enables the returned final_mean.
    """
    times = _validate_times(system, times)
    run, steps, tail_tr = _filter_plan(system, times, store_snapshots)
    if observations is None:
        return run

    obs = np.asarray(observations)
    r = system.num_outputs
    if obs.ndim == 1:
        obs = obs[:, None]
    if obs.shape != (times.size, r):
        raise ValueError("observations must have shape (len(times), num_outputs)")
    n = system.num_modes
    mean = np.concatenate([system.prior_mean.astype(complex),
                           np.zeros(r, dtype=complex)])
    prev_y = np.zeros(r)
    for (tr, gain), y in zip(steps, obs):
        mean = tr.state_map @ mean
        innovation = (y - prev_y) - mean[n:]
        mean = mean + gain @ innovation
        mean[n:] = 0.0
        prev_y = y
    if tail_tr is not None:
        mean = tail_tr.state_map @ mean
    return FilterRun(grid=run.grid, final_cov=run.final_cov,
                     trace_err=run.trace_err, final_mean=mean[:n],
                     snapshots=run.snapshots)


def _output_gram(system: ModalSystem, times: np.ndarray) -> np.ndarray:
    """Covariance of the stacked sampled outputs (y(t_1), ..., y(t_m))."""
    n, r = system.num_modes, system.num_outputs
    m = times.size
    augs = [augmented_covariance(system, float(t)) for t in times]
    gram = np.empty((m * r, m * r), dtype=complex)
    for i in range(m):
        cyy = augs[i][n:, n:]
        cyz = augs[i][n:, :n]
        for j in range(i, m):
            block = cyy if j == i else cyy + cyz @ _integrated_output_map(
                system, float(times[j] - times[i])).conj().T
            block = block + system.r_cov * times[i]
            gram[i * r:(i + 1) * r, j * r:(j + 1) * r] = block
            if j != i:
                gram[j * r:(j + 1) * r, i * r:(i + 1) * r] = block.conj().T
    return (gram + gram.conj().T) / 2.0, augs


def _solve_gram(gram: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Cholesky solve with a single logged jitter retry before giving up."""
    try:
        return cho_solve(cho_factor(gram, lower=True), rhs)
    except LinAlgError:
        eps = 1e-12 * np.trace(gram).real / gram.shape[0]
        logger.warning("gram factorization failed; retrying with jitter %.3e", eps)
        try:
            return cho_solve(cho_factor(gram + eps * np.eye(gram.shape[0]), lower=True), rhs)
        except LinAlgError as exc:
            cond = np.linalg.cond(gram)
            raise GramSingularError(
                f"observation gram matrix singular (cond ~ {cond:.3e})") from exc


def batch_condition(system: ModalSystem, times) -> FilterRun:
    """Condition z(T) on all sampled outputs in one Gaussian regression."""
    times = _validate_times(system, times)
    n, r = system.num_modes, system.num_outputs
    prior = augmented_covariance(system, system.horizon)[:n, :n]
    if times.size == 0:
        return FilterRun(grid=times, final_cov=prior, trace_err=_real_trace(prior))
    gram, augs = _output_gram(system, times)
    decay = np.exp(np.outer(system.eigenvalues, system.horizon - times))  # (n, m)
    cross = np.hstack([decay[:, i:i + 1] * augs[i][:n, n:] for i in range(times.size)])
    post = prior - cross @ _solve_gram(gram, cross.conj().T)
    post = (post + post.conj().T) / 2.0
    return FilterRun(grid=times, final_cov=post, trace_err=_real_trace(post))


def _condition_initial(system: ModalSystem, times: np.ndarray) -> np.ndarray:
    """Error covariance of the initial state x given the sampled outputs."""
    p = system.prior_var.astype(complex)
    if times.size == 0:
        return np.diag(p)
    gram, _ = _output_gram(system, times)
    cross = np.hstack([p[:, None] * _integrated_output_map(system, float(t)).conj().T
                       for t in times])
    post = np.diag(p) - cross @ _solve_gram(gram, cross.conj().T)
    return (post + post.conj().T) / 2.0


def increment_variance(system: ModalSystem, base_times, new_time: float,
                       h: float) -> float:
    """Expected squared move of the z(T) estimate when one sample is inserted.

    ``new_time`` must sit in the middle of a gap of width 2 h of the base set
    (the left neighbour may be the origin, where y = 0 is known for free).
    Only driftless-input systems are supported; with input noise the move is
    available as a difference of filter traces instead.
    """
    if system.has_input_noise:
        raise ValueError("increment_variance needs an undriven system; "
                         "use trace differences of sequential_filter runs")
    base = _validate_times(system, np.sort(np.asarray(base_times, dtype=float)))
    tol = 1e-9 * system.horizon
    t = float(new_time)
    if not (h > 0 and t - h >= -tol and t + h <= system.horizon * (1 + 1e-12)):
        raise ValueError("insertion stencil must satisfy 0 <= t-h, t+h <= horizon")
    if np.any(np.abs(base - t) <= tol):
        raise ValueError("new_time already belongs to the base set")

    def contains(v: float) -> bool:
        return bool(np.any(np.abs(base - v) <= tol)) or abs(v) <= tol

    if not (contains(t - h) and np.any(np.abs(base - (t + h)) <= tol)):
        raise ValueError("base set must contain new_time - h (or 0) and new_time + h")
    inside = (base > t - h + tol) & (base < t + h - tol)
    if np.any(inside):
        raise ValueError("base set intrudes into the insertion stencil")

    post = _condition_initial(system, base)
    chm = system.output_coeffs.T * phi_h(system.eigenvalues, t, h)[None, :]
    gmat = chm @ post @ chm.conj().T + (h / 2.0) * system.r_cov
    decay = np.exp(system.eigenvalues * system.horizon)
    amat = chm @ post @ np.diag(decay.conj())
    moved = np.sum(amat.conj() * np.linalg.solve(gmat, amat))
    return float(moved.real)
