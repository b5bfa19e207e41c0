"""Closed-form discretisation kernels against independent integral routes.

The closed forms in ``sampledkf.kernels`` are cross-checked three ways:

* the in-package adaptive-quadrature oracle (shares no code with the closed
  forms beyond numpy itself);
* a test-local one-dimensional quadrature oracle built from the defining
  covariance integrals written as single integrals over the shared noise past;
* hand closed forms for the zero-eigenvalue mode, where every integral is a
  polynomial.
"""

import cmath

import numpy as np
import numpy.testing as npt
import pytest
from scipy.integrate import quad

import sampledkf as sk
from sampledkf import NumericalError

# frozen mpmath references for the interpolation-residual kernel:
# Y(t) - (Y(t-h) + Y(t+h))/2 with Y(s) = int_0^s e^(lam r) dr
PHI_H_FROZEN = [
    (-1.0, 1.0, 0.25, 0.011556233629160082 + 0.0j),
    (-0.5 + 3.0j, 0.7, 0.1, 0.008192153300971937 + 0.006786779988358665j),
]


def driven_heat(n=3, q=0.5):
    return sk.build_heat_model(n, horizon=1.0, q_scalar=q)


def driven_oscillator():
    """Conjugate pair with input noise, exercising complex noise blocks."""
    return sk.ModalSystem(
        eigenvalues=np.array([-0.1 + 2.0j, -0.1 - 2.0j]),
        output_coeffs=np.array([[0.5j], [-0.5j]]),
        input_coeffs=np.array([[1.0], [1.0]], dtype=complex),
        prior_mean=np.zeros(2, complex),
        prior_var=np.array([0.3, 0.3]),
        q_cov=np.array([[0.8]]),
        r_cov=np.array([[1.0]]),
        horizon=2.0,
        pairing=np.array([1, 0]),
        label="osc",
    )


def single_zero_mode(c=2.0, b=1.5, q=0.7, p=0.3, horizon=2.0):
    return sk.ModalSystem(
        eigenvalues=np.array([0.0 + 0.0j]),
        output_coeffs=np.array([[complex(c)]]),
        input_coeffs=np.array([[complex(b)]]),
        prior_mean=np.zeros(1, complex),
        prior_var=np.array([p]),
        q_cov=np.array([[q]]),
        r_cov=np.array([[1.0]]),
        horizon=horizon,
        pairing=np.array([0]),
        label="zero-mode",
    )


def _cquad(f, lo, hi):
    re = quad(lambda s: f(s).real, lo, hi, epsabs=1e-13, epsrel=1e-12)[0]
    im = quad(lambda s: f(s).imag, lo, hi, epsabs=1e-13, epsrel=1e-12)[0]
    return re + 1j * im


def _i1(lam, s):
    """int_0^s e^(lam r) dr without the package's series helpers."""
    if abs(lam * s) < 1e-8:
        return s * (1.0 + lam * s / 2.0 + (lam * s) ** 2 / 6.0)
    return (cmath.exp(lam * s) - 1.0) / lam


def oracle_output_covariance(system, t, t2):
    """Cov(Y(t), Y(t2)) as single integrals over the shared noise past."""
    lam = system.eigenvalues
    cmat = system.output_coeffs
    mmat = system.input_coeffs @ system.q_cov @ system.input_coeffs.conj().T
    r = system.num_outputs
    out = np.zeros((r, r), dtype=complex)
    for i in range(r):
        for j in range(r):
            acc = 0.0 + 0.0j
            for k in range(system.num_modes):
                acc += (system.prior_var[k] * cmat[k, i] * np.conj(cmat[k, j])
                        * _cquad(lambda u: cmath.exp(lam[k] * u), 0, t)
                        * np.conj(_cquad(lambda v: cmath.exp(lam[k] * v), 0, t2)))
                for l in range(system.num_modes):
                    if mmat[k, l] == 0:
                        continue
                    acc += cmat[k, i] * np.conj(cmat[l, j]) * mmat[k, l] * _cquad(
                        lambda s: _i1(lam[k], t - s) * np.conj(_i1(lam[l], t2 - s)),
                        0, min(t, t2))
            out[i, j] = acc
    return out


def oracle_state_output_cross(system, t_state, t_obs):
    """Cov(z(t_state), Y(t_obs)) from the defining integrals."""
    lam = system.eigenvalues
    cmat = system.output_coeffs
    mmat = system.input_coeffs @ system.q_cov @ system.input_coeffs.conj().T
    out = np.zeros((system.num_modes, system.num_outputs), dtype=complex)
    for k in range(system.num_modes):
        for j in range(system.num_outputs):
            acc = (system.prior_var[k] * cmath.exp(lam[k] * t_state)
                   * np.conj(cmat[k, j]
                             * _cquad(lambda u: cmath.exp(lam[k] * u), 0, t_obs)))
            for l in range(system.num_modes):
                if mmat[k, l] == 0:
                    continue
                acc += mmat[k, l] * np.conj(cmat[l, j]) * _cquad(
                    lambda s: cmath.exp(lam[k] * (t_state - s))
                    * np.conj(_i1(lam[l], t_obs - s)),
                    0, min(t_state, t_obs))
            out[k, j] = acc
    return out


class TestPhiH:
    @pytest.mark.parametrize("lam, t, h, expected", PHI_H_FROZEN)
    def test_frozen_values(self, lam, t, h, expected):
        npt.assert_allclose(sk.phi_h(lam, t, h), expected, rtol=1e-12)

    def test_zero_mode_vanishes(self):
        assert sk.phi_h(0.0, 1.0, 0.25) == 0.0

    def test_array_arguments(self):
        lam = np.array([-1.0, -4.0, 2.0j])
        t = np.array([[0.5], [1.0]])
        out = sk.phi_h(lam, t, 0.25)
        assert out.shape == (2, 3)
        npt.assert_allclose(out[1, 0], sk.phi_h(-1.0, 1.0, 0.25), rtol=1e-15)

    def test_needs_room_to_the_left(self):
        with pytest.raises(ValueError, match="0 < h <= t"):
            sk.phi_h(-1.0, 0.1, 0.25)


class TestTransitionAgainstOracle:
    @pytest.mark.parametrize("h", [1e-3, 1e-1])
    @pytest.mark.parametrize("make", [driven_heat, driven_oscillator],
                             ids=["heat", "oscillator"])
    def test_entrywise_match(self, make, h):
        sysm = make()
        closed = sk.transition_block(sysm, h)
        oracle = sk.quadrature_oracle_transition(sysm, h)
        scale_f = np.abs(oracle.state_map).max()
        npt.assert_allclose(closed.state_map, oracle.state_map,
                            rtol=1e-10, atol=1e-13 * scale_f)
        scale_s = np.abs(oracle.noise_cov).max()
        npt.assert_allclose(closed.noise_cov, oracle.noise_cov,
                            rtol=1e-8, atol=1e-12 * scale_s)

    def test_wave_state_map(self):
        sysm = sk.build_wave_model(4, horizon=1.0)
        for h in (1e-3, 1e-1):
            closed = sk.transition_block(sysm, h)
            oracle = sk.quadrature_oracle_transition(sysm, h)
            npt.assert_allclose(closed.state_map, oracle.state_map,
                                rtol=1e-10, atol=1e-14)
            npt.assert_array_equal(closed.noise_cov, 0.0)


class TestTransitionStructure:
    def test_semigroup_composition(self):
        sysm = driven_heat()
        one = sk.transition_block(sysm, 0.3)
        two = sk.transition_block(sysm, 0.45)
        both = sk.transition_block(sysm, 0.75)
        npt.assert_allclose(two.state_map @ one.state_map, both.state_map,
                            rtol=1e-12, atol=1e-15)
        composed = (two.state_map @ one.noise_cov @ two.state_map.conj().T
                    + two.noise_cov)
        npt.assert_allclose(composed, both.noise_cov, rtol=1e-10,
                            atol=1e-15 * np.abs(both.noise_cov).max())

    def test_noise_cov_is_hermitian_psd(self):
        for sysm in (driven_heat(), driven_oscillator()):
            sig = sk.transition_block(sysm, 0.2).noise_cov
            npt.assert_array_equal(sig, sig.conj().T)
            eigs = np.linalg.eigvalsh(sig)
            assert eigs.min() >= -1e-13 * max(eigs.max(), 1e-30)

    def test_step_validation(self):
        sysm = driven_heat()
        for h in (0.0, -0.5, 2.0):
            with pytest.raises(ValueError, match="step"):
                sk.transition_block(sysm, h)

    def test_zero_mode_closed_forms(self):
        c, b, q, p, h = 2.0, 1.5, 0.7, 0.3, 0.4
        tr = sk.transition_block(single_zero_mode(c, b, q, p), h)
        npt.assert_allclose(tr.state_map, [[1.0, 0.0], [c * h, 1.0]], rtol=1e-14)
        qb = q * b * b
        expected = np.array([
            [qb * h, qb * c * h ** 2 / 2],
            [qb * c * h ** 2 / 2, qb * c ** 2 * h ** 3 / 3],
        ])
        npt.assert_allclose(tr.noise_cov, expected, rtol=1e-13)


class TestUnconditionalCovariance:
    def test_matches_single_step_propagation(self):
        for sysm in (driven_heat(), driven_oscillator()):
            t = 0.7
            tr = sk.transition_block(sysm, t)
            base = np.zeros_like(tr.noise_cov)
            np.fill_diagonal(base[:sysm.num_modes, :sysm.num_modes],
                             sysm.prior_var)
            expected = tr.state_map @ base @ tr.state_map.conj().T + tr.noise_cov
            npt.assert_allclose(sk.augmented_covariance(sysm, t), expected,
                                rtol=1e-12, atol=1e-15)

    def test_zero_time_returns_prior(self):
        sysm = driven_heat()
        cov = sk.augmented_covariance(sysm, 0.0)
        npt.assert_array_equal(np.diag(cov),
                               np.concatenate([sysm.prior_var, [0.0]]))

    def test_zero_mode_growth(self):
        c, b, q, p, t = 2.0, 1.5, 0.7, 0.3, 1.3
        cov = sk.augmented_covariance(single_zero_mode(c, b, q, p), t)
        qb = q * b * b
        npt.assert_allclose(cov[0, 0], p + qb * t, rtol=1e-13)
        npt.assert_allclose(cov[0, 1], c * (p * t + qb * t ** 2 / 2), rtol=1e-13)
        npt.assert_allclose(cov[1, 1],
                            c ** 2 * (p * t ** 2 + qb * t ** 3 / 3), rtol=1e-13)


class TestOutputKernels:
    @pytest.mark.parametrize("make", [driven_heat, driven_oscillator],
                             ids=["heat", "oscillator"])
    def test_output_covariance_against_quadrature(self, make):
        sysm = make()
        got = sk.output_covariance_kernel(sysm, 0.3, 0.7)
        want = oracle_output_covariance(sysm, 0.3, 0.7)
        npt.assert_allclose(got, want, rtol=1e-8, atol=1e-13)

    @pytest.mark.parametrize("make", [driven_heat, driven_oscillator],
                             ids=["heat", "oscillator"])
    def test_state_output_cross_against_quadrature(self, make):
        sysm = make()
        got = sk.state_output_cross(sysm, 1.0, 0.7)
        want = oracle_state_output_cross(sysm, 1.0, 0.7)
        npt.assert_allclose(got, want, rtol=1e-8, atol=1e-13)

    def test_exchange_symmetry(self):
        sysm = driven_heat()
        a = sk.output_covariance_kernel(sysm, 0.3, 0.7)
        b = sk.output_covariance_kernel(sysm, 0.7, 0.3)
        npt.assert_allclose(a, b.conj().T, rtol=1e-12)

    def test_equal_times_match_augmented_block(self):
        sysm = driven_oscillator()
        n = sysm.num_modes
        aug = sk.augmented_covariance(sysm, 0.6)
        npt.assert_allclose(sk.output_covariance_kernel(sysm, 0.6, 0.6),
                            aug[n:, n:], rtol=1e-11, atol=1e-15)
        npt.assert_allclose(sk.state_output_cross(sysm, 0.6, 0.6),
                            aug[:n, n:], rtol=1e-11, atol=1e-15)

    def test_zero_mode_closed_forms(self):
        c, b, q, p = 2.0, 1.5, 0.7, 0.3
        sysm = single_zero_mode(c, b, q, p)
        t, t2 = 0.8, 1.3
        qb = q * b * b
        want_yy = c ** 2 * (p * t * t2 + qb * (t ** 2 * t2 / 2 - t ** 3 / 6))
        npt.assert_allclose(sk.output_covariance_kernel(sysm, t, t2)[0, 0],
                            want_yy, rtol=1e-13)
        want_cross = c * (p * t + qb * t ** 2 / 2)
        npt.assert_allclose(sk.state_output_cross(sysm, 2.0, t)[0, 0],
                            want_cross, rtol=1e-13)


class TestOracleFailureReporting:
    def test_unresolvable_oscillation_names_the_entry(self):
        fast = sk.ModalSystem(
            eigenvalues=np.array([3e8j, -3e8j]),
            output_coeffs=np.array([[1.0j], [-1.0j]]),
            input_coeffs=np.zeros((2, 1), complex),
            prior_mean=np.zeros(2, complex),
            prior_var=np.ones(2),
            q_cov=np.array([[0.0]]),
            r_cov=np.array([[1.0]]),
            horizon=1.0,
            pairing=np.array([1, 0]),
        )
        with pytest.raises(NumericalError, match="state_map"):
            sk.quadrature_oracle_transition(fast, 1.0)
