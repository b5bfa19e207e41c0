"""Path sampling and empirical validation of the deterministic error traces.

The modal coordinates are complex but describe a real-valued random field:
conjugate mode pairs carry conjugate coefficients.  Sampling therefore runs
through a real re-composition.  For a self-conjugate mode k the coordinate is
a real Gaussian; for a pair (a, b) the coordinates are eta_a = rho_a + i rho_b,
eta_b = conj(eta_a) with real Gaussians rho.  Stacking the rho's gives a real
vector whose covariance S = A^{-1} Sigma A^{-H} (A the re-composition matrix)
is real symmetric whenever Sigma respects the pairing; a factor of S drives
the draws and A maps them back to modal coordinates.  The map eta -> real
field is then norm-preserving, so squared errors computed in modal
coordinates are the physical ones.

Every trial consumes one flat block of standard normals from its own
counter-based stream, in a fixed documented order:

    [ initial state (num_modes) ]
    for each sample step: [ process noise (num_modes + num_outputs), driven only ]
                          [ measurement noise (num_outputs) ]
    [ tail process noise (num_modes + num_outputs), driven only, if the last
      sample precedes the horizon ]

which makes runs bitwise reproducible and trials independent regardless of
how many are batched together.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError
from .filter_core import _filter_plan, _validate_times
from .spectral_model import ModalSystem

logger = logging.getLogger(__name__)

__all__ = ["SimulationBatch", "sample_path", "empirical_error"]


def _pairing_or_identity(system: ModalSystem) -> np.ndarray:
    if system.pairing is not None:
        return system.pairing
    # Without a declared pairing the identity is only sound for real modes;
    # complex ones would silently be sampled with the wrong law.
    for arr in (system.eigenvalues, system.output_coeffs, system.input_coeffs,
                system.prior_mean):
        if np.any(arr.imag != 0):
            raise ValueError("path sampling needs a conjugate pairing when "
                             "modes are complex")
    return np.arange(system.num_modes)


def _recomposition(pairing: np.ndarray) -> np.ndarray:
    """Matrix A with eta = A rho mapping real draws to paired modal coords."""
    d = pairing.size
    amat = np.zeros((d, d), dtype=complex)
    for k, mate in enumerate(pairing):
        if mate == k:
            amat[k, k] = 1.0
        elif k < mate:
            amat[k, k] = 1.0
            amat[k, mate] = 1.0j
            amat[mate, k] = 1.0
            amat[mate, mate] = -1.0j
    return amat


def _real_factor(cov: np.ndarray, pairing: np.ndarray) -> np.ndarray:
    """Complex factor L with L L^H = cov and L xi pairing-compatible, xi real."""
    amat = _recomposition(pairing)
    half = np.linalg.solve(amat, cov)
    s = np.linalg.solve(amat, half.conj().T).conj().T
    scale = float(np.abs(s).max()) or 1.0
    if np.abs(s.imag).max() > 1e-8 * scale:
        raise ValueError("covariance does not respect the conjugate pairing")
    s = (s.real + s.real.T) / 2.0
    w, v = np.linalg.eigh(s)
    floor = -1e-12 * max(float(w[-1]), np.finfo(float).tiny)
    if w[0] < floor:
        raise NumericalError(f"sampling covariance has eigenvalue {w[0]:.3e}")
    if w[0] < 0:
        logger.debug("clipping %.3e of negative eigenvalue mass", float(-w[w < 0].sum()))
    return amat @ (v * np.sqrt(np.clip(w, 0.0, None)))


@dataclass(frozen=True)
class _DrawLayout:
    """Slice offsets into each trial's flat block of standard normals."""

    total: int
    initial: slice
    process: list[slice]
    measure: list[slice]
    tail: slice | None


def _layout(system: ModalSystem, num_steps: int, has_tail: bool) -> _DrawLayout:
    n, r = system.num_modes, system.num_outputs
    d = n + r
    pos = n
    process, measure = [], []
    for _ in range(num_steps):
        if system.has_input_noise:
            process.append(slice(pos, pos + d))
            pos += d
        else:
            process.append(slice(0, 0))
        measure.append(slice(pos, pos + r))
        pos += r
    tail = None
    if has_tail and system.has_input_noise:
        tail = slice(pos, pos + d)
        pos += d
    return _DrawLayout(total=pos, initial=slice(0, n),
                       process=process, measure=measure, tail=tail)


def _trial_rng(seed: int, trial: int | None) -> np.random.Generator:
    words = [int(seed)] if trial is None else [int(seed), int(trial)]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(words)))


class _Simulator:
    """Shared precomputation for exact joint draws of states and outputs."""

    def __init__(self, system: ModalSystem, times: np.ndarray):
        self.system = system
        self.times = times
        self.run, self.steps, self.tail_tr = _filter_plan(system, times)
        n, r = system.num_modes, system.num_outputs
        self.n, self.r = n, r
        pairing = _pairing_or_identity(system)
        aug_pairing = np.concatenate([pairing, n + np.arange(r)])
        self.initial_factor = _real_factor(
            np.diag(system.prior_var.astype(complex)), pairing)
        self.noise_factors: dict[int, np.ndarray] = {}
        if system.has_input_noise:
            transitions = [tr for tr, _ in self.steps]
            if self.tail_tr is not None:
                transitions.append(self.tail_tr)
            for tr in transitions:
                if id(tr) not in self.noise_factors:
                    self.noise_factors[id(tr)] = _real_factor(tr.noise_cov,
                                                              aug_pairing)
        self.meas_chol = np.linalg.cholesky(system.r_cov)
        self.deltas = np.diff(np.concatenate([[0.0], times]))
        self.layout = _layout(system, times.size, self.tail_tr is not None)

    def draw(self, seed: int, trials: int, single: bool) -> np.ndarray:
        if single:
            return _trial_rng(seed, None).standard_normal(
                (1, self.layout.total))
        out = np.empty((trials, self.layout.total))
        for j in range(trials):
            out[j] = _trial_rng(seed, j).standard_normal(self.layout.total)
        return out

    def run_paths(self, normals: np.ndarray, with_filter: bool):
        """Propagate all trials; return (final states, outputs, final means).

        States and means are (trials, num_modes); outputs are the cumulative
        sampled values (trials, num_steps, num_outputs).
        """
        sysm = self.system
        n, r = self.n, self.r
        lay = self.layout
        trials = normals.shape[0]
        state = np.zeros((trials, n + r), dtype=complex)
        state[:, :n] = sysm.prior_mean[None, :] \
            + normals[:, lay.initial] @ self.initial_factor.T
        mean = None
        if with_filter:
            mean = np.zeros((trials, n + r), dtype=complex)
            mean[:, :n] = sysm.prior_mean[None, :]
        outputs = np.empty((trials, self.times.size, r))
        for i, (tr, gain) in enumerate(self.steps):
            state = state @ tr.state_map.T
            if sysm.has_input_noise:
                factor = self.noise_factors[id(tr)]
                state += normals[:, lay.process[i]] @ factor.T
            dw = np.sqrt(self.deltas[i]) * (normals[:, lay.measure[i]]
                                            @ self.meas_chol.T)
            y_inc = state[:, n:].real + dw
            outputs[:, i, :] = y_inc
            if with_filter:
                mean = mean @ tr.state_map.T
                innovation = y_inc - mean[:, n:]
                mean += innovation @ gain.T
                mean[:, n:] = 0.0
            state[:, n:] = 0.0
        if self.tail_tr is not None:
            state = state @ self.tail_tr.state_map.T
            if sysm.has_input_noise:
                factor = self.noise_factors[id(self.tail_tr)]
                state += normals[:, lay.tail] @ factor.T
            if with_filter:
                mean = mean @ self.tail_tr.state_map.T
        outputs = np.cumsum(outputs, axis=1)
        final_mean = mean[:, :n] if with_filter else None
        return state[:, :n], outputs, final_mean


def sample_path(system: ModalSystem, times, seed: int,
                trial: int | None = None):
    """Draw one exact joint sample of (z(horizon), sampled outputs).

    Returns (state, outputs) with state (num_modes,) complex in modal
    coordinates and outputs (len(times), num_outputs) the cumulative sampled
    output values.  With ``trial`` given, the draw comes from that trial's
    stream of the batch keyed by ``seed``, matching ``empirical_error``.
    """
    times = _validate_times(system, times)
    sim = _Simulator(system, times)
    if trial is None:
        normals = sim.draw(seed, 1, single=True)
    else:
        normals = _trial_rng(seed, trial).standard_normal(
            (1, sim.layout.total))
    state, outputs, _ = sim.run_paths(normals, with_filter=False)
    return state[0], outputs[0]


@dataclass(frozen=True)
class SimulationBatch:
    """Monte Carlo squared-error sample versus the deterministic trace."""

    label: str
    grid: np.ndarray
    trials: int
    seed: int
    errors: np.ndarray
    empirical_mean: float
    std_error: float
    trace_err: float
    z_score: float


def empirical_error(system: ModalSystem, times, trials: int,
                    seed: int) -> SimulationBatch:
    """Monte Carlo estimate of E||zhat(horizon) - z(horizon)||^2.

    Runs ``trials`` independent exact simulations, filters each sampled
    output path, and compares the mean squared estimation error against the
    deterministic ``trace_err`` of the same grid.  The z-score should be
    O(1); |z| > 3 flags disagreement.
    """
    if trials < 2:
        raise ValueError("need at least two trials")
    times = _validate_times(system, times)
    if times.size == 0:
        raise ValueError("need at least one sample time")
    sim = _Simulator(system, times)
    normals = sim.draw(seed, trials, single=False)
    state, _, mean = sim.run_paths(normals, with_filter=True)
    errors = (np.abs(mean - state) ** 2).sum(axis=1)
    empirical = float(errors.mean())
    sdev = float(errors.std(ddof=1) / np.sqrt(trials))
    trace = sim.run.trace_err
    z = (empirical - trace) / sdev if sdev > 0 else 0.0
    return SimulationBatch(label=system.label, grid=times, trials=int(trials),
                           seed=int(seed), errors=errors,
                           empirical_mean=empirical, std_error=sdev,
                           trace_err=trace, z_score=float(z))
