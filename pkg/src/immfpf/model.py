"""Stochastic hybrid system model: mode-conditioned SDE, mode Markov chain,
observation model, and simulation of ground truth plus synthetic observations.

The continuous state follows ``dX = a(X, theta) dt + sigma(theta) dB`` where the
mode ``theta`` is a continuous-time Markov chain with generator ``Q``; the sensor
delivers ``dZ = h(X, theta) dt + sigma_W dW``. Everything here is scalar-state:
one real-valued position per mode population.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import rng as rngmod
from .errors import (
    NegativeOffDiagonal,
    RowSumNonzero,
    StepTooLarge,
    ValidationError,
)

# Row-sum tolerance accepted from user input; after validation the diagonal is
# refilled so rows sum to zero exactly (to rounding).
_ROW_SUM_TOL = 1e-9


@dataclass(frozen=True)
class ModeDynamics:
    """Dynamics of one mode: drift a(x), diffusion sigma, observation h(x).

    ``drift`` and ``observation`` must accept and return numpy arrays
    (vectorized over particle/grid positions).
    """

    drift: Callable[[np.ndarray], np.ndarray]
    diffusion: float
    observation: Callable[[np.ndarray], np.ndarray]

    def __post_init__(self) -> None:
        if not np.isfinite(self.diffusion) or self.diffusion < 0:
            raise ValidationError(f"diffusion must be finite and >= 0, got {self.diffusion}")


@dataclass(frozen=True)
class GeneratorMatrix:
    """Validated transition-rate matrix of the mode chain.

    Entry ``q[m, l]`` (m != l) is the m -> l transition rate; rows sum to zero.
    Construct through :func:`validate_generator`.
    """

    q: np.ndarray

    @property
    def n_modes(self) -> int:
        return self.q.shape[0]

    @property
    def max_exit_rate(self) -> float:
        return float(np.max(-np.diag(self.q))) if self.q.size else 0.0


def validate_generator(q: Sequence[Sequence[float]] | np.ndarray) -> GeneratorMatrix:
    """Validate a raw rate matrix and return a :class:`GeneratorMatrix`.

    Off-diagonal entries must be nonnegative. Diagonal entries may be supplied
    as NaN, in which case they are filled with minus the off-diagonal row sum;
    supplied diagonals are checked (row sum zero within 1e-9) and then refilled
    exactly so the zero-row-sum invariant holds to rounding.
    """
    arr = np.array(q, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 1:
        raise ValidationError(f"generator must be a square matrix, got shape {arr.shape}")
    m = arr.shape[0]
    off = arr.copy()
    np.fill_diagonal(off, 0.0)
    if np.any(off < 0) or not np.all(np.isfinite(off)):
        raise NegativeOffDiagonal("off-diagonal rates must be finite and >= 0")
    diag = np.diag(arr)
    exit_rates = off.sum(axis=1)
    supplied = ~np.isnan(diag)
    row_sums = np.where(supplied, diag + exit_rates, 0.0)
    if np.any(np.abs(row_sums) > _ROW_SUM_TOL):
        bad = int(np.argmax(np.abs(row_sums)))
        raise RowSumNonzero(f"row {bad} sums to {row_sums[bad]:.3g}, not 0")
    out = off
    out[np.arange(m), np.arange(m)] = -exit_rates
    out.flags.writeable = False
    return GeneratorMatrix(q=out)


@dataclass(frozen=True)
class HybridModel:
    """Complete hybrid-system description: per-mode dynamics, mode chain, sensor."""

    modes: tuple[ModeDynamics, ...]
    generator: GeneratorMatrix
    obs_noise_intensity: float
    initial_mode_dist: np.ndarray

    def __post_init__(self) -> None:
        if len(self.modes) == 0:
            raise ValidationError("model needs at least one mode")
        if self.generator.n_modes != len(self.modes):
            raise ValidationError(
                f"generator is {self.generator.n_modes}x{self.generator.n_modes} "
                f"but model has {len(self.modes)} modes"
            )
        if not (np.isfinite(self.obs_noise_intensity) and self.obs_noise_intensity > 0):
            raise ValidationError("obs_noise_intensity must be > 0")
        mu0 = np.asarray(self.initial_mode_dist, dtype=float)
        if mu0.shape != (len(self.modes),) or np.any(mu0 < 0) or abs(mu0.sum() - 1.0) > 1e-9:
            raise ValidationError("initial_mode_dist must be a length-M simplex vector")
        object.__setattr__(self, "initial_mode_dist", mu0)

    @property
    def n_modes(self) -> int:
        return len(self.modes)


@dataclass(frozen=True)
class TruthTrajectory:
    """Sampled ground-truth path: times, continuous states, active mode per step."""

    times: np.ndarray
    states: np.ndarray
    modes: np.ndarray

    def __post_init__(self) -> None:
        if not (len(self.times) == len(self.states) == len(self.modes)):
            raise ValidationError("times/states/modes must have equal length")
        if len(self.times) > 1:
            steps = np.diff(self.times)
            dt = steps[0]
            if np.any(np.abs(steps - dt) > 1e-12 * max(1.0, abs(dt))):
                raise ValidationError("time grid must have a constant step")

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0]) if len(self.times) > 1 else 0.0


@dataclass(frozen=True)
class ObservationPath:
    """Observation increments dZ on the fixed step grid the truth was sampled on."""

    increments: np.ndarray
    step: float

    def __post_init__(self) -> None:
        if not np.all(np.isfinite(self.increments)):
            raise ValidationError("observation increments must be finite")

    @property
    def times(self) -> np.ndarray:
        """Left endpoints of the increment intervals."""
        return np.arange(len(self.increments)) * self.step


def _n_steps(dt: float, horizon: float) -> int:
    if dt <= 0 or horizon < 0:
        raise ValidationError(f"need dt > 0 and horizon >= 0, got dt={dt}, horizon={horizon}")
    n = int(round(horizon / dt)) if horizon > 0 else 0
    return n


def simulate_mode_chain(
    gen: GeneratorMatrix,
    init: int,
    dt: float,
    horizon: float,
    seed: int,
) -> np.ndarray:
    """Simulate the mode chain on the step grid with first-order jump probabilities.

    Per step the chain moves m -> l with probability ``q_ml * dt`` and stays
    put otherwise. Requires ``dt * max_m |q_mm| < 0.1`` so the first-order
    probabilities are a faithful discretization.
    """
    n = _n_steps(dt, horizon)
    m_count = gen.n_modes
    if not 0 <= init < m_count:
        raise ValidationError(f"init mode {init} out of range for {m_count} modes")
    if dt * gen.max_exit_rate >= 0.1:
        raise StepTooLarge(
            f"dt * max exit rate = {dt * gen.max_exit_rate:.3g} >= 0.1; reduce dt"
        )
    # Per-mode cumulative transition law over [stay, jump targets in order].
    jump_prob = gen.q * dt
    np.fill_diagonal(jump_prob, 0.0)
    cum = np.cumsum(jump_prob, axis=1)
    stay = 1.0 - cum[:, -1]
    us = rngmod.stream(seed, rngmod.MODE_CHAIN).random(n)
    path = np.empty(n + 1, dtype=np.int64)
    path[0] = init
    cur = init
    for k in range(n):
        u = us[k] - stay[cur]
        if u >= 0.0:
            cur = int(np.searchsorted(cum[cur], u, side="right"))
            cur = min(cur, m_count - 1)
        path[k + 1] = cur
    return path


def modes_from_switches(
    switches: Sequence[tuple[float, int]],
    dt: float,
    horizon: float,
) -> np.ndarray:
    """Expand a scripted switch schedule [(time, mode), ...] into a per-step mode path.

    The first entry must start at t=0; the mode at grid time t is the mode of
    the latest switch with switch time <= t.
    """
    n = _n_steps(dt, horizon)
    sw = sorted((float(t), int(m)) for t, m in switches)
    if not sw or sw[0][0] > 0.0:
        raise ValidationError("switch schedule must start at time 0")
    times = np.arange(n + 1) * dt
    path = np.empty(n + 1, dtype=np.int64)
    idx = 0
    for k, t in enumerate(times):
        while idx + 1 < len(sw) and sw[idx + 1][0] <= t + 1e-12:
            idx += 1
        path[k] = sw[idx][1]
    return path


def simulate_truth(
    model: HybridModel,
    x0: float,
    dt: float,
    horizon: float,
    seed: int,
    mode_path: np.ndarray | None = None,
    switches: Sequence[tuple[float, int]] | None = None,
) -> TruthTrajectory:
    """Euler-Maruyama simulation of the continuous state along a mode path.

    Exactly one of ``mode_path`` (precomputed per-step modes) or ``switches``
    (deterministic schedule) must be given. ``X_{k+1} = X_k + a(X_k) dt +
    sigma sqrt(dt) xi_k`` with the mode at the interval's left endpoint.
    """
    if (mode_path is None) == (switches is None):
        raise ValidationError("provide exactly one of mode_path or switches")
    if not np.isfinite(x0):
        raise ValidationError("x0 must be finite")
    n = _n_steps(dt, horizon)
    if switches is not None:
        mode_path = modes_from_switches(switches, dt, horizon)
    mode_path = np.asarray(mode_path, dtype=np.int64)
    if mode_path.shape != (n + 1,):
        raise ValidationError(f"mode_path must have length {n + 1}, got {mode_path.shape}")
    if np.any(mode_path < 0) or np.any(mode_path >= model.n_modes):
        raise ValidationError("mode_path contains out-of-range mode indices")
    xi = rngmod.stream(seed, rngmod.TRUTH_DIFFUSION).standard_normal(n)
    sqrt_dt = np.sqrt(dt)
    states = np.empty(n + 1)
    states[0] = x0
    x = float(x0)
    for k in range(n):
        dyn = model.modes[mode_path[k]]
        x = x + float(dyn.drift(np.asarray(x))) * dt + dyn.diffusion * sqrt_dt * xi[k]
        states[k + 1] = x
    return TruthTrajectory(times=np.arange(n + 1) * dt, states=states, modes=mode_path)


def synthesize_observations(model: HybridModel, truth: TruthTrajectory, seed: int) -> ObservationPath:
    """Generate observation increments ``dZ_k = h(X_k) dt + sigma_W sqrt(dt) eta_k``.

    The observation noise stream is independent of the truth's diffusion
    stream even for the same master seed.
    """
    if np.any(truth.modes >= model.n_modes) or np.any(truth.modes < 0):
        raise ValidationError("truth mode indices out of range for this model")
    n = len(truth.times) - 1
    dt = truth.dt
    x = truth.states[:-1]
    m = truth.modes[:-1]
    drift_part = np.empty(n)
    for mode in range(model.n_modes):
        mask = m == mode
        if np.any(mask):
            drift_part[mask] = model.modes[mode].observation(x[mask]) * dt
    eta = rngmod.stream(seed, rngmod.TRUTH_OBSERVATION).standard_normal(n)
    dz = drift_part + model.obs_noise_intensity * np.sqrt(dt) * eta
    return ObservationPath(increments=dz, step=dt)
