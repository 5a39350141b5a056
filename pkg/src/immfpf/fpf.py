"""Bank of M parallel feedback particle filters with constant-gain feedback.

Each mode runs its own population of N particles. Particles are steered by a
gain times a modified innovation (no importance weights, no resampling) plus
an interaction drift that transports mass between mode populations according
to the mode chain's rates and the current mode probabilities.

All observation-dependent quantities are computed in unit-observation-noise
coordinates internally: increments and observation functions are rescaled by
1/sigma_W so the filter equations keep their unit-noise form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteState, ValidationError
from .model import GeneratorMatrix, HybridModel


@dataclass(frozen=True)
class ParticleBank:
    """M x N matrix of particle states, one row per mode population."""

    states: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.states, dtype=float)
        if arr.ndim != 2 or arr.shape[1] < 2:
            raise ValidationError(f"states must be M x N with N >= 2, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("particle states must be finite")
        object.__setattr__(self, "states", arr)

    @property
    def n_modes(self) -> int:
        return self.states.shape[0]

    @property
    def n_particles(self) -> int:
        return self.states.shape[1]

    def mode_means(self) -> np.ndarray:
        return self.states.mean(axis=1)


@dataclass(frozen=True)
class FilterConfig:
    """Numerical knobs of the bank update.

    ``clamp_floor`` bounds mode probabilities away from zero before forming
    interaction coefficients; ``c_cap`` caps each coefficient so the
    interaction drift stays bounded when a mode probability is tiny.
    """

    dt: float
    gain_mode: str = "constant"
    clamp_floor: float = 1e-9
    c_cap: float = 1e3

    def __post_init__(self) -> None:
        if self.dt <= 0:
            raise ValidationError("dt must be > 0")
        if self.gain_mode != "constant":
            raise ValidationError(f"unsupported gain_mode {self.gain_mode!r}")
        if not 0 < self.clamp_floor < 1:
            raise ValidationError("clamp_floor must be in (0, 1)")
        if self.c_cap <= 0:
            raise ValidationError("c_cap must be > 0")


@dataclass(frozen=True)
class ModeStatistics:
    """Per-step bank summary: predicted observations, gains, interaction drifts.

    ``h_hat_mode`` and ``gains`` are in the model's raw observation units;
    the step routine applies the 1/sigma_W^2 rescaling when using them.
    """

    h_hat_mode: np.ndarray
    h_hat_global: float
    gains: np.ndarray
    controls: np.ndarray


def mode_h_hat(bank: ParticleBank, model: HybridModel, m: int) -> float:
    """Particle estimate of the mode-m predicted observation: mean of h^m over the population."""
    return float(np.mean(model.modes[m].observation(bank.states[m])))


def global_h_hat(h_hat_mode: np.ndarray, mu: np.ndarray) -> float:
    """Mode-probability-weighted average of the per-mode predicted observations."""
    return float(np.dot(np.asarray(mu, dtype=float), np.asarray(h_hat_mode, dtype=float)))


def constant_gain(bank: ParticleBank, model: HybridModel, m: int, h_hat_m: float) -> float:
    """Constant gain for mode m: the particle covariance of (h^m(X), X).

    This is the density-weighted mean of the exact gain function, obtained
    from the weak form of the gain boundary value problem with test function
    psi(x) = x. For h(x) = x it reduces to the population variance.
    """
    x = bank.states[m]
    h = model.modes[m].observation(x)
    return float(np.mean((h - h_hat_m) * x))


def interaction_control(
    bank_means: np.ndarray,
    mu: np.ndarray,
    gen: GeneratorMatrix,
    m: int,
    config: FilterConfig,
) -> float:
    """Constant interaction drift for mode m: sum_l c_lm (mean_l - mean_m).

    ``c_lm = q_lm mu_l / mu_m`` with mu floored at ``clamp_floor`` and each
    coefficient capped at ``c_cap`` so the drift stays bounded near mu_m = 0.
    """
    means = np.asarray(bank_means, dtype=float)
    mu_f = np.maximum(np.asarray(mu, dtype=float), config.clamp_floor)
    c = gen.q[:, m] * mu_f / mu_f[m]
    c = np.minimum(c, config.c_cap)
    c[m] = 0.0
    return float(np.dot(c, means - means[m]))


def mode_statistics(
    bank: ParticleBank,
    model: HybridModel,
    mu: np.ndarray,
    config: FilterConfig,
) -> ModeStatistics:
    """Compute all per-mode statistics from the current (pre-step) bank."""
    m_count = bank.n_modes
    h_hat = np.array([mode_h_hat(bank, model, m) for m in range(m_count)])
    gains = np.array([constant_gain(bank, model, m, h_hat[m]) for m in range(m_count)])
    means = bank.mode_means()
    controls = np.array(
        [interaction_control(means, mu, model.generator, m, config) for m in range(m_count)]
    )
    return ModeStatistics(
        h_hat_mode=h_hat,
        h_hat_global=global_h_hat(h_hat, mu),
        gains=gains,
        controls=controls,
    )


def fpf_step(
    bank: ParticleBank,
    mu: np.ndarray,
    dz: float,
    model: HybridModel,
    config: FilterConfig,
    rng: np.random.Generator,
    stats: ModeStatistics | None = None,
) -> ParticleBank:
    """Advance every particle one Euler step driven by the raw increment ``dz``.

    Gains, interaction drifts and predicted observations are formed once from
    the pre-step bank (pass ``stats`` to reuse ones already computed) and
    applied uniformly to the mode's particles. Per-particle innovations are
    ``dz~ - (h~(X) + h_hat~)/2 * dt`` in unit-noise (tilde) coordinates.
    """
    if stats is None:
        stats = mode_statistics(bank, model, mu, config)
    dt = config.dt
    sqrt_dt = np.sqrt(dt)
    inv_sw2 = 1.0 / model.obs_noise_intensity**2
    noise = rng.standard_normal(bank.states.shape)
    new_states = np.empty_like(bank.states)
    for m in range(bank.n_modes):
        dyn = model.modes[m]
        x = bank.states[m]
        h = dyn.observation(x)
        innovation = dz - 0.5 * (h + stats.h_hat_mode[m]) * dt
        new_states[m] = (
            x
            + dyn.drift(x) * dt
            + dyn.diffusion * sqrt_dt * noise[m]
            + stats.gains[m] * inv_sw2 * innovation
            + stats.controls[m] * dt
        )
    if not np.all(np.isfinite(new_states)):
        raise NonFiniteState("particle state became non-finite; reduce dt or check the model")
    return ParticleBank(states=new_states)


def bank_estimate(bank: ParticleBank, mu: np.ndarray) -> float:
    """State estimate: mode-probability-weighted average of the mode means."""
    return float(np.dot(np.asarray(mu, dtype=float), bank.mode_means()))


def initial_bank(
    n_modes: int,
    n_particles: int,
    prior_mean: float,
    prior_std: float,
    rng: np.random.Generator,
) -> ParticleBank:
    """Draw every mode's population i.i.d. from the shared Gaussian initial density."""
    if n_particles < 2:
        raise ValidationError("need at least 2 particles per mode")
    if prior_std <= 0:
        raise ValidationError("prior_std must be > 0")
    states = rng.normal(prior_mean, prior_std, size=(n_modes, n_particles))
    return ParticleBank(states=states)
