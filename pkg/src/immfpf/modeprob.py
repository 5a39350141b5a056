"""Mode association probability filter.

Two interchangeable update paths for the posterior mode probabilities:

* an Euler step of the continuous-time recursion driven by the innovation
  ``(h_hat_m - h_hat)(dz - h_hat dt) mu_m`` plus generator mixing, and
* a discrete-time Bayes step (predict with the generator, correct with a
  particle-mixture Gaussian likelihood of the raw increment).

Both floor and renormalize, so the output is always on the simplex.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import ValidationError
from .fpf import FilterConfig, ParticleBank
from .model import GeneratorMatrix, HybridModel


@dataclass(frozen=True)
class ModeProbabilities:
    """Length-M simplex vector of mode association probabilities."""

    mu: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.mu, dtype=float)
        if arr.ndim != 1 or arr.size < 1:
            raise ValidationError("mu must be a 1-D vector")
        if np.any(arr < 0) or abs(arr.sum() - 1.0) > 1e-12:
            raise ValidationError("mu must be nonnegative and sum to 1 within 1e-12")
        object.__setattr__(self, "mu", arr)

    def __len__(self) -> int:
        return self.mu.size


def normalize_clamp(mu: np.ndarray, floor: float) -> ModeProbabilities:
    """Floor entries at ``floor`` and renormalize onto the simplex."""
    arr = np.asarray(mu, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValidationError("mu entries must be finite")
    clamped = np.maximum(arr, floor)
    return ModeProbabilities(mu=clamped / clamped.sum())


def mu_step_euler(
    mu: ModeProbabilities,
    h_hat_mode: np.ndarray,
    h_hat_global: float,
    gen: GeneratorMatrix,
    dz_rescaled: float,
    dt: float,
    config: FilterConfig,
) -> ModeProbabilities:
    """One Euler step of the continuous-time mode probability recursion.

    Inputs are in unit-observation-noise units: ``h_hat_mode``/``h_hat_global``
    are the rescaled predicted observations and ``dz_rescaled = dz / sigma_W``.
    """
    h = np.asarray(h_hat_mode, dtype=float)
    raw = (
        mu.mu
        + gen.q.T @ mu.mu * dt
        + (h - h_hat_global) * (dz_rescaled - h_hat_global * dt) * mu.mu
    )
    return normalize_clamp(raw, config.clamp_floor)


def mu_step_bayes(
    mu: ModeProbabilities,
    bank: ParticleBank,
    model: HybridModel,
    gen: GeneratorMatrix,
    dz: float,
    dt: float,
    config: FilterConfig,
) -> ModeProbabilities:
    """Prediction/correction update: generator mixing, then a particle-mixture
    Gaussian likelihood of the raw increment ``dz``.

    ``L_m(dz) = (1/N) sum_i N(dz; h^m(X_i) dt, sigma_W^2 dt)``, accumulated in
    log space. If every mode's likelihood underflows to zero the correction is
    skipped and the prediction is returned (degenerate observation).
    """
    mu_pred = mu.mu + gen.q.T @ mu.mu * dt
    var = model.obs_noise_intensity**2 * dt
    log_l = np.empty(len(mu))
    for m in range(len(mu)):
        h = model.modes[m].observation(bank.states[m])
        resid = dz - h * dt
        log_pdf = -(resid**2) / (2.0 * var)  # common normalizer cancels across modes
        log_l[m] = logsumexp(log_pdf) - np.log(bank.n_particles)
    peak = np.max(log_l)
    if not np.isfinite(peak):
        return normalize_clamp(mu_pred, config.clamp_floor)
    weights = np.exp(log_l - peak) * np.maximum(mu_pred, 0.0)
    total = weights.sum()
    if total <= 0.0 or not np.isfinite(total):
        return normalize_clamp(mu_pred, config.clamp_floor)
    return normalize_clamp(weights / total, config.clamp_floor)
