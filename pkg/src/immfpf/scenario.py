"""End-to-end experiment orchestration.

Generates truth and observations, runs the particle bank and the mode
probability filter step-locked on one observation stream, optionally runs the
grid oracle on exactly the same increments, and computes tracking metrics.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np
from scipy.ndimage import gaussian_filter1d

from . import rng as rngmod
from .config import ScenarioConfig
from .errors import SegmentShorterThanBurnIn, ValidationError
from .fpf import (
    bank_estimate,
    fpf_step,
    initial_bank,
    mode_statistics,
)
from .model import (
    HybridModel,
    ObservationPath,
    TruthTrajectory,
    modes_from_switches,
    simulate_mode_chain,
    simulate_truth,
    synthesize_observations,
)
from .modeprob import ModeProbabilities, mu_step_bayes, mu_step_euler
from .oracles import Grid1D, GridDensity, gaussian_grid_density, grid_gain_exact, grid_moments, kushner_grid_step


@dataclass(frozen=True)
class RunResult:
    """Everything produced by one filtering run, on one shared time grid."""

    times: np.ndarray
    truth: TruthTrajectory
    observations: ObservationPath
    estimates: np.ndarray
    mode_means: np.ndarray  # (M, n_steps + 1)
    mu_path: np.ndarray  # (n_steps + 1, M)
    metrics: dict

    def __post_init__(self) -> None:
        n = len(self.times)
        if not (
            len(self.truth.times) == n
            and len(self.estimates) == n
            and self.mode_means.shape[1] == n
            and self.mu_path.shape[0] == n
        ):
            raise ValidationError("all result paths must share the time grid")


@dataclass(frozen=True)
class OracleResult:
    """Grid-solver outputs on the same time grid as the filter run."""

    times: np.ndarray
    mu_path: np.ndarray  # (n_steps + 1, M)
    mode_means: np.ndarray  # (M, n_steps + 1)
    mode_variances: np.ndarray  # (M, n_steps + 1)
    marginal_mean: np.ndarray
    marginal_variance: np.ndarray
    snapshot: GridDensity
    snapshot_time: float


def truth_mode_path(config: ScenarioConfig, model: HybridModel, seed: int) -> np.ndarray:
    if config.mode_source == "script":
        return modes_from_switches(config.switches, config.dt, config.horizon)
    return simulate_mode_chain(model.generator, config.init_mode, config.dt, config.horizon, seed)


def run_filter(
    model: HybridModel,
    obs: ObservationPath,
    config: ScenarioConfig,
    seed: int,
    mu_update: str | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Run the bank + mode probability filter along an observation path.

    Returns (estimates, mode_means, mu_path) with one row/column per grid time.
    Mode predicted observations feeding the mu update come from the pre-move
    bank, matching the per-step ordering of the discrete algorithm.
    """
    choice = mu_update or config.mu_update
    if choice not in ("euler", "bayes"):
        raise ValidationError(f"mu_update must be euler or bayes, got {choice!r}")
    n = len(obs.increments)
    m_count = model.n_modes
    fc = config.filter_config()
    sw = model.obs_noise_intensity
    bank = initial_bank(
        m_count,
        config.n_particles,
        config.prior_mean,
        config.prior_std,
        rngmod.stream(seed, rngmod.PARTICLE_INIT),
    )
    mu = ModeProbabilities(mu=np.asarray(model.initial_mode_dist, dtype=float))
    noise_rng = rngmod.stream(seed, rngmod.FILTER_NOISE)

    estimates = np.empty(n + 1)
    mode_means = np.empty((m_count, n + 1))
    mu_path = np.empty((n + 1, m_count))
    for k in range(n):
        stats = mode_statistics(bank, model, mu.mu, fc)
        estimates[k] = bank_estimate(bank, mu.mu)
        mode_means[:, k] = bank.mode_means()
        mu_path[k] = mu.mu
        dz = float(obs.increments[k])
        new_bank = fpf_step(bank, mu.mu, dz, model, fc, noise_rng, stats=stats)
        if choice == "euler":
            mu = mu_step_euler(
                mu,
                stats.h_hat_mode / sw,
                stats.h_hat_global / sw,
                model.generator,
                dz / sw,
                fc.dt,
                fc,
            )
        else:
            mu = mu_step_bayes(mu, bank, model, model.generator, dz, fc.dt, fc)
        bank = new_bank
    estimates[n] = bank_estimate(bank, mu.mu)
    mode_means[:, n] = bank.mode_means()
    mu_path[n] = mu.mu
    return estimates, mode_means, mu_path


def run_scenario(config: ScenarioConfig, seed: int, mu_update: str | None = None) -> RunResult:
    """Simulate truth + observations for ``seed`` and filter them."""
    t0 = time.perf_counter()
    model = config.build_model()
    mode_path = truth_mode_path(config, model, seed)
    truth = simulate_truth(
        model, config.x0, config.dt, config.horizon, seed, mode_path=mode_path
    )
    obs = synthesize_observations(model, truth, seed)
    estimates, mode_means, mu_path = run_filter(model, obs, config, seed, mu_update)
    result = RunResult(
        times=truth.times,
        truth=truth,
        observations=obs,
        estimates=estimates,
        mode_means=mode_means,
        mu_path=mu_path,
        metrics={},
    )
    metrics = compute_metrics(result, config.burn_in)
    metrics["seed"] = seed
    metrics["runtime_s"] = time.perf_counter() - t0
    return replace(result, metrics=metrics)


def truth_segments(truth: TruthTrajectory) -> list[tuple[int, int, int]]:
    """Maximal constant-mode runs as (start index, end index inclusive, mode)."""
    modes = truth.modes
    segments = []
    start = 0
    for k in range(1, len(modes)):
        if modes[k] != modes[start]:
            segments.append((start, k - 1, int(modes[start])))
            start = k
    segments.append((start, len(modes) - 1, int(modes[start])))
    return segments


def mode_accuracy(result: RunResult, burn_in_per_segment: float) -> list[float]:
    """Per-segment fraction of post-burn-in steps whose argmax mu is the true mode.

    Ties resolve to the lowest mode index (numpy argmax), so a tie involving a
    lower-indexed wrong mode counts as a miss.
    """
    dt = result.truth.dt
    fractions = []
    for start, end, mode in truth_segments(result.truth):
        skip = int(np.ceil(burn_in_per_segment / dt)) if dt > 0 else 0
        first = start + skip
        if first > end:
            raise SegmentShorterThanBurnIn(
                f"segment [{start}, {end}] (mode {mode + 1}) shorter than burn-in"
            )
        pred = np.argmax(result.mu_path[first : end + 1], axis=1)
        fractions.append(float(np.mean(pred == mode)))
    return fractions


def compute_metrics(result: RunResult, burn_in: float) -> dict:
    """RMSE (full and post-burn-in) and per-segment mode accuracy."""
    err = result.estimates - result.truth.states
    dt = result.truth.dt
    segments = truth_segments(result.truth)
    post_mask = np.zeros(len(result.times), dtype=bool)
    skip = int(np.ceil(burn_in / dt)) if dt > 0 else 0
    for start, end, _ in segments:
        post_mask[min(start + skip, end + 1) : end + 1] = True
    metrics = {
        "rmse": float(np.sqrt(np.mean(err**2))),
        "rmse_post_burn_in": float(np.sqrt(np.mean(err[post_mask] ** 2)))
        if np.any(post_mask)
        else float("nan"),
        "burn_in": burn_in,
        "n_steps": len(result.times) - 1,
        "segments": [
            {
                "start_time": float(result.times[s]),
                "end_time": float(result.times[e]),
                "mode": m + 1,
            }
            for s, e, m in segments
        ],
    }
    try:
        accs = mode_accuracy(result, burn_in)
        for seg, acc in zip(metrics["segments"], accs):
            seg["accuracy"] = acc
        metrics["accuracy_min"] = float(min(accs))
        metrics["accuracy_mean"] = float(np.mean(accs))
    except SegmentShorterThanBurnIn:
        metrics["accuracy_min"] = float("nan")
        metrics["accuracy_mean"] = float("nan")
    return metrics


def seed_sweep(config: ScenarioConfig, mu_update: str | None = None) -> dict:
    """Run every configured seed and aggregate the metrics.

    Returns {"per_seed": [run metrics...], "aggregate": {...}}; requires at
    least two seeds.
    """
    if len(config.seeds) < 2:
        raise ValidationError("seed sweep requires at least 2 seeds")
    per_seed = [run_scenario(config, seed, mu_update).metrics for seed in config.seeds]

    def agg(key: str) -> dict:
        vals = np.array([m[key] for m in per_seed])
        return {"mean": float(vals.mean()), "std": float(vals.std())}

    return {
        "per_seed": per_seed,
        "aggregate": {
            "n_seeds": len(per_seed),
            "rmse": agg("rmse"),
            "rmse_post_burn_in": agg("rmse_post_burn_in"),
            "accuracy_min": agg("accuracy_min"),
            "accuracy_mean": agg("accuracy_mean"),
        },
    }


def run_oracle(config: ScenarioConfig, obs: ObservationPath) -> OracleResult:
    """Integrate the exact grid recursion on the same observation increments."""
    if config.oracle is None:
        raise ValidationError("config has no [oracle] section")
    model = config.build_model()
    grid = Grid1D(config.oracle.x_min, config.oracle.x_max, config.oracle.n_cells)
    density = gaussian_grid_density(
        grid, config.prior_mean, config.prior_std, np.asarray(config.initial_mode_dist)
    )
    n = len(obs.increments)
    m_count = model.n_modes
    mu_path = np.empty((n + 1, m_count))
    means = np.empty((m_count, n + 1))
    variances = np.empty((m_count, n + 1))
    marg_mean = np.empty(n + 1)
    marg_var = np.empty(n + 1)
    snap_time = (
        config.oracle.snapshot_time if config.oracle.snapshot_time is not None else config.horizon
    )
    snap_idx = min(max(int(round(snap_time / config.dt)), 0), n)
    snapshot = density

    def record(k: int, d: GridDensity) -> None:
        mu_path[k] = d.mode_masses()
        for m in range(m_count):
            _, mean_m, var_m = grid_moments(d, m)
            means[m, k] = mean_m
            variances[m, k] = var_m
        _, marg_mean[k], marg_var[k] = grid_moments(d, None)

    record(0, density)
    for k in range(n):
        density = kushner_grid_step(density, model, float(obs.increments[k]), config.dt)
        record(k + 1, density)
        if k + 1 == snap_idx:
            snapshot = density
    return OracleResult(
        times=np.arange(n + 1) * config.dt,
        mu_path=mu_path,
        mode_means=means,
        mode_variances=variances,
        marginal_mean=marg_mean,
        marginal_variance=marg_var,
        snapshot=snapshot,
        snapshot_time=snap_idx * config.dt,
    )


def kde_on_grid(samples: np.ndarray, grid: Grid1D, bandwidth: float) -> np.ndarray:
    """Gaussian kernel density estimate evaluated on the grid.

    Implemented as a histogram smoothed with a Gaussian of the requested
    bandwidth; accurate when the bandwidth spans several grid cells.
    """
    h_x = grid.h_x
    edges = np.linspace(grid.x_min - h_x / 2, grid.x_max + h_x / 2, grid.n_cells + 1)
    counts, _ = np.histogram(samples, bins=edges)
    density = counts.astype(float) / (len(samples) * h_x)
    smoothed = gaussian_filter1d(density, sigma=bandwidth / h_x, mode="constant")
    total = smoothed.sum() * h_x
    return smoothed / total


def gain_check(
    h_fn,
    seed: int,
    n_values: tuple[int, ...] = (1_000, 10_000),
    grid: Grid1D | None = None,
    n_replicates: int = 16,
) -> list[dict]:
    """Compare the particle constant gain with the exact grid gain's mean.

    For each particle count N: draw standard-normal particles, compute the
    constant gain, build a kernel density estimate (bandwidth N^(-1/5)), solve
    the gain BVP on the grid, and average the exact gain under the density.
    The error is the root-mean-square gap over replicates; rows also carry the
    Monte Carlo bound 3 N^(-1/2) |E[K]|.
    """
    if grid is None:
        grid = Grid1D(-8.0, 8.0, 3201)
    h_grid = h_fn(grid.nodes)
    rows = []
    for n in n_values:
        gaps = []
        const_vals = []
        exact_vals = []
        for r in range(n_replicates):
            x = rngmod.stream(seed, rngmod.GAIN_CHECK, n, r).standard_normal(n)
            h = h_fn(x)
            h_hat = float(np.mean(h))
            k_const = float(np.mean((h - h_hat) * x))
            rho = kde_on_grid(x, grid, bandwidth=n ** (-1.0 / 5.0))
            k_exact, _ = grid_gain_exact(grid, rho, h_grid)
            e_k = float((k_exact * rho).sum() * grid.h_x)
            gaps.append(k_const - e_k)
            const_vals.append(k_const)
            exact_vals.append(e_k)
        rms = float(np.sqrt(np.mean(np.square(gaps))))
        mean_exact = float(np.mean(exact_vals))
        rows.append(
            {
                "n_particles": n,
                "constant_gain": float(np.mean(const_vals)),
                "exact_gain_mean": mean_exact,
                "rms_error": rms,
                "bound": 3.0 * n ** (-0.5) * abs(mean_exact),
                "n_replicates": n_replicates,
            }
        )
    return rows
