"""Output management: delimited files, metrics, and rendered figures.

All files are written atomically (temp file in the target directory, then
rename), so a failing run never leaves a partial artifact behind. Floats are
emitted with 17 significant digits so written paths round-trip exactly.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .errors import ValidationError
from .fpf import ParticleBank
from .model import ObservationPath, TruthTrajectory
from .oracles import GridDensity
from .scenario import OracleResult, RunResult

_FLOAT_FMT = "{:.17g}"


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return _FLOAT_FMT.format(float(value))


def atomic_write_text(path: str | Path, text: str) -> Path:
    """Write text to ``path`` via a temp file + rename; creates parent dirs."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    return atomic_write_text(path, "\n".join(lines) + "\n")


def write_truth_csv(path: str | Path, truth: TruthTrajectory) -> Path:
    """Columns t,x,mode with 1-based mode indices."""
    rows = zip(truth.times, truth.states, truth.modes + 1)
    return write_csv(path, ("t", "x", "mode"), rows)


def read_truth_csv(path: str | Path) -> TruthTrajectory:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return TruthTrajectory(
        times=data[:, 0], states=data[:, 1], modes=data[:, 2].astype(np.int64) - 1
    )


def write_observations_csv(path: str | Path, obs: ObservationPath) -> Path:
    """Columns t,dz; t is the left endpoint of each increment interval."""
    rows = zip(obs.times, obs.increments)
    return write_csv(path, ("t", "dz"), rows)


def read_observations_csv(path: str | Path) -> ObservationPath:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[0] < 2:
        raise ValidationError("observation file needs at least 2 increments to infer the step")
    step = float(data[1, 0] - data[0, 0])
    return ObservationPath(increments=data[:, 1], step=step)


def write_estimate_csv(path: str | Path, result: RunResult) -> Path:
    header = ["t", "xhat"] + [f"xhat_mode_{m + 1}" for m in range(result.mode_means.shape[0])]
    rows = (
        [t, xhat, *result.mode_means[:, k]]
        for k, (t, xhat) in enumerate(zip(result.times, result.estimates))
    )
    return write_csv(path, header, rows)


def write_mu_csv(path: str | Path, times: np.ndarray, mu_path: np.ndarray) -> Path:
    header = ["t"] + [f"mu_{m + 1}" for m in range(mu_path.shape[1])]
    rows = ([t, *mu_path[k]] for k, t in enumerate(times))
    return write_csv(path, header, rows)


def write_metrics(path: str | Path, metrics: dict) -> Path:
    return atomic_write_text(path, json.dumps(metrics, indent=2, sort_keys=True) + "\n")


def write_bank_csv(path: str | Path, bank: ParticleBank) -> Path:
    """Debug snapshot: columns mode,particle,x (1-based mode, 0-based particle)."""
    rows = (
        (m + 1, i, bank.states[m, i])
        for m in range(bank.n_modes)
        for i in range(bank.n_particles)
    )
    return write_csv(path, ("mode", "particle", "x"), rows)


def write_density_csv(path: str | Path, density: GridDensity) -> Path:
    header = ["x"] + [f"q_{m + 1}" for m in range(density.n_modes)]
    rows = ([x, *density.values[:, j]] for j, x in enumerate(density.grid.nodes))
    return write_csv(path, header, rows)


def write_oracle_outputs(outdir: str | Path, oracle: OracleResult) -> list[Path]:
    outdir = Path(outdir)
    paths = [
        write_mu_csv(outdir / "oracle_mu.csv", oracle.times, oracle.mu_path),
        write_csv(
            outdir / "oracle_moments.csv",
            ["t"]
            + [f"mean_{m + 1}" for m in range(oracle.mode_means.shape[0])]
            + [f"var_{m + 1}" for m in range(oracle.mode_means.shape[0])]
            + ["mean_marginal", "var_marginal"],
            (
                [t, *oracle.mode_means[:, k], *oracle.mode_variances[:, k],
                 oracle.marginal_mean[k], oracle.marginal_variance[k]]
                for k, t in enumerate(oracle.times)
            ),
        ),
        write_density_csv(outdir / "oracle_density.csv", oracle.snapshot),
    ]
    return paths


def write_sweep_csv(path: str | Path, sweep: dict) -> Path:
    header = ("seed", "rmse", "rmse_post_burn_in", "accuracy_min", "accuracy_mean")
    rows = (
        (m["seed"], m["rmse"], m["rmse_post_burn_in"], m["accuracy_min"], m["accuracy_mean"])
        for m in sweep["per_seed"]
    )
    return write_csv(path, header, rows)


def write_gain_check_csv(path: str | Path, rows: list[dict]) -> Path:
    header = ("n_particles", "constant_gain", "exact_gain_mean", "rms_error", "bound")
    return write_csv(
        path,
        header,
        (
            (r["n_particles"], r["constant_gain"], r["exact_gain_mean"], r["rms_error"], r["bound"])
            for r in rows
        ),
    )


def format_gain_check_table(rows: list[dict]) -> str:
    lines = [
        f"{'N':>8}  {'const gain':>12}  {'E[K_exact]':>12}  {'rms error':>12}  {'bound':>12}  ok"
    ]
    for r in rows:
        ok = "yes" if r["rms_error"] <= r["bound"] else "NO"
        lines.append(
            f"{r['n_particles']:>8}  {r['constant_gain']:>12.6g}  {r['exact_gain_mean']:>12.6g}"
            f"  {r['rms_error']:>12.4g}  {r['bound']:>12.4g}  {ok}"
        )
    if len(rows) >= 2 and rows[-1]["rms_error"] > 0:
        ratio = rows[0]["rms_error"] / rows[-1]["rms_error"]
        lines.append(f"error ratio N={rows[0]['n_particles']} -> N={rows[-1]['n_particles']}: {ratio:.3g}")
    return "\n".join(lines)


# --- figures -----------------------------------------------------------------

_MODE_COLORS = ("tab:blue", "tab:orange", "tab:green", "tab:red", "tab:purple")


def _save(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return path


def render_run_figures(outdir: str | Path, result: RunResult) -> list[Path]:
    """Render the standard run report: estimate vs truth, per-mode means, mu."""
    outdir = Path(outdir)
    t = result.times
    m_count = result.mode_means.shape[0]
    paths = []

    fig, ax = plt.subplots(figsize=(8, 4))
    ax.plot(t, result.truth.states, color="0.3", lw=1.2, label="truth $X_t$")
    ax.plot(t, result.estimates, color="tab:red", lw=1.2, ls="--", label="estimate $\\hat X_t$")
    ax.set_xlabel("time")
    ax.set_ylabel("state")
    ax.legend(loc="best")
    paths.append(_save(fig, outdir / "estimate.png"))

    fig, ax = plt.subplots(figsize=(8, 4))
    ax.plot(t, result.truth.states, color="0.3", lw=1.2, label="truth $X_t$")
    for m in range(m_count):
        ax.plot(
            t,
            result.mode_means[m],
            color=_MODE_COLORS[m % len(_MODE_COLORS)],
            lw=1.0,
            label=f"mode {m + 1} mean",
        )
    ax.set_xlabel("time")
    ax.set_ylabel("state")
    ax.legend(loc="best")
    paths.append(_save(fig, outdir / "mode_means.png"))

    fig, ax = plt.subplots(figsize=(8, 4))
    for m in range(m_count):
        ax.plot(
            t,
            result.mu_path[:, m],
            color=_MODE_COLORS[m % len(_MODE_COLORS)],
            lw=1.2,
            label=f"$\\mu^{{{m + 1}}}_t$",
        )
    ax.set_ylim(-0.05, 1.05)
    ax.set_xlabel("time")
    ax.set_ylabel("mode probability")
    ax.legend(loc="best")
    paths.append(_save(fig, outdir / "mu.png"))
    return paths


def render_oracle_figure(outdir: str | Path, oracle: OracleResult) -> Path:
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(11, 4))
    for m in range(oracle.mu_path.shape[1]):
        color = _MODE_COLORS[m % len(_MODE_COLORS)]
        ax1.plot(oracle.times, oracle.mu_path[:, m], color=color, label=f"$\\mu^{{{m + 1}}}_t$")
        ax2.plot(
            oracle.snapshot.grid.nodes,
            oracle.snapshot.values[m],
            color=color,
            label=f"$q_{{{m + 1}}}$",
        )
    ax1.set_xlabel("time")
    ax1.set_ylabel("mode probability (grid)")
    ax1.legend(loc="best")
    ax2.set_xlabel("x")
    ax2.set_ylabel(f"joint density at t={oracle.snapshot_time:g}")
    ax2.legend(loc="best")
    return _save(fig, Path(outdir) / "oracle.png")


def render_gain_check_figure(
    outdir: str | Path,
    grid_x: np.ndarray,
    exact_gain: np.ndarray,
    constant: float,
    mask: np.ndarray,
) -> Path:
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(grid_x[mask], exact_gain[mask], color="tab:blue", label="exact gain $K(x)$")
    ax.axhline(constant, color="tab:red", ls="--", label="constant gain")
    ax.set_xlabel("x")
    ax.set_ylabel("gain")
    ax.legend(loc="best")
    return _save(fig, Path(outdir) / "gain_check.png")
