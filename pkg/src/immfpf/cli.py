"""Command-line entry point.

Subcommands: simulate, filter, oracle, experiment, sweep, gain-check. Every
command takes a config file; ``--seed``, ``--out``, ``--particles``, ``--dt``
and ``--mu-update`` override the corresponding config values. The default
output directory is the config's [output] dir, else $IMMFPF_OUT, else ./out.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import reports
from .config import ScenarioConfig, parse_config
from .errors import ImmFpfError, ValidationError
from .oracles import Grid1D, grid_gain_exact
from .scenario import (
    gain_check,
    kde_on_grid,
    run_filter,
    run_oracle,
    run_scenario,
    seed_sweep,
    truth_mode_path,
)
from .model import simulate_truth, synthesize_observations
from . import rng as rngmod

_COMMANDS = ("simulate", "filter", "oracle", "experiment", "sweep", "gain-check")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="immfpf",
        description="Interacting multiple model feedback particle filter toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, desc in (
        ("simulate", "generate a truth trajectory and synthetic observations"),
        ("filter", "run the particle filter bank on stored observations"),
        ("oracle", "integrate the exact grid recursion along a simulated path"),
        ("experiment", "full run: truth, observations, filter, metrics, figures"),
        ("sweep", "run every configured seed and aggregate metrics"),
        ("gain-check", "validate the constant gain against the exact grid gain"),
    ):
        p = sub.add_parser(name, help=desc)
        p.add_argument("config", help="scenario config file")
        p.add_argument("--seed", type=int, default=None, help="override the first config seed")
        p.add_argument("--out", default=None, help="override the output directory")
        p.add_argument("--particles", type=int, default=None, help="override n_particles")
        p.add_argument("--dt", type=float, default=None, help="override the step size")
        p.add_argument(
            "--mu-update",
            choices=("euler", "bayes"),
            default=None,
            help="override the mode probability update path",
        )
        p.add_argument("--no-figures", action="store_true", help="skip figure rendering")
        if name == "filter":
            p.add_argument("--obs", required=True, help="observations CSV (t,dz)")
            p.add_argument("--truth", default=None, help="optional truth CSV for metrics")
    return parser


def _apply_overrides(cfg: ScenarioConfig, args: argparse.Namespace) -> ScenarioConfig:
    updates = {}
    if args.seed is not None:
        updates["seeds"] = (args.seed,) + tuple(s for s in cfg.seeds if s != args.seed)
    if args.particles is not None:
        updates["n_particles"] = args.particles
    if args.dt is not None:
        updates["dt"] = args.dt
    if getattr(args, "mu_update", None) is not None:
        updates["mu_update"] = args.mu_update
    if args.out is not None:
        updates["output_dir"] = args.out
    return replace(cfg, **updates) if updates else cfg


def _outdir(cfg: ScenarioConfig) -> Path:
    return Path(cfg.output_dir or os.environ.get("IMMFPF_OUT") or "out")


def _cmd_simulate(cfg: ScenarioConfig, args) -> int:
    seed = cfg.seeds[0]
    model = cfg.build_model()
    truth = simulate_truth(
        model, cfg.x0, cfg.dt, cfg.horizon, seed, mode_path=truth_mode_path(cfg, model, seed)
    )
    obs = synthesize_observations(model, truth, seed)
    outdir = _outdir(cfg)
    reports.write_truth_csv(outdir / "truth.csv", truth)
    reports.write_observations_csv(outdir / "observations.csv", obs)
    print(f"wrote truth.csv and observations.csv to {outdir}")
    return 0


def _cmd_filter(cfg: ScenarioConfig, args) -> int:
    from .scenario import RunResult, compute_metrics

    seed = cfg.seeds[0]
    model = cfg.build_model()
    obs = reports.read_observations_csv(args.obs)
    estimates, mode_means, mu_path = run_filter(model, obs, cfg, seed)
    times = np.arange(len(obs.increments) + 1) * obs.step
    outdir = _outdir(cfg)
    header = ["t", "xhat"] + [f"xhat_mode_{m + 1}" for m in range(mode_means.shape[0])]
    reports.write_csv(
        outdir / "estimate.csv",
        header,
        ([t, estimates[k], *mode_means[:, k]] for k, t in enumerate(times)),
    )
    reports.write_mu_csv(outdir / "mu.csv", times, mu_path)
    if args.truth is not None:
        truth = reports.read_truth_csv(args.truth)
        result = RunResult(
            times=times,
            truth=truth,
            observations=obs,
            estimates=estimates,
            mode_means=mode_means,
            mu_path=mu_path,
            metrics={},
        )
        metrics = compute_metrics(result, cfg.burn_in)
        metrics["seed"] = seed
        reports.write_metrics(outdir / "metrics.json", metrics)
    print(f"wrote estimate.csv and mu.csv to {outdir}")
    return 0


def _cmd_oracle(cfg: ScenarioConfig, args) -> int:
    if cfg.oracle is None:
        raise ValidationError("oracle command needs an [oracle] section in the config")
    seed = cfg.seeds[0]
    model = cfg.build_model()
    truth = simulate_truth(
        model, cfg.x0, cfg.dt, cfg.horizon, seed, mode_path=truth_mode_path(cfg, model, seed)
    )
    obs = synthesize_observations(model, truth, seed)
    oracle = run_oracle(cfg, obs)
    outdir = _outdir(cfg)
    reports.write_truth_csv(outdir / "truth.csv", truth)
    reports.write_observations_csv(outdir / "observations.csv", obs)
    reports.write_oracle_outputs(outdir, oracle)
    if not args.no_figures:
        reports.render_oracle_figure(outdir, oracle)
    print(f"wrote oracle outputs to {outdir}")
    return 0


def _cmd_experiment(cfg: ScenarioConfig, args) -> int:
    seed = cfg.seeds[0]
    result = run_scenario(cfg, seed)
    outdir = _outdir(cfg)
    reports.write_truth_csv(outdir / "truth.csv", result.truth)
    reports.write_observations_csv(outdir / "observations.csv", result.observations)
    reports.write_estimate_csv(outdir / "estimate.csv", result)
    reports.write_mu_csv(outdir / "mu.csv", result.times, result.mu_path)
    reports.write_metrics(outdir / "metrics.json", result.metrics)
    if cfg.oracle is not None:
        oracle = run_oracle(cfg, result.observations)
        reports.write_oracle_outputs(outdir, oracle)
        if not args.no_figures:
            reports.render_oracle_figure(outdir, oracle)
    if not args.no_figures:
        reports.render_run_figures(outdir, result)
    print(
        f"seed {seed}: rmse={result.metrics['rmse']:.4g} "
        f"rmse_post_burn_in={result.metrics['rmse_post_burn_in']:.4g} "
        f"accuracy_min={result.metrics['accuracy_min']:.3g}; outputs in {outdir}"
    )
    return 0


def _cmd_sweep(cfg: ScenarioConfig, args) -> int:
    sweep = seed_sweep(cfg)
    outdir = _outdir(cfg)
    reports.write_sweep_csv(outdir / "sweep.csv", sweep)
    reports.write_metrics(outdir / "metrics.json", sweep["aggregate"])
    agg = sweep["aggregate"]
    print(
        f"{agg['n_seeds']} seeds: rmse {agg['rmse']['mean']:.4g} +- {agg['rmse']['std']:.2g}, "
        f"accuracy_min {agg['accuracy_min']['mean']:.3g} +- {agg['accuracy_min']['std']:.2g}; "
        f"outputs in {outdir}"
    )
    return 0


def _cmd_gain_check(cfg: ScenarioConfig, args) -> int:
    seed = cfg.seeds[0]
    sw = cfg.obs_noise_intensity
    obs_fn = cfg.modes[0].observation

    def h_rescaled(x):
        return obs_fn(x) / sw

    rows = gain_check(h_rescaled, seed)
    table = reports.format_gain_check_table(rows)
    print(table)
    outdir = _outdir(cfg)
    reports.write_gain_check_csv(outdir / "gain_check.csv", rows)
    if not args.no_figures:
        grid = Grid1D(-8.0, 8.0, 3201)
        n = rows[-1]["n_particles"]
        x = rngmod.stream(seed, rngmod.GAIN_CHECK, n, 0).standard_normal(n)
        rho = kde_on_grid(x, grid, bandwidth=n ** (-1.0 / 5.0))
        exact, _ = grid_gain_exact(grid, rho, h_rescaled(grid.nodes))
        mask = np.abs(grid.nodes) <= 4.0
        reports.render_gain_check_figure(
            outdir, grid.nodes, exact, rows[-1]["constant_gain"], mask
        )
    ok = all(r["rms_error"] <= r["bound"] for r in rows)
    return 0 if ok else 1


_HANDLERS = {
    "simulate": _cmd_simulate,
    "filter": _cmd_filter,
    "oracle": _cmd_oracle,
    "experiment": _cmd_experiment,
    "sweep": _cmd_sweep,
    "gain-check": _cmd_gain_check,
}


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config)
        cfg = _apply_overrides(cfg, args)
        return _HANDLERS[args.command](cfg, args)
    except ImmFpfError as exc:
        print(f"error:{type(exc).__name__}:{exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error:{type(exc).__name__}:{exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
