"""Scenario configuration: typed config object, INI-style parser, normalizer.

Config files are flat sectioned key/value text (``configparser`` grammar) so
experiment definitions stay human-diffable. Drift and observation functions
are written in a tiny ``kind:params`` grammar (see :data:`FUNCTION_KINDS`).
Mode indices are 1-based in files and CSVs, 0-based in code.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ParseError, ValidationError
from .fpf import FilterConfig
from .model import GeneratorMatrix, HybridModel, ModeDynamics, validate_generator

#: Supported function specs: name -> (number of parameters, formula).
FUNCTION_KINDS = {
    "const": (1, "f(x) = c"),
    "linear": (1, "f(x) = a*x"),
    "affine": (2, "f(x) = a*x + b"),
    "arctan": (1, "f(x) = arctan(x / L)"),
}
_ALIASES = {"zero": "const:0", "identity": "linear:1"}


@dataclass(frozen=True)
class FnSpec:
    """A scalar function described by a grammar string; callable on arrays."""

    kind: str
    params: tuple[float, ...]

    @classmethod
    def parse(cls, text: str) -> "FnSpec":
        text = text.strip()
        text = _ALIASES.get(text, text)
        kind, _, rest = text.partition(":")
        kind = kind.strip()
        if kind not in FUNCTION_KINDS:
            raise ParseError(f"unknown function kind {kind!r} in {text!r}")
        n_params, _ = FUNCTION_KINDS[kind]
        try:
            params = tuple(float(p) for p in rest.split(",")) if rest.strip() else ()
        except ValueError as exc:
            raise ParseError(f"bad function parameters in {text!r}: {exc}") from None
        if len(params) != n_params:
            raise ParseError(f"{kind!r} takes {n_params} parameter(s), got {len(params)}")
        return cls(kind=kind, params=params)

    def format(self) -> str:
        return f"{self.kind}:{','.join(repr(p) for p in self.params)}"

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "const":
            return np.full(x.shape, self.params[0])
        if self.kind == "linear":
            return self.params[0] * x
        if self.kind == "affine":
            return self.params[0] * x + self.params[1]
        return np.arctan(x / self.params[0])


@dataclass(frozen=True)
class ModeSpec:
    """One mode's dynamics as config-level descriptors."""

    drift: FnSpec
    diffusion: float
    observation: FnSpec


@dataclass(frozen=True)
class OracleSettings:
    """Grid solver settings for runs that also integrate the exact density."""

    x_min: float
    x_max: float
    n_cells: int
    snapshot_time: float | None = None


@dataclass(frozen=True)
class ScenarioConfig:
    """Complete, validated experiment description."""

    modes: tuple[ModeSpec, ...]
    generator_rows: tuple[tuple[float, ...], ...]
    obs_noise_intensity: float
    initial_mode_dist: tuple[float, ...]
    x0: float
    mode_source: str  # "script" | "markov"
    switches: tuple[tuple[float, int], ...]  # (time, 0-based mode)
    init_mode: int  # 0-based, for markov truth
    prior_mean: float
    prior_std: float
    dt: float
    horizon: float
    n_particles: int
    seeds: tuple[int, ...]
    mu_update: str = "euler"
    clamp_floor: float = 1e-9
    c_cap: float = 1e3
    burn_in: float = 1.0
    oracle: OracleSettings | None = None
    output_dir: str | None = None

    def __post_init__(self) -> None:
        m = len(self.modes)
        if m == 0:
            raise ValidationError("at least one mode is required")
        if len(self.generator_rows) != m or any(len(r) != m for r in self.generator_rows):
            raise ValidationError("generator must be M x M for M modes")
        if len(self.initial_mode_dist) != m:
            raise ValidationError("initial_mode_dist length must equal the number of modes")
        if self.dt <= 0:
            raise ValidationError("dt must be > 0")
        if self.horizon < 0:
            raise ValidationError("horizon must be >= 0")
        if self.n_particles < 2:
            raise ValidationError("n_particles must be >= 2")
        if self.prior_std <= 0:
            raise ValidationError("prior std must be > 0")
        if not self.seeds:
            raise ValidationError("at least one seed is required")
        if self.mu_update not in ("euler", "bayes"):
            raise ValidationError(f"mu_update must be euler or bayes, got {self.mu_update!r}")
        if self.mode_source not in ("script", "markov"):
            raise ValidationError(f"mode_source must be script or markov, got {self.mode_source!r}")
        if self.mode_source == "script":
            if not self.switches:
                raise ValidationError("script truth needs a switch schedule")
            if any(not 0 <= mode < m for _, mode in self.switches):
                raise ValidationError("switch schedule references an out-of-range mode")
        if not 0 <= self.init_mode < m:
            raise ValidationError("init_mode out of range")
        if self.burn_in < 0:
            raise ValidationError("burn_in must be >= 0")

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))

    def build_model(self) -> HybridModel:
        modes = tuple(
            ModeDynamics(drift=ms.drift, diffusion=ms.diffusion, observation=ms.observation)
            for ms in self.modes
        )
        return HybridModel(
            modes=modes,
            generator=validate_generator(np.array(self.generator_rows)),
            obs_noise_intensity=self.obs_noise_intensity,
            initial_mode_dist=np.array(self.initial_mode_dist),
        )

    def build_generator(self) -> GeneratorMatrix:
        return validate_generator(np.array(self.generator_rows))

    def filter_config(self) -> FilterConfig:
        return FilterConfig(dt=self.dt, clamp_floor=self.clamp_floor, c_cap=self.c_cap)


# Section -> allowed keys (required ones marked by _REQUIRED below).
_SCHEMA: dict[str, tuple[str, ...]] = {
    "model": ("obs_noise_intensity", "initial_mode_dist"),
    "generator": ("rows",),
    "truth": ("x0", "mode_source", "switches", "init_mode"),
    "prior": ("mean", "std"),
    "run": (
        "dt",
        "horizon",
        "n_particles",
        "seeds",
        "mu_update",
        "clamp_floor",
        "c_cap",
        "burn_in",
    ),
    "oracle": ("x_min", "x_max", "n_cells", "snapshot_time"),
    "output": ("dir",),
}
_REQUIRED_SECTIONS = ("model", "generator", "truth", "prior", "run")
_REQUIRED_KEYS = {
    "model": ("obs_noise_intensity", "initial_mode_dist"),
    "generator": ("rows",),
    "truth": ("x0", "mode_source"),
    "prior": ("mean", "std"),
    "run": ("dt", "horizon", "n_particles", "seeds"),
    "oracle": ("x_min", "x_max", "n_cells"),
}
_MODE_KEYS = ("drift", "diffusion", "observation")


def _get(section: configparser.SectionProxy, key: str, convert, what: str):
    try:
        return convert(section[key])
    except (ValueError, ParseError) as exc:
        raise ParseError(f"[{section.name}] {key}: {exc}") from None
    except KeyError:
        raise ValidationError(f"missing required key {key!r} in section [{section.name}]: {what}")


def _float_list(text: str) -> tuple[float, ...]:
    return tuple(float(p) for p in text.split(","))


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(p) for p in text.split(","))


def _matrix(text: str) -> tuple[tuple[float, ...], ...]:
    rows = [r for r in text.split(";") if r.strip()]
    return tuple(_float_list(r) for r in rows)


def _switches(text: str) -> tuple[tuple[float, int], ...]:
    out = []
    for item in text.split(","):
        t, _, m = item.partition(":")
        if not m:
            raise ValueError(f"switch entry {item.strip()!r} is not time:mode")
        out.append((float(t), int(m) - 1))
    return tuple(out)


def parse_config(path: str | Path) -> ScenarioConfig:
    """Parse and fully validate a scenario config file.

    Raises :class:`ParseError` for malformed text or unknown sections/keys and
    :class:`ValidationError` for invariant violations.
    """
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"config file not found: {path}")
    cp = configparser.ConfigParser(interpolation=None)
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except configparser.Error as exc:
        raise ParseError(f"{path}: {exc}") from None

    mode_sections = sorted(
        (s for s in cp.sections() if s.startswith("mode.")),
        key=lambda s: int(s.split(".", 1)[1]) if s.split(".", 1)[1].isdigit() else -1,
    )
    for s in cp.sections():
        if s.startswith("mode."):
            tail = s.split(".", 1)[1]
            if not tail.isdigit() or int(tail) < 1:
                raise ParseError(f"bad mode section name [{s}]; use [mode.1], [mode.2], ...")
            for key in cp[s]:
                if key not in _MODE_KEYS:
                    raise ParseError(f"unknown key {key!r} in section [{s}]")
        elif s in _SCHEMA:
            for key in cp[s]:
                if key not in _SCHEMA[s]:
                    raise ParseError(f"unknown key {key!r} in section [{s}]")
        else:
            raise ParseError(f"unknown section [{s}]")
    for s in _REQUIRED_SECTIONS:
        if s not in cp:
            raise ValidationError(f"missing required section [{s}]")
    if not mode_sections:
        raise ValidationError("missing [mode.1] section: the model needs at least one mode")
    expected = [f"mode.{i}" for i in range(1, len(mode_sections) + 1)]
    if mode_sections != expected:
        raise ValidationError(f"mode sections must be consecutive from mode.1, got {mode_sections}")
    for s, keys in _REQUIRED_KEYS.items():
        if s in cp:
            for key in keys:
                if key not in cp[s]:
                    raise ValidationError(f"missing required key {key!r} in section [{s}]")
    for s in mode_sections:
        for key in _MODE_KEYS:
            if key not in cp[s]:
                raise ValidationError(f"missing required key {key!r} in section [{s}]")

    modes = tuple(
        ModeSpec(
            drift=_get(cp[s], "drift", FnSpec.parse, "drift function"),
            diffusion=_get(cp[s], "diffusion", float, "diffusion coefficient"),
            observation=_get(cp[s], "observation", FnSpec.parse, "observation function"),
        )
        for s in mode_sections
    )

    mdl = cp["model"]
    dist_text = mdl["initial_mode_dist"].strip()
    if dist_text == "uniform":
        dist = tuple(1.0 / len(modes) for _ in modes)
    else:
        dist = _get(mdl, "initial_mode_dist", _float_list, "simplex vector")

    truth = cp["truth"]
    mode_source = truth["mode_source"].strip()
    switches: tuple[tuple[float, int], ...] = ()
    if "switches" in truth:
        switches = _get(truth, "switches", _switches, "time:mode list")
    init_mode = int(truth.get("init_mode", "1")) - 1

    run = cp["run"]
    oracle = None
    if "oracle" in cp:
        osec = cp["oracle"]
        oracle = OracleSettings(
            x_min=_get(osec, "x_min", float, "grid lower bound"),
            x_max=_get(osec, "x_max", float, "grid upper bound"),
            n_cells=_get(osec, "n_cells", int, "grid size"),
            snapshot_time=float(osec["snapshot_time"]) if "snapshot_time" in osec else None,
        )
    output_dir = cp["output"]["dir"].strip() if ("output" in cp and "dir" in cp["output"]) else None

    return ScenarioConfig(
        modes=modes,
        generator_rows=_get(cp["generator"], "rows", _matrix, "semicolon-separated rows"),
        obs_noise_intensity=_get(mdl, "obs_noise_intensity", float, "sigma_W"),
        initial_mode_dist=dist,
        x0=_get(truth, "x0", float, "initial state"),
        mode_source=mode_source,
        switches=switches,
        init_mode=init_mode,
        prior_mean=_get(cp["prior"], "mean", float, "prior mean"),
        prior_std=_get(cp["prior"], "std", float, "prior std"),
        dt=_get(run, "dt", float, "step size"),
        horizon=_get(run, "horizon", float, "total time"),
        n_particles=_get(run, "n_particles", int, "particles per mode"),
        seeds=_get(run, "seeds", _int_list, "seed list"),
        mu_update=run.get("mu_update", "euler").strip(),
        clamp_floor=float(run.get("clamp_floor", "1e-9")),
        c_cap=float(run.get("c_cap", "1e3")),
        burn_in=float(run.get("burn_in", "1.0")),
        oracle=oracle,
        output_dir=output_dir,
    )


def format_config(cfg: ScenarioConfig) -> str:
    """Render a config back to normalized file text (round-trips through parse_config)."""
    lines: list[str] = []

    def sec(name: str, items: list[tuple[str, str]]) -> None:
        lines.append(f"[{name}]")
        lines.extend(f"{k} = {v}" for k, v in items)
        lines.append("")

    sec(
        "model",
        [
            ("obs_noise_intensity", repr(cfg.obs_noise_intensity)),
            ("initial_mode_dist", ", ".join(repr(v) for v in cfg.initial_mode_dist)),
        ],
    )
    for i, ms in enumerate(cfg.modes, start=1):
        sec(
            f"mode.{i}",
            [
                ("drift", ms.drift.format()),
                ("diffusion", repr(ms.diffusion)),
                ("observation", ms.observation.format()),
            ],
        )
    sec(
        "generator",
        [("rows", "; ".join(", ".join(repr(v) for v in row) for row in cfg.generator_rows))],
    )
    truth_items = [("x0", repr(cfg.x0)), ("mode_source", cfg.mode_source)]
    if cfg.switches:
        truth_items.append(
            ("switches", ", ".join(f"{repr(t)}:{m + 1}" for t, m in cfg.switches))
        )
    truth_items.append(("init_mode", str(cfg.init_mode + 1)))
    sec("truth", truth_items)
    sec("prior", [("mean", repr(cfg.prior_mean)), ("std", repr(cfg.prior_std))])
    sec(
        "run",
        [
            ("dt", repr(cfg.dt)),
            ("horizon", repr(cfg.horizon)),
            ("n_particles", str(cfg.n_particles)),
            ("seeds", ", ".join(str(s) for s in cfg.seeds)),
            ("mu_update", cfg.mu_update),
            ("clamp_floor", repr(cfg.clamp_floor)),
            ("c_cap", repr(cfg.c_cap)),
            ("burn_in", repr(cfg.burn_in)),
        ],
    )
    if cfg.oracle is not None:
        items = [
            ("x_min", repr(cfg.oracle.x_min)),
            ("x_max", repr(cfg.oracle.x_max)),
            ("n_cells", str(cfg.oracle.n_cells)),
        ]
        if cfg.oracle.snapshot_time is not None:
            items.append(("snapshot_time", repr(cfg.oracle.snapshot_time)))
        sec("oracle", items)
    if cfg.output_dir is not None:
        sec("output", [("dir", cfg.output_dir)])
    return "\n".join(lines)


def config_schema_text() -> str:
    """Reference text for the config grammar: sections, keys, defaults."""
    fn_lines = "\n".join(
        f"#     {kind}:{','.join(['p'] * n)}  ->  {formula}"
        for kind, (n, formula) in FUNCTION_KINDS.items()
    )
    return f"""\
# Scenario config reference (INI grammar, '#' comments).
# Unknown sections or keys are rejected. Mode indices are 1-based in files.
#
# Function grammar for drift/observation values:
{fn_lines}
#     aliases: zero = const:0, identity = linear:1

[model]
obs_noise_intensity = <float > 0>      # sigma_W, observation noise scale (required)
initial_mode_dist = <floats, sum 1>    # or the word 'uniform' (required)

[mode.1]                               # one section per mode: mode.1 .. mode.M
drift = <function>                     # a^m(x) (required)
diffusion = <float >= 0>               # sigma^m (required)
observation = <function>               # h^m(x) (required)

[generator]
rows = <M rows, ';'-separated>         # transition-rate matrix; off-diagonals >= 0,
                                       # rows sum to 0 (diagonal may be nan to auto-fill)

[truth]
x0 = <float>                           # initial continuous state (required)
mode_source = script | markov          # scripted switches, or simulate the mode chain
switches = <time:mode, ...>            # required for script; first entry at time 0
init_mode = <int>                      # initial mode for markov truth (default 1)

[prior]
mean = <float>                         # filter initial density N(mean, std^2) (required)
std = <float > 0>                      # (required)

[run]
dt = <float > 0>                       # step size (required)
horizon = <float >= 0>                 # total time (required)
n_particles = <int >= 2>               # particles per mode (required)
seeds = <ints, comma-separated>        # master seeds; sweep needs >= 2 (required)
mu_update = euler | bayes              # mode probability update path (default euler)
clamp_floor = <float in (0,1)>         # mu floor before renormalizing (default 1e-9)
c_cap = <float > 0>                    # cap on interaction coefficients (default 1e3)
burn_in = <float >= 0>                 # per-segment metric burn-in, time units (default 1.0)

[oracle]                               # optional: enables the grid solver
x_min = <float>                        # grid bounds; cover the truth path +- 6 std
x_max = <float>
n_cells = <int >= 16>                  # grid nodes
snapshot_time = <float>                # density snapshot time (default: horizon)

[output]                               # optional
dir = <path>                           # default: $IMMFPF_OUT or ./out
"""
