"""Interacting multiple model feedback particle filter for scalar stochastic
hybrid systems, with exact-filtering oracles for validation."""

from .config import FnSpec, ModeSpec, OracleSettings, ScenarioConfig, parse_config
from .errors import (
    BoundaryResidualLarge,
    ImmFpfError,
    MassEscape,
    NegativeOffDiagonal,
    NonFiniteState,
    ParseError,
    RowSumNonzero,
    SegmentShorterThanBurnIn,
    StabilityViolation,
    StepTooLarge,
    ValidationError,
)
from .fpf import (
    FilterConfig,
    ModeStatistics,
    ParticleBank,
    bank_estimate,
    constant_gain,
    fpf_step,
    global_h_hat,
    initial_bank,
    interaction_control,
    mode_h_hat,
    mode_statistics,
)
from .model import (
    GeneratorMatrix,
    HybridModel,
    ModeDynamics,
    ObservationPath,
    TruthTrajectory,
    modes_from_switches,
    simulate_mode_chain,
    simulate_truth,
    synthesize_observations,
    validate_generator,
)
from .modeprob import ModeProbabilities, mu_step_bayes, mu_step_euler, normalize_clamp
from .oracles import (
    Grid1D,
    GridDensity,
    gaussian_grid_density,
    grid_control_exact,
    grid_gain_exact,
    grid_moments,
    kalman_bucy,
    kushner_grid_step,
)
from .scenario import (
    OracleResult,
    RunResult,
    gain_check,
    mode_accuracy,
    run_filter,
    run_oracle,
    run_scenario,
    seed_sweep,
)

__version__ = "0.1.0"

__all__ = [
    "BoundaryResidualLarge",
    "FilterConfig",
    "FnSpec",
    "GeneratorMatrix",
    "Grid1D",
    "GridDensity",
    "HybridModel",
    "ImmFpfError",
    "MassEscape",
    "ModeDynamics",
    "ModeProbabilities",
    "ModeSpec",
    "ModeStatistics",
    "NegativeOffDiagonal",
    "NonFiniteState",
    "ObservationPath",
    "OracleResult",
    "OracleSettings",
    "ParseError",
    "ParticleBank",
    "RowSumNonzero",
    "RunResult",
    "ScenarioConfig",
    "SegmentShorterThanBurnIn",
    "StabilityViolation",
    "StepTooLarge",
    "TruthTrajectory",
    "ValidationError",
    "bank_estimate",
    "constant_gain",
    "fpf_step",
    "gain_check",
    "gaussian_grid_density",
    "global_h_hat",
    "grid_control_exact",
    "grid_gain_exact",
    "grid_moments",
    "initial_bank",
    "interaction_control",
    "kalman_bucy",
    "kushner_grid_step",
    "mode_accuracy",
    "mode_h_hat",
    "mode_statistics",
    "modes_from_switches",
    "mu_step_bayes",
    "mu_step_euler",
    "normalize_clamp",
    "parse_config",
    "run_filter",
    "run_oracle",
    "run_scenario",
    "seed_sweep",
    "simulate_mode_chain",
    "simulate_truth",
    "synthesize_observations",
    "validate_generator",
]
