"""Stochastic derivative-free linesearch optimization toolkit.

Library surface: parameter/state types (core), the adaptive-sampling noisy
oracle (oracle), the optimizer itself (optimizer), benchmark problems
(problems), theory diagnostics (diagnostics), and a CLI harness (cli).
"""

from .core import (
    AlgoParams,
    DirectionOutcome,
    InvalidParam,
    IterationTrace,
    NonPositiveStep,
    ParamCheck,
    StepState,
    TruthInfo,
    ValidationReport,
    beta_lower_bound,
    nu_lower_bound,
    refresh_step_state,
    validate_params,
)
from .diagnostics import (
    MissingLipschitz,
    PhiDecreaseReport,
    SummabilityReport,
    SweepSummary,
    TheoryConstants,
    decrease_rate,
    delta_summability,
    grad_norm_curve,
    gradient_bound_audit,
    improvement_function,
    k_epsilon,
    phi_decrease_audit,
    sweep_summary,
    theory_constants,
)
from .optimizer import (
    ExpansionSafeguard,
    RunResult,
    StopReason,
    expansion_linesearch,
    explore_direction,
    recount_evals,
    run,
    sufficient_decrease,
    update_stepsizes,
)
from .oracle import (
    EstimateReport,
    NonPositiveDelta,
    OracleFailure,
    OracleSession,
    SampleSize,
    StochasticFunction,
    TruthUnavailable,
    VariancePilot,
    empirical_accuracy_rate,
    estimate,
    is_accurate,
    pilot_variance,
    required_samples,
)
from .problems import (
    NoiseModel,
    NoisyProblem,
    UnknownProblem,
    builtin_problems,
    grad_check,
    make_problem,
)

__version__ = "0.1.0"

__all__ = [
    "AlgoParams",
    "DirectionOutcome",
    "EstimateReport",
    "ExpansionSafeguard",
    "InvalidParam",
    "IterationTrace",
    "MissingLipschitz",
    "NoiseModel",
    "NoisyProblem",
    "NonPositiveDelta",
    "NonPositiveStep",
    "OracleFailure",
    "OracleSession",
    "ParamCheck",
    "PhiDecreaseReport",
    "RunResult",
    "SampleSize",
    "StepState",
    "StochasticFunction",
    "StopReason",
    "SummabilityReport",
    "SweepSummary",
    "TheoryConstants",
    "TruthInfo",
    "TruthUnavailable",
    "UnknownProblem",
    "ValidationReport",
    "VariancePilot",
    "beta_lower_bound",
    "builtin_problems",
    "decrease_rate",
    "delta_summability",
    "empirical_accuracy_rate",
    "estimate",
    "expansion_linesearch",
    "explore_direction",
    "grad_check",
    "grad_norm_curve",
    "gradient_bound_audit",
    "improvement_function",
    "is_accurate",
    "k_epsilon",
    "make_problem",
    "nu_lower_bound",
    "phi_decrease_audit",
    "pilot_variance",
    "recount_evals",
    "refresh_step_state",
    "required_samples",
    "run",
    "sufficient_decrease",
    "sweep_summary",
    "theory_constants",
    "update_stepsizes",
    "validate_params",
]
