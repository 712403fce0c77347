"""Heterogeneous best-response learning in two-agent games.

Simulation of two learner families (one-shot matrix games and discounted
stochastic games) whose agents differ in what they observe, how they
respond, and how fast they learn; exact equilibrium solvers to compare
against; and the diagnostic quantities whose decay certifies convergence.
"""

from ._version import __version__
from .diagnostics import (
    DiagnosticSample,
    LyapunovBreakdown,
    WarmStartSaddle,
    best_regularized_payoff,
    gap_ceiling,
    lyapunov_value,
    regularized_payoff,
    response_gap,
    soft_value,
    tracking_error,
)
from .errors import DomainError, GameStructureError, NumericalError
from .games import (
    GameValidationReport,
    MatrixGame,
    ReachabilityGraph,
    StochasticGame,
    build_reachability_graph,
    game_from_json,
    game_to_json,
    generate_random_zssg,
    is_strongly_connected,
    load_game,
    matrix_game_from_zero_sum,
    save_game,
    validate_matrix_game,
    validate_stochastic_game,
)
from .harness import (
    AgentSpec,
    Aggregate,
    ExperimentResult,
    ScenarioConfig,
    TrialTrace,
    access_label,
    aggregate_traces,
    export,
    load_scenario,
    preset_game,
    read_csv_rows,
    read_run,
    run_experiment,
    run_trial,
    scenario_from_json,
    scenario_preset,
    scenario_to_json,
    step_ratio_info,
    validate_config,
    write_aggregate_csv,
    write_trace_csv,
)
from .matrix_learners import (
    MatrixAgentConfig,
    MatrixAgentState,
    StageObservation,
    empirical_average_step,
    initial_state,
    select_action,
    stage_update,
)
from .oracle import (
    EquilibriumSolution,
    fixed_opponent_value_bound,
    global_q_from_values,
    near_equilibrium_bounds,
    policy_evaluation,
    restrict_to_fixed_opponent,
    shapley_iterate,
    value_gap_bound,
)
from .responses import (
    ValueBoundsReport,
    ValueCertificate,
    best_response_set,
    check_value_bounds,
    entropy,
    minimax_value,
    regularized_value,
    response_distribution,
    smoothed_best_response,
)
from .rng import SplitMix64, derive_trial_seed, splitmix64_mix
from .schedules import (
    StepSchedule,
    limit_ratio,
    make_schedule,
    normalized_rate_ratio,
    power_schedule,
)
from .sg_learners import SGAgentConfig, SGAgentState, process_stage, record_stage

__all__ = [
    "__version__",
    "access_label",
    "AgentSpec",
    "Aggregate",
    "aggregate_traces",
    "best_regularized_payoff",
    "best_response_set",
    "build_reachability_graph",
    "check_value_bounds",
    "derive_trial_seed",
    "DiagnosticSample",
    "DomainError",
    "empirical_average_step",
    "entropy",
    "EquilibriumSolution",
    "ExperimentResult",
    "export",
    "fixed_opponent_value_bound",
    "game_from_json",
    "game_to_json",
    "GameStructureError",
    "GameValidationReport",
    "gap_ceiling",
    "generate_random_zssg",
    "global_q_from_values",
    "initial_state",
    "is_strongly_connected",
    "limit_ratio",
    "load_game",
    "load_scenario",
    "lyapunov_value",
    "LyapunovBreakdown",
    "make_schedule",
    "matrix_game_from_zero_sum",
    "MatrixAgentConfig",
    "MatrixAgentState",
    "MatrixGame",
    "minimax_value",
    "near_equilibrium_bounds",
    "normalized_rate_ratio",
    "NumericalError",
    "policy_evaluation",
    "power_schedule",
    "preset_game",
    "process_stage",
    "ReachabilityGraph",
    "read_csv_rows",
    "read_run",
    "record_stage",
    "regularized_payoff",
    "regularized_value",
    "response_distribution",
    "response_gap",
    "restrict_to_fixed_opponent",
    "run_experiment",
    "run_trial",
    "save_game",
    "scenario_from_json",
    "scenario_preset",
    "scenario_to_json",
    "ScenarioConfig",
    "select_action",
    "SGAgentConfig",
    "SGAgentState",
    "shapley_iterate",
    "smoothed_best_response",
    "soft_value",
    "SplitMix64",
    "splitmix64_mix",
    "stage_update",
    "StageObservation",
    "step_ratio_info",
    "StepSchedule",
    "StochasticGame",
    "tracking_error",
    "TrialTrace",
    "validate_config",
    "validate_matrix_game",
    "validate_stochastic_game",
    "value_gap_bound",
    "ValueBoundsReport",
    "ValueCertificate",
    "WarmStartSaddle",
    "write_aggregate_csv",
    "write_trace_csv",
]
