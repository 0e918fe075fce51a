"""Active inverse Stackelberg games with a bounded-rational follower.

A leader queries a quantal-response follower, estimates the follower's cost
parameters by maximum likelihood, and designs queries by Fisher-information
criteria — either purely (active learning) or traded off against its own
expected cost (exploration-exploitation).
"""
from ._kernels import BACKEND as kernel_backend
from .boxopt import grid_points, maximize_on_box, minimize_on_box
from .estimation import (
    MleResult,
    MleSettings,
    SufficientStats,
    log_likelihood,
    mle,
    mle_from_stats,
    stats_from_dataset,
)
from .fisher import (
    RunningOIM,
    accumulated_oim,
    criterion_map,
    criterion_value,
    design_objective_map,
    maximize_criterion,
    maximize_design,
    oim_closed_form,
    oim_monte_carlo,
    running_oim_update,
)
from .game import (
    Dataset,
    FollowerDistribution,
    GameConfig,
    InteractionRecord,
    follower_cost,
    follower_response,
    leader_cost,
    log_density,
    project_theta,
    q_matrix,
    sample_follower,
    theta_feasible,
)
from .harness import (
    BiasSummary,
    ErrorSeries,
    ExperimentConfig,
    NormalityReport,
    export_trajectories,
    import_trajectories,
    load_config,
    normality_diagnostics,
    relative_error_series,
    run_experiment,
    save_config,
    summarize_bias,
)
from .loop import (
    EquilibriumResult,
    RhoSchedule,
    RunTrajectory,
    compute_C,
    cost_matrix,
    expected_cost_map,
    expected_leader_cost,
    query_alg2,
    rho,
    run_algorithm1,
    run_algorithm2,
    run_baseline_no_exploration,
    run_baseline_uniform,
    stackelberg_equilibrium,
)

__version__ = "0.1.0"

__all__ = [
    "BiasSummary",
    "Dataset",
    "EquilibriumResult",
    "ErrorSeries",
    "ExperimentConfig",
    "FollowerDistribution",
    "GameConfig",
    "InteractionRecord",
    "MleResult",
    "MleSettings",
    "NormalityReport",
    "RhoSchedule",
    "RunTrajectory",
    "RunningOIM",
    "SufficientStats",
    "accumulated_oim",
    "compute_C",
    "cost_matrix",
    "criterion_map",
    "criterion_value",
    "design_objective_map",
    "expected_cost_map",
    "expected_leader_cost",
    "export_trajectories",
    "follower_cost",
    "follower_response",
    "grid_points",
    "import_trajectories",
    "kernel_backend",
    "leader_cost",
    "load_config",
    "log_density",
    "log_likelihood",
    "maximize_criterion",
    "maximize_design",
    "maximize_on_box",
    "minimize_on_box",
    "mle",
    "mle_from_stats",
    "normality_diagnostics",
    "oim_closed_form",
    "oim_monte_carlo",
    "project_theta",
    "q_matrix",
    "query_alg2",
    "relative_error_series",
    "rho",
    "run_algorithm1",
    "run_algorithm2",
    "run_baseline_no_exploration",
    "run_baseline_uniform",
    "run_experiment",
    "running_oim_update",
    "sample_follower",
    "save_config",
    "stackelberg_equilibrium",
    "stats_from_dataset",
    "summarize_bias",
    "theta_feasible",
]
