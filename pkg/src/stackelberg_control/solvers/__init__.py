from .context import FollowerConfig, ProblemContext, SolverOptions
from .leader import (
    ControlProblem,
    ControlResult,
    optimality_residual,
    penalty_sweep,
    solve_linearized_control,
    solve_semilinear_control,
    weighted_norm_report,
)
from .nash import (
    NashResult,
    characterization_residual,
    directional_derivative_J,
    estimate_convexity,
    evaluate_J,
    follower_controls_from_adjoint,
    solve_nash,
    solve_nash_monolithic,
)
from .observability import observability_ratio
from .optimality import OptimalitySystem

__all__ = [
    'FollowerConfig', 'ProblemContext', 'SolverOptions',
    'ControlProblem', 'ControlResult', 'optimality_residual', 'penalty_sweep',
    'solve_linearized_control', 'solve_semilinear_control', 'weighted_norm_report',
    'NashResult', 'characterization_residual', 'directional_derivative_J', 'estimate_convexity',
    'evaluate_J', 'follower_controls_from_adjoint', 'solve_nash', 'solve_nash_monolithic',
    'observability_ratio', 'OptimalitySystem',
]
