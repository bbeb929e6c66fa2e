from .coupling import CouplingF, check_coupling
from .grid import AdjointQuad, ControlSet, Grid, RegionMasks, StatePair
from .operators import (
    LinearizedOperator,
    apply_adjoint,
    apply_forward,
    assemble_adjoint_operator,
    assemble_operator,
    assemble_spacetime_adjoint,
    assemble_spacetime_forward,
)
from .solver import solve_adjoint, solve_adjoint_pair, solve_forward, solve_linearized, trajectory_rows

__all__ = [
    'CouplingF', 'check_coupling',
    'AdjointQuad', 'ControlSet', 'Grid', 'RegionMasks', 'StatePair',
    'LinearizedOperator', 'apply_adjoint', 'apply_forward', 'assemble_adjoint_operator',
    'assemble_operator', 'assemble_spacetime_adjoint', 'assemble_spacetime_forward',
    'solve_adjoint', 'solve_adjoint_pair', 'solve_forward', 'solve_linearized', 'trajectory_rows',
]
