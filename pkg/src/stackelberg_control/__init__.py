"""
Stackelberg-Nash hierarchic control of a coupled, weakly degenerate semilinear
parabolic system on a moving interval.
"""
from .config import ProblemConfig, emit_config, parse_config
from .errors import ConfigError, DivergenceError, DomainError, SolverError, StackelbergError
from .main import run
from .problem import Problem, build_problem

__version__ = "0.1.0"

__all__ = [
    'ProblemConfig', 'emit_config', 'parse_config',
    'ConfigError', 'DivergenceError', 'DomainError', 'SolverError', 'StackelbergError',
    'run', 'Problem', 'build_problem',
]
