from typing import List, Optional, Sequence


class StackelbergError(Exception):
    """Base error for the package"""


class DomainError(StackelbergError, ValueError):
    """Argument outside the domain of a coefficient, weight or map"""


class ConfigError(StackelbergError):
    """Invalid problem configuration; collects every validation error"""

    def __init__(self, errors: Sequence[str]):
        self.errors: List[str] = list(errors)
        lines = "\n  ".join(self.errors)
        super().__init__(f"{len(self.errors)} configuration error(s):\n  {lines}")


class SolverError(StackelbergError):
    """Numerical solver failure"""

    def __init__(self, message: str, residual: Optional[float] = None, history: Optional[Sequence[float]] = None):
        self.residual = residual
        self.history = list(history) if history is not None else []
        super().__init__(message)


class DivergenceError(SolverError):
    """Outer semilinear iteration is growing instead of contracting"""
