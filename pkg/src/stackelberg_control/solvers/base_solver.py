from typing import List, Optional, Type

from ..errors import SolverError
from ..utils.logger import get_logger

logger = get_logger(__name__)


class IterativeSolver:
    """Iteration bookkeeping shared by the fixed-point, conjugate gradient and outer Picard loops"""

    def __init__(self, name: str, tol: float, max_iter: int):
        self.name = name
        self.tol = tol
        self.max_iter = max_iter
        self.history: List[float] = []

    def reset(self) -> None:
        self.history = []

    @property
    def iterations(self) -> int:
        return len(self.history)

    def record(self, value: float) -> bool:
        """
        Append a convergence measure

        Returns:
            bool: True once the measure is within tolerance
        """
        self.history.append(float(value))
        logger.debug("%s iteration %d: %.3e", self.name, len(self.history), value)
        return value <= self.tol

    def growing(self, streak: int = 3) -> bool:
        """True when the last `streak` recorded values each grew"""
        if len(self.history) <= streak:
            return False
        tail = self.history[-(streak + 1):]
        return all(b > a for a, b in zip(tail, tail[1:]))

    def fail(
        self,
        message: str,
        residual: Optional[float] = None,
        error: Type[SolverError] = SolverError,
    ) -> None:
        raise error(f"{self.name}: {message}", residual=residual, history=list(self.history))
