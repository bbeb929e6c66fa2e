"""
Semilinear coupling F = (F1, F2) with analytic first and second partials.
"""
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from ..errors import DomainError

FAMILIES = ("linear", "bounded-sine")


@dataclass(frozen=True)
class CouplingF:
    """
    Closed-form coupling families

    linear:        F_i = c_i1 y1 + c_i2 y2
    bounded-sine:  F_i = a_i1 sin(y1) + a_i2 sin(y2)

    coefficients[i][j] holds c_ij (or a_ij) for F_{i+1} and y_{j+1}.
    """

    family: str
    coefficients: Tuple[Tuple[float, float], Tuple[float, float]]

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise DomainError(f"unknown coupling family '{self.family}', expected one of {FAMILIES}")
        arr = np.asarray(self.coefficients, dtype=float)
        if arr.shape != (2, 2) or not np.all(np.isfinite(arr)):
            raise DomainError("coupling coefficients must be a finite 2x2 matrix")
        object.__setattr__(self, "coefficients", tuple(tuple(float(v) for v in row) for row in arr))

    @classmethod
    def linear(cls, c11: float = 0.0, c12: float = 0.0, c21: float = 0.0, c22: float = 0.0) -> "CouplingF":
        return cls("linear", ((c11, c12), (c21, c22)))

    @classmethod
    def bounded_sine(cls, a11: float = 0.5, a12: float = 0.3, a21: float = 0.5, a22: float = 0.3) -> "CouplingF":
        return cls("bounded-sine", ((a11, a12), (a21, a22)))

    @property
    def matrix(self) -> np.ndarray:
        return np.asarray(self.coefficients)

    @property
    def is_linear(self) -> bool:
        return self.family == "linear"

    @property
    def bound(self) -> float:
        """M bounding every first and second partial"""
        return float(np.max(np.abs(self.matrix)))

    def __call__(self, y1, y2) -> Tuple[np.ndarray, np.ndarray]:
        c = self.matrix
        y1 = np.asarray(y1, dtype=float)
        y2 = np.asarray(y2, dtype=float)
        if self.is_linear:
            u1, u2 = y1, y2
        else:
            u1, u2 = np.sin(y1), np.sin(y2)
        return c[0, 0] * u1 + c[0, 1] * u2, c[1, 0] * u1 + c[1, 1] * u2

    def jacobian(self, y1, y2) -> np.ndarray:
        """D[i, j] = D_j F_i, broadcast over the shape of y"""
        c = self.matrix
        y1 = np.asarray(y1, dtype=float)
        y2 = np.asarray(y2, dtype=float)
        shape = np.broadcast(y1, y2).shape
        if self.is_linear:
            d1 = np.ones(shape)
            d2 = np.ones(shape)
        else:
            d1 = np.broadcast_to(np.cos(y1), shape)
            d2 = np.broadcast_to(np.cos(y2), shape)
        out = np.empty((2, 2) + shape)
        for i in range(2):
            out[i, 0] = c[i, 0] * d1
            out[i, 1] = c[i, 1] * d2
        return out

    def hessian(self, y1, y2) -> np.ndarray:
        """H[i, j, k] = D_j D_k F_i; the sine family has no mixed terms"""
        c = self.matrix
        y1 = np.asarray(y1, dtype=float)
        y2 = np.asarray(y2, dtype=float)
        shape = np.broadcast(y1, y2).shape
        out = np.zeros((2, 2, 2) + shape)
        if self.is_linear:
            return out
        s1 = np.broadcast_to(np.sin(y1), shape)
        s2 = np.broadcast_to(np.sin(y2), shape)
        for i in range(2):
            out[i, 0, 0] = -c[i, 0] * s1
            out[i, 1, 1] = -c[i, 1] * s2
        return out

    def linearization(self) -> np.ndarray:
        """c_ij = D_j F_i(0, 0)"""
        return self.jacobian(0.0, 0.0)

    def remainder(self, y1, y2) -> Tuple[np.ndarray, np.ndarray]:
        """F_i(y) - c_i1 y1 - c_i2 y2"""
        c = self.linearization()
        f1, f2 = self(y1, y2)
        return f1 - c[0, 0] * y1 - c[0, 1] * y2, f2 - c[1, 0] * y1 - c[1, 1] * y2


def check_coupling(F: CouplingF, box: float = 5.0, n: int = 41) -> Tuple[float, float]:
    """
    Sample |F(0, 0)| and the largest first/second partial on [-box, box]^2

    Returns:
        (|F(0,0)|, max partial) for comparison against F.bound
    """
    ys = np.linspace(-box, box, n)
    y1, y2 = np.meshgrid(ys, ys, indexing="ij")
    f0 = max(abs(float(v)) for v in F(0.0, 0.0))
    largest = max(np.max(np.abs(F.jacobian(y1, y2))), np.max(np.abs(F.hessian(y1, y2))))
    return f0, float(largest)
