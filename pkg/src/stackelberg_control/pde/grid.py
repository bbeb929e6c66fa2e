"""
Uniform space-time grid, field containers and region masks.

Fields are arrays of shape (n_t + 1, n_x) holding interior nodes only; the
Dirichlet zeros at x = 0 and x = 1 are implicit and added back on export.
Row k of a source or control array drives step k (t_k -> t_{k+1}); row n_t
is never read and stays zero.
"""
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from ..errors import DomainError

Interval = Tuple[float, float]

# Slack used when rounding interval ends outward to grid nodes
_ROUND_TOL = 1e-9


@dataclass(frozen=True)
class Grid:
    """n_x interior nodes on (0, 1) and n_t implicit Euler steps on [0, T]"""

    n_x: int
    n_t: int
    T: float = 1.0

    def __post_init__(self):
        if self.n_x < 2:
            raise DomainError(f"n_x must be at least 2, got {self.n_x}")
        if self.n_t < 1:
            raise DomainError(f"n_t must be at least 1, got {self.n_t}")
        if not self.T > 0.0:
            raise DomainError(f"T must be positive, got {self.T}")

    @property
    def dx(self) -> float:
        return 1.0 / (self.n_x + 1)

    @property
    def dt(self) -> float:
        return self.T / self.n_t

    @property
    def x(self) -> np.ndarray:
        """Interior nodes x_1..x_{n_x}"""
        return np.arange(1, self.n_x + 1) * self.dx

    @property
    def x_full(self) -> np.ndarray:
        return np.arange(self.n_x + 2) * self.dx

    @property
    def t(self) -> np.ndarray:
        return np.arange(self.n_t + 1) * self.dt

    @property
    def half_points(self) -> np.ndarray:
        """x_{j+1/2} for j = 0..n_x"""
        return (np.arange(self.n_x + 1) + 0.5) * self.dx

    def zeros(self) -> np.ndarray:
        return np.zeros((self.n_t + 1, self.n_x))

    def node_range(self, interval: Interval) -> Tuple[int, int]:
        """Full-grid node indices (j_lo, j_hi) of an interval rounded outward"""
        lo, hi = check_interval(interval)
        j_lo = int(np.floor(lo / self.dx + _ROUND_TOL))
        j_hi = int(np.ceil(hi / self.dx - _ROUND_TOL))
        return max(j_lo, 0), min(j_hi, self.n_x + 1)

    def mask(self, interval: Interval) -> np.ndarray:
        """Indicator of the interval on interior nodes"""
        j_lo, j_hi = self.node_range(interval)
        j = np.arange(1, self.n_x + 1)
        return (j >= j_lo) & (j <= j_hi)

    def trapezoid_weights(self, interval: Interval) -> np.ndarray:
        """Trapezoid weights (without dx) over the rounded interval, end nodes at 1/2"""
        j_lo, j_hi = self.node_range(interval)
        j = np.arange(1, self.n_x + 1)
        weights = ((j >= j_lo) & (j <= j_hi)).astype(float)
        weights[(j == j_lo) | (j == j_hi)] = 0.5
        return weights

    def window_weights(self, t_lo: float, t_hi: float) -> np.ndarray:
        """
        Weights w_k with sum_k w_k f_k = exact integral over [t_lo, t_hi] of the
        piecewise-linear interpolant of f through the time nodes
        """
        if not 0.0 <= t_lo < t_hi <= self.T:
            raise DomainError(f"time window ({t_lo}, {t_hi}) must lie inside [0, {self.T}]")
        ts = self.t
        dt = self.dt
        weights = np.zeros(self.n_t + 1)
        for n in range(self.n_t):
            c = max(ts[n], t_lo)
            d = min(ts[n + 1], t_hi)
            if d <= c:
                continue
            weights[n] += ((ts[n + 1] - c) ** 2 - (ts[n + 1] - d) ** 2) / (2.0 * dt)
            weights[n + 1] += ((d - ts[n]) ** 2 - (c - ts[n]) ** 2) / (2.0 * dt)
        return weights


def check_interval(interval: Interval) -> Interval:
    lo, hi = float(interval[0]), float(interval[1])
    if not 0.0 <= lo < hi <= 1.0:
        raise DomainError(f"interval ({lo}, {hi}) must satisfy 0 <= lo < hi <= 1")
    return lo, hi


def intervals_overlap(a: Interval, b: Interval) -> bool:
    return max(a[0], b[0]) < min(a[1], b[1])


def _check_field(name: str, values: np.ndarray, shape: Tuple[int, int]) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.shape != shape:
        raise DomainError(f"{name} has shape {arr.shape}, expected {shape}")
    return arr


@dataclass
class StatePair:
    """Trajectory (y1, y2), each of shape (n_t + 1, n_x)"""

    y1: np.ndarray
    y2: np.ndarray

    def __post_init__(self):
        self.y1 = np.asarray(self.y1, dtype=float)
        self.y2 = _check_field("y2", self.y2, self.y1.shape)

    @classmethod
    def zeros(cls, grid: Grid) -> "StatePair":
        return cls(grid.zeros(), grid.zeros())

    @classmethod
    def from_initial(cls, grid: Grid, y0: Tuple[np.ndarray, np.ndarray]) -> "StatePair":
        pair = cls.zeros(grid)
        pair.y1[0] = _check_field("y0[0]", np.atleast_2d(y0[0]), (1, grid.n_x))[0]
        pair.y2[0] = _check_field("y0[1]", np.atleast_2d(y0[1]), (1, grid.n_x))[0]
        return pair

    def components(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.y1, self.y2

    def at(self, k: int) -> np.ndarray:
        """Stacked [y1; y2] at time row k"""
        return np.concatenate((self.y1[k], self.y2[k]))

    def set(self, k: int, stacked: np.ndarray) -> None:
        n_x = self.y1.shape[1]
        self.y1[k] = stacked[:n_x]
        self.y2[k] = stacked[n_x:]

    def copy(self) -> "StatePair":
        return StatePair(self.y1.copy(), self.y2.copy())

    def __add__(self, other: "StatePair") -> "StatePair":
        return StatePair(self.y1 + other.y1, self.y2 + other.y2)

    def __sub__(self, other: "StatePair") -> "StatePair":
        return StatePair(self.y1 - other.y1, self.y2 - other.y2)

    def scaled(self, factor: float) -> "StatePair":
        return StatePair(factor * self.y1, factor * self.y2)

    def slice_norm(self, k: int, dx: float) -> float:
        """Discrete L2 norm of (y1, y2) at time row k"""
        return float(np.sqrt(dx * (np.sum(self.y1[k] ** 2) + np.sum(self.y2[k] ** 2))))

    def max_abs(self) -> float:
        return float(max(np.max(np.abs(self.y1)), np.max(np.abs(self.y2))))


@dataclass
class AdjointQuad:
    """Adjoint states (p^1_1, p^1_2) of follower 1 and (p^2_1, p^2_2) of follower 2"""

    p1_1: np.ndarray
    p1_2: np.ndarray
    p2_1: np.ndarray
    p2_2: np.ndarray

    @classmethod
    def zeros(cls, grid: Grid) -> "AdjointQuad":
        return cls(grid.zeros(), grid.zeros(), grid.zeros(), grid.zeros())

    @classmethod
    def from_pairs(cls, first: StatePair, second: StatePair) -> "AdjointQuad":
        return cls(first.y1, first.y2, second.y1, second.y2)

    def follower(self, i: int) -> StatePair:
        if i == 1:
            return StatePair(self.p1_1, self.p1_2)
        if i == 2:
            return StatePair(self.p2_1, self.p2_2)
        raise DomainError(f"follower index must be 1 or 2, got {i}")

    def fields(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        return self.p1_1, self.p1_2, self.p2_1, self.p2_2


@dataclass(frozen=True)
class RegionMasks:
    """Interior-node indicators of O, O1, O2 and the shared observation region O_d"""

    O: np.ndarray
    O1: np.ndarray
    O2: np.ndarray
    Od: np.ndarray
    od_weights: np.ndarray

    @classmethod
    def from_intervals(cls, grid: Grid, O: Interval, O1: Interval, O2: Interval, Od: Interval) -> "RegionMasks":
        return cls(
            O=grid.mask(O),
            O1=grid.mask(O1),
            O2=grid.mask(O2),
            Od=grid.mask(Od),
            od_weights=grid.trapezoid_weights(Od),
        )

    def follower(self, i: int) -> np.ndarray:
        if i == 1:
            return self.O1
        if i == 2:
            return self.O2
        raise DomainError(f"follower index must be 1 or 2, got {i}")


@dataclass
class ControlSet:
    """Leader control h on O and follower controls v1, v2 on O1, O2; all act on the first equation"""

    h: np.ndarray
    v1: np.ndarray
    v2: np.ndarray
    masks: RegionMasks = field(repr=False)

    def __post_init__(self):
        shape = np.asarray(self.h).shape
        self.h = np.where(self.masks.O, _check_field("h", self.h, shape), 0.0)
        self.v1 = np.where(self.masks.O1, _check_field("v1", self.v1, shape), 0.0)
        self.v2 = np.where(self.masks.O2, _check_field("v2", self.v2, shape), 0.0)

    @classmethod
    def zeros(cls, grid: Grid, masks: RegionMasks) -> "ControlSet":
        return cls(grid.zeros(), grid.zeros(), grid.zeros(), masks)

    def with_followers(self, v1: np.ndarray, v2: np.ndarray) -> "ControlSet":
        return ControlSet(self.h, v1, v2, self.masks)

    def follower(self, i: int) -> np.ndarray:
        if i == 1:
            return self.v1
        if i == 2:
            return self.v2
        raise DomainError(f"follower index must be 1 or 2, got {i}")

    def source(self, k: int) -> np.ndarray:
        """Right-hand side of the first equation for step k"""
        return self.h[k] + self.v1[k] + self.v2[k]


def field_l2(values: np.ndarray, grid: Grid, weights: Optional[np.ndarray] = None) -> float:
    """Space-time rectangle-rule L2 norm over the step rows 0..n_t-1"""
    vals = np.asarray(values, dtype=float)[: grid.n_t]
    if weights is not None:
        vals = vals * np.asarray(weights)[: grid.n_t, None]
    return float(np.sqrt(grid.dt * grid.dx * np.sum(vals**2)))
