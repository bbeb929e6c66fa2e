"""
Problem data shared by the follower, leader and observability layers.
"""
from dataclasses import dataclass, replace
from typing import Optional, Tuple, Union

import numpy as np

from ..errors import DomainError
from ..geometry import TransformedCoefficients
from ..pde.coupling import CouplingF
from ..pde.grid import Grid, Interval, RegionMasks, StatePair, check_interval, intervals_overlap
from ..weights import RhoFamily, clamp_to_window, normalized_square

Pair = Tuple[float, float]
# a constant or an array broadcastable to the (n_t + 1, n_x) grid
Target = Union[float, np.ndarray]


@dataclass(frozen=True)
class FollowerConfig:
    """
    Follower costs J_i = (alpha_i/2) |y - y^i_d|^2 on O_d + (mu_i/2) rho_*^2 |v^i|^2 on O_i

    alpha_i = 0 is accepted and switches the tracking term off. Targets y^i_d are
    per-component constants or fields on the (t, x) grid.
    """

    alpha: Pair
    mu: Pair
    O1: Interval
    O2: Interval
    Od: Interval
    targets: Tuple[Tuple[Target, Target], Tuple[Target, Target]] = ((0.0, 0.0), (0.0, 0.0))

    def __post_init__(self):
        if len(self.alpha) != 2 or len(self.mu) != 2:
            raise DomainError("exactly two followers are supported")
        if any(a < 0.0 for a in self.alpha):
            raise DomainError(f"alpha_i must be non-negative, got {self.alpha}")
        if any(not m > 0.0 for m in self.mu):
            raise DomainError(f"mu_i must be positive, got {self.mu}")
        for region in (self.O1, self.O2, self.Od):
            check_interval(region)
        if any(not np.all(np.isfinite(np.asarray(v, dtype=float))) for pair in self.targets for v in pair):
            raise DomainError("targets must be finite")

    def with_mu(self, i: int, value: float) -> "FollowerConfig":
        mu = list(self.mu)
        mu[i - 1] = value
        return replace(self, mu=tuple(mu))

    def with_alpha(self, alpha: Pair) -> "FollowerConfig":
        return replace(self, alpha=tuple(alpha))


@dataclass(frozen=True)
class SolverOptions:
    tol_nash: float = 1e-9
    max_outer: int = 200
    omega: float = 0.7
    tol_outer: float = 1e-8
    max_outer_control: int = 50
    eps_pen: float = 1e-8
    max_cg: int = 500
    tol_cg: float = 1e-10
    full_newton: bool = False
    max_inner: int = 20
    tol_newton: float = 1e-12
    n_directions: int = 100
    n_samples: int = 50
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.omega <= 1.0:
            raise DomainError(f"omega must lie in (0, 1], got {self.omega}")
        if not self.eps_pen > 0.0:
            raise DomainError(f"eps_pen must be positive, got {self.eps_pen}")
        for name in ("tol_nash", "tol_outer", "tol_cg", "tol_newton"):
            if not getattr(self, name) > 0.0:
                raise DomainError(f"{name} must be positive")
        for name in ("max_outer", "max_outer_control", "max_cg", "max_inner", "n_directions", "n_samples"):
            if getattr(self, name) < 1:
                raise DomainError(f"{name} must be at least 1")


class ProblemContext:
    """
    Grid-level data for one hierarchical control problem

    Args:
        grid: Space-time grid
        tc: Transformed coefficients
        F: Coupling
        follower: Follower costs and regions
        O: Leader control region
        rho: Weight family
        delta_frac: Truncation of the time window [delta T, (1 - delta) T]
        weight_cap: Cap on normalized weights
    """

    def __init__(
        self,
        grid: Grid,
        tc: TransformedCoefficients,
        F: CouplingF,
        follower: FollowerConfig,
        O: Interval,
        rho: RhoFamily,
        delta_frac: float = 0.01,
        weight_cap: float = 1e12,
    ):
        if abs(grid.T - tc.T) > 1e-12 * tc.T:
            raise DomainError(f"grid horizon {grid.T} differs from domain horizon {tc.T}")
        check_interval(O)
        if not intervals_overlap(follower.Od, O):
            raise DomainError("O_d must intersect the leader region O")
        self.grid = grid
        self.tc = tc
        self.F = F
        self.follower = follower
        self.O = O
        self.rho = rho
        self.delta_frac = delta_frac
        self.weight_cap = weight_cap
        self.masks = RegionMasks.from_intervals(grid, O, follower.O1, follower.O2, follower.Od)

        T = grid.T
        self.times = clamp_to_window(grid.t, T, delta_frac)
        # log rho_*^{-2} = s phi_hat <= 0
        log_inv_sq = rho.s * rho.weights.phi_hat(self.times)
        self.star_inv_sq = np.exp(log_inv_sq)
        with np.errstate(over="ignore"):
            self.star_sq = np.exp(-log_inv_sq)
        steps = slice(0, grid.n_t)
        self.star_sq_min = float(np.min(self.star_sq[steps]))
        self.support = (-log_inv_sq - np.min(-log_inv_sq[steps])) <= np.log(weight_cap)
        self.support[grid.n_t] = False

        self.window = grid.window_weights(delta_frac * T, (1.0 - delta_frac) * T)
        self.obs = self.window[:, None] / grid.dt * self.masks.od_weights[None, :]
        self.leader_weight = normalized_square(rho.log_rho1(self.times[steps]), weight_cap)
        for i in (1, 2):
            self.target(i)

    def alpha(self, i: int) -> float:
        return self.follower.alpha[i - 1]

    def mu(self, i: int) -> float:
        return self.follower.mu[i - 1]

    def target(self, i: int) -> StatePair:
        shape = self.grid.zeros().shape
        try:
            y1d, y2d = (np.broadcast_to(np.asarray(v, dtype=float), shape).copy() for v in self.follower.targets[i - 1])
        except ValueError:
            raise DomainError(f"targets of follower {i} do not broadcast to the grid shape {shape}")
        return StatePair(y1d, y2d)

    def follower_mask(self, i: int) -> np.ndarray:
        return self.masks.follower(i)

    def with_follower(self, follower: FollowerConfig) -> "ProblemContext":
        return ProblemContext(
            self.grid, self.tc, self.F, follower, self.O, self.rho, self.delta_frac, self.weight_cap
        )

    def with_coupling(self, F: CouplingF) -> "ProblemContext":
        return ProblemContext(
            self.grid, self.tc, F, self.follower, self.O, self.rho, self.delta_frac, self.weight_cap
        )

    def zero_initial(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.zeros(self.grid.n_x), np.zeros(self.grid.n_x)

    def direction_mask(self, i: int) -> np.ndarray:
        """Rows where rho_*^2 stays within weight_cap of its minimum, crossed with O_i"""
        return self.support[:, None] & self.follower_mask(i)[None, :]


def tracking_source(ctx: ProblemContext, i: int, state: StatePair) -> StatePair:
    """Adjoint right-hand side alpha_i (w_{k+1}/dt) (y^{k+1} - y_d^{k+1}) on O_d, in step rows"""
    out = StatePair.zeros(ctx.grid)
    n_t = ctx.grid.n_t
    yd = ctx.target(i)
    a = ctx.alpha(i)
    out.y1[:n_t] = a * ctx.obs[1:] * (state.y1[1:] - yd.y1[1:])
    out.y2[:n_t] = a * ctx.obs[1:] * (state.y2[1:] - yd.y2[1:])
    return out


def characterize(ctx: ProblemContext, i: int, p1: np.ndarray) -> np.ndarray:
    """v^i = -(1/mu_i) rho_*^{-2} p^i_1 on O_i"""
    v = -(ctx.star_inv_sq[:, None] / ctx.mu(i)) * p1
    v = np.where(ctx.follower_mask(i)[None, :], v, 0.0)
    v[ctx.grid.n_t] = 0.0
    return v


def weighted_control_term(ctx: ProblemContext, v: np.ndarray) -> np.ndarray:
    """rho_*^2 v pointwise, read as 0 wherever v vanishes"""
    with np.errstate(invalid="ignore", over="ignore"):
        return np.where(v == 0.0, 0.0, ctx.star_sq[:, None] * v)


def initial_pair(ctx: ProblemContext, y0: Optional[Tuple[np.ndarray, np.ndarray]]) -> Tuple[np.ndarray, np.ndarray]:
    return ctx.zero_initial() if y0 is None else (np.asarray(y0[0], dtype=float), np.asarray(y0[1], dtype=float))
