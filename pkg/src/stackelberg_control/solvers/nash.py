"""
Follower layer: Nash quasi-equilibrium for a fixed leader control.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from ..errors import DomainError
from ..pde.grid import AdjointQuad, ControlSet, StatePair
from ..pde.solver import solve_adjoint, solve_adjoint_pair, solve_forward, solve_linearized
from ..utils.logger import get_logger
from .base_solver import IterativeSolver
from .context import (
    ProblemContext,
    SolverOptions,
    characterize,
    initial_pair,
    tracking_source,
    weighted_control_term,
)
from .optimality import OptimalitySystem

logger = get_logger(__name__)


@dataclass
class NashResult:
    v1: np.ndarray
    v2: np.ndarray
    state: StatePair
    adjoints: AdjointQuad
    J: Tuple[float, float]
    residuals: Tuple[float, float]
    iterations: int
    converged: bool
    history: List[float] = field(default_factory=list)

    def control(self, i: int) -> np.ndarray:
        return self.v1 if i == 1 else self.v2


@dataclass
class ConvexityReport:
    follower: int
    min_quotient: float
    quotients: np.ndarray
    lower_bound: float


def evaluate_J(i: int, state: StatePair, v_i: np.ndarray, ctx: ProblemContext) -> float:
    """
    Discrete J_i: exact time integral of the linear interpolant over the truncated
    window with trapezoid weights on O_d, plus a rectangle rule for the control term
    """
    grid = ctx.grid
    yd = ctx.target(i)
    w = ctx.window[:, None] * ctx.masks.od_weights[None, :]
    misfit = (state.y1 - yd.y1) ** 2 + (state.y2 - yd.y2) ** 2
    tracking = 0.5 * ctx.alpha(i) * grid.dx * float(np.sum(w * misfit))
    v = np.asarray(v_i, dtype=float)[: grid.n_t]
    weighted = weighted_control_term(ctx, np.asarray(v_i, dtype=float))[: grid.n_t]
    control = 0.5 * ctx.mu(i) * grid.dt * grid.dx * float(np.sum(weighted * v))
    return tracking + control


def follower_controls_from_adjoint(adj: AdjointQuad, ctx: ProblemContext) -> Tuple[np.ndarray, np.ndarray]:
    return characterize(ctx, 1, adj.p1_1), characterize(ctx, 2, adj.p2_1)


def characterization_residual(result: NashResult, ctx: ProblemContext) -> Tuple[float, float]:
    """||v^i + (1/mu_i) rho_*^{-2} p^i_1 1_{O_i}|| / max(||v^i||, tiny) per follower"""
    out = []
    for i in (1, 2):
        v = result.control(i)
        target = characterize(ctx, i, result.adjoints.follower(i).y1)
        scale = max(float(np.linalg.norm(v)), np.finfo(float).tiny)
        out.append(float(np.linalg.norm(v - target)) / scale if np.any(v) or np.any(target) else 0.0)
    return out[0], out[1]


def gradient_J(i: int, at: NashResult, ctx: ProblemContext) -> np.ndarray:
    """dJ_i/dv^i = dt dx (mu_i rho_*^2 v^i + p^i_1) on O_i, step rows only"""
    grid = ctx.grid
    v = at.control(i)
    p1 = at.adjoints.follower(i).y1
    g = grid.dt * grid.dx * (ctx.mu(i) * weighted_control_term(ctx, v) + p1)
    g = np.where(ctx.follower_mask(i)[None, :], g, 0.0)
    g[grid.n_t] = 0.0
    return g


def directional_derivative_J(i: int, direction: np.ndarray, at: NashResult, ctx: ProblemContext) -> float:
    """J_i'(v^i)(direction) through the adjoint representation"""
    return float(np.sum(gradient_J(i, at, ctx) * np.asarray(direction, dtype=float)))


class NashSolver(IterativeSolver):
    """Damped fixed point v <- (1 - omega) v + omega v_tilde on the follower characterization"""

    def __init__(self, ctx: ProblemContext, options: Optional[SolverOptions] = None):
        options = options or SolverOptions()
        super().__init__("nash", options.tol_nash, options.max_outer)
        self.ctx = ctx
        self.options = options

    def _forward(self, ctrl: ControlSet, y0) -> StatePair:
        opts = self.options
        return solve_forward(
            y0, ctrl, self.ctx.F, self.ctx.grid, self.ctx.tc,
            full_newton=opts.full_newton, max_inner=opts.max_inner, tol_newton=opts.tol_newton,
        )

    def _adjoint(self, state: StatePair) -> AdjointQuad:
        ctx = self.ctx
        sources = [tracking_source(ctx, i, state) for i in (1, 2)]
        return solve_adjoint(sources, ctx.grid, ctx.tc, ctx.F, lin_state=state)

    def solve(self, h: Optional[np.ndarray] = None, y0=None) -> NashResult:
        ctx = self.ctx
        grid = ctx.grid
        self.reset()
        y0 = initial_pair(ctx, y0)
        h = grid.zeros() if h is None else np.asarray(h, dtype=float)
        ctrl = ControlSet(h, grid.zeros(), grid.zeros(), ctx.masks)
        omega = self.options.omega

        converged = False
        for _ in range(self.max_iter):
            state = self._forward(ctrl, y0)
            adj = self._adjoint(state)
            t1, t2 = follower_controls_from_adjoint(adj, ctx)
            v1 = (1.0 - omega) * ctrl.v1 + omega * t1
            v2 = (1.0 - omega) * ctrl.v2 + omega * t2
            change = max(np.max(np.abs(v1 - ctrl.v1)), np.max(np.abs(v2 - ctrl.v2)))
            scale = max(np.max(np.abs(v1)), np.max(np.abs(v2)), 1e-300)
            ctrl = ctrl.with_followers(v1, v2)
            if self.record(change / scale if change > 0.0 else 0.0):
                converged = True
                break

        if converged:
            logger.info("nash: converged in %d iterations", self.iterations)
        else:
            logger.warning("nash: no convergence after %d iterations (last update %.3e)",
                           self.iterations, self.history[-1])

        state = self._forward(ctrl, y0)
        adj = self._adjoint(state)
        result = NashResult(
            v1=ctrl.v1, v2=ctrl.v2, state=state, adjoints=adj,
            J=(evaluate_J(1, state, ctrl.v1, ctx), evaluate_J(2, state, ctrl.v2, ctx)),
            residuals=(0.0, 0.0), iterations=self.iterations, converged=converged,
            history=list(self.history),
        )
        result.residuals = characterization_residual(result, ctx)
        return result


def solve_nash(h, ctx: ProblemContext, options: Optional[SolverOptions] = None, y0=None) -> NashResult:
    return NashSolver(ctx, options).solve(h, y0)


def solve_nash_monolithic(
    h, ctx: ProblemContext, y0=None, system: Optional[OptimalitySystem] = None
) -> NashResult:
    """Direct sparse solve of the coupled optimality system; linear coupling only"""
    if not ctx.F.is_linear:
        raise DomainError("the monolithic Nash solve needs a linear coupling")
    system = system or OptimalitySystem(ctx)
    h = ctx.grid.zeros() if h is None else np.asarray(h, dtype=float)
    sol = system.solve(y0=y0, h=h)
    v1, v2 = follower_controls_from_adjoint(sol.adjoints, ctx)
    result = NashResult(
        v1=v1, v2=v2, state=sol.state, adjoints=sol.adjoints,
        J=(evaluate_J(1, sol.state, v1, ctx), evaluate_J(2, sol.state, v2, ctx)),
        residuals=(0.0, 0.0), iterations=1, converged=True,
    )
    result.residuals = characterization_residual(result, ctx)
    return result


def random_directions(ctx: ProblemContext, i: int, n: int, seed: int) -> List[np.ndarray]:
    """Gaussian fields on O_i (rows where rho_* is within the cap), unit discrete L2 norm"""
    rng = np.random.default_rng(seed)
    mask = ctx.direction_mask(i)
    grid = ctx.grid
    out = []
    for _ in range(n):
        d = np.where(mask, rng.standard_normal(mask.shape), 0.0)
        norm = np.sqrt(grid.dt * grid.dx * np.sum(d**2))
        out.append(d / norm if norm > 0.0 else d)
    return out


def second_derivative_J(i: int, direction: np.ndarray, at: NashResult, ctx: ProblemContext) -> float:
    """
    <D^2 J_i (direction, direction)> from the sensitivity theta and the second-order adjoint eta
    """
    grid = ctx.grid
    n_t = grid.n_t
    vbar = np.where(ctx.follower_mask(i)[None, :], direction, 0.0)
    source = StatePair(vbar, grid.zeros())
    theta = solve_linearized(source, grid, ctx.tc, ctx.F, lin_state=at.state)

    p = at.adjoints.follower(i)
    eta_src = StatePair.zeros(grid)
    a = ctx.alpha(i)
    eta_src.y1[:n_t] = a * ctx.obs[1:] * theta.y1[1:]
    eta_src.y2[:n_t] = a * ctx.obs[1:] * theta.y2[1:]
    if not ctx.F.is_linear:
        hess = ctx.F.hessian(at.state.y1[1:], at.state.y2[1:])
        th = (theta.y1[1:], theta.y2[1:])
        pc = (p.y1[:n_t], p.y2[:n_t])
        for j, rows in enumerate((eta_src.y1, eta_src.y2)):
            curvature = sum(pc[c] * hess[c, j, l] * th[l] for c in range(2) for l in range(2))
            rows[:n_t] -= curvature
    eta = solve_adjoint_pair(eta_src, grid, ctx.tc, ctx.F, lin_state=at.state)

    cross = grid.dt * grid.dx * float(np.sum(eta.y1[:n_t] * vbar[:n_t]))
    weighted = weighted_control_term(ctx, vbar)[:n_t]
    own = ctx.mu(i) * grid.dt * grid.dx * float(np.sum(weighted * vbar[:n_t]))
    return cross + own


def estimate_convexity(
    i: int,
    at: NashResult,
    ctx: ProblemContext,
    n_directions: int = 100,
    seed: int = 0,
    threads: int = 1,
) -> ConvexityReport:
    """Minimum Rayleigh quotient of D^2 J_i over random unit directions"""
    grid = ctx.grid
    directions = random_directions(ctx, i, n_directions, seed)

    def quotient(d):
        norm_sq = grid.dt * grid.dx * float(np.sum(d[: grid.n_t] ** 2))
        return second_derivative_J(i, d, at, ctx) / norm_sq if norm_sq > 0.0 else np.inf

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            quotients = np.array(list(pool.map(quotient, directions)))
    else:
        quotients = np.array([quotient(d) for d in directions])
    report = ConvexityReport(
        follower=i,
        min_quotient=float(np.min(quotients)),
        quotients=quotients,
        lower_bound=ctx.mu(i) * ctx.star_sq_min,
    )
    logger.info("convexity follower %d: min quotient %.6e (mu min rho_*^2 = %.6e)",
                i, report.min_quotient, report.lower_bound)
    return report
