"""
Leader layer: penalized null control of the linearized optimality system and
the outer Picard loop for the semilinear coupling.

The leader minimizes

    Phi(h) = 1/2 sum dt dx w1 |h|^2 on O + 1/(2 eps) dx |y(T)|^2

where w1 is rho_1^2 normalized over the truncated grid and (y, p^1, p^2)
solves the optimality system with the follower feedback substituted.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import DivergenceError, DomainError
from ..geometry import h1a_norm
from ..pde.grid import AdjointQuad, ControlSet, StatePair
from ..pde.operators import LinearizedOperator
from ..pde.solver import solve_forward
from ..utils.logger import get_logger
from ..weights import normalized_square
from .base_solver import IterativeSolver
from .context import ProblemContext, SolverOptions, initial_pair, tracking_source
from .nash import follower_controls_from_adjoint
from .optimality import OptimalitySystem

logger = get_logger(__name__)


@dataclass
class ControlProblem:
    """Initial data and leader penalty for one control solve"""

    y0: Tuple[np.ndarray, np.ndarray]
    eps_pen: float = 1e-8
    options: SolverOptions = field(default_factory=SolverOptions)

    def __post_init__(self):
        if not self.eps_pen > 0.0:
            raise DomainError(f"eps_pen must be positive, got {self.eps_pen}")
        self.y0 = (np.asarray(self.y0[0], dtype=float), np.asarray(self.y0[1], dtype=float))

    def with_eps(self, eps_pen: float) -> "ControlProblem":
        return replace(self, eps_pen=eps_pen)


@dataclass
class ControlResult:
    h: np.ndarray
    state: StatePair
    adjoints: AdjointQuad
    v1: np.ndarray
    v2: np.ndarray
    terminal_norm: float
    control_norm: float
    cg_iterations: int
    outer_iterations: int = 1
    phi_history: List[float] = field(default_factory=list)
    outer_history: List[float] = field(default_factory=list)
    residuals: Dict[str, float] = field(default_factory=dict)
    state_sources: Optional[StatePair] = None
    adjoint_sources: Optional[Tuple[StatePair, StatePair]] = None
    converged: bool = True


@dataclass
class NormReport:
    """Weighted norms of a control result against the data functional kappa0"""

    state_norm: float
    adjoint_norm: float
    control_norm: float
    sup_state: float
    sup_adjoint: float
    gradient_energy: float
    kappa0: float
    ratio: float

    @property
    def lhs(self) -> float:
        return self.state_norm + self.adjoint_norm + self.control_norm

    def as_dict(self) -> Dict[str, float]:
        return {
            "state_norm": self.state_norm,
            "adjoint_norm": self.adjoint_norm,
            "control_norm": self.control_norm,
            "sup_state": self.sup_state,
            "sup_adjoint": self.sup_adjoint,
            "gradient_energy": self.gradient_energy,
            "kappa0": self.kappa0,
            "ratio": self.ratio,
        }


class LeaderController(IterativeSolver):
    """
    Preconditioned conjugate gradient on the normal equation of Phi

    Args:
        ctx: Problem context
        problem: Initial data and penalty
        system: Factorized optimality system, shared across penalties when given
    """

    def __init__(self, ctx: ProblemContext, problem: ControlProblem, system: Optional[OptimalitySystem] = None):
        super().__init__("leader-cg", problem.options.tol_cg, problem.options.max_cg)
        self.ctx = ctx
        self.problem = problem
        self.system = system or OptimalitySystem(ctx)
        grid = ctx.grid
        self.mass = grid.dt * grid.dx
        self.weight = np.zeros((grid.n_t + 1, grid.n_x))
        self.weight[: grid.n_t] = ctx.leader_weight[:, None]
        self.weight = np.where(ctx.masks.O[None, :], self.weight, 0.0)
        self.phi_history: List[float] = []

    def _mask(self, h: np.ndarray) -> np.ndarray:
        out = np.where(self.ctx.masks.O[None, :], h, 0.0)
        out[self.ctx.grid.n_t] = 0.0
        return out

    def _terminal(self, z: np.ndarray) -> np.ndarray:
        return self.system.terminal(z)

    def _pullback(self, y_T: np.ndarray) -> np.ndarray:
        """R^T M^{-T} E^T (dx/eps) y_T"""
        scale = self.ctx.grid.dx / self.problem.eps_pen
        back = self.system.solve_transposed(self.system.terminal_columns(scale * y_T))
        return self._mask(self.system.leader_rows(back))

    def hessian_apply(self, p: np.ndarray) -> np.ndarray:
        z = self.system.solve_vector(self.system.leader_columns(p))
        return self.mass * self.weight * p + self._pullback(self._terminal(z))

    def base_vector(self, state_sources=None, adjoint_sources=None) -> np.ndarray:
        return self.system.rhs(self.problem.y0, None, state_sources, adjoint_sources)

    def phi(self, h: np.ndarray, state_sources=None, adjoint_sources=None) -> float:
        b0 = self.base_vector(state_sources, adjoint_sources)
        z = self.system.solve_vector(b0 + self.system.leader_columns(self._mask(h)))
        y_T = self._terminal(z)
        control = 0.5 * self.mass * float(np.sum(self.weight * h**2))
        return control + 0.5 / self.problem.eps_pen * self.ctx.grid.dx * float(y_T @ y_T)

    def gradient(self, h: np.ndarray, state_sources=None, adjoint_sources=None) -> np.ndarray:
        b0 = self.base_vector(state_sources, adjoint_sources)
        z = self.system.solve_vector(b0 + self.system.leader_columns(self._mask(h)))
        return self.mass * self.weight * self._mask(h) + self._pullback(self._terminal(z))

    def solve(self, state_sources=None, adjoint_sources=None) -> ControlResult:
        ctx = self.ctx
        grid = ctx.grid
        self.reset()
        self.phi_history = []

        b0 = self.base_vector(state_sources, adjoint_sources)
        y_T0 = self._terminal(self.system.solve_vector(b0))
        phi0 = 0.5 / self.problem.eps_pen * grid.dx * float(y_T0 @ y_T0)
        b = -self._pullback(y_T0)

        # Jacobi preconditioner on the control mass
        diag = self.mass * self.weight
        inv_diag = np.where(diag > 0.0, 1.0 / np.where(diag > 0.0, diag, 1.0), 0.0)

        hk = np.zeros_like(b)
        rk = b.copy()
        zk = inv_diag * rk
        dk = zk.copy()
        rz = float(np.sum(rk * zk))
        rz0 = rz
        self.phi_history.append(phi0)
        if self.record(1.0 if rz0 > 0.0 else 0.0):
            return self._finish(hk, b0)

        while self.iterations <= self.max_iter:
            Adk = self.hessian_apply(dk)
            alpha = rz / float(np.sum(dk * Adk))
            hk = hk + alpha * dk
            rk = rk - alpha * Adk
            # Phi(h) = Phi(0) - 1/2 <h, b + r> for the quadratic with H h = b - r
            self.phi_history.append(phi0 - 0.5 * float(np.sum(hk * (b + rk))))
            zk = inv_diag * rk
            rz_new = float(np.sum(rk * zk))
            rel = float(np.sqrt(max(rz_new, 0.0) / rz0))
            if self.record(rel):
                logger.info("leader CG converged in %d iterations (relative residual %.3e)",
                            self.iterations - 1, rel)
                return self._finish(hk, b0)
            beta = rz_new / rz
            dk = zk + beta * dk
            rz = rz_new
        self.fail(f"stagnated after {self.max_iter} iterations", residual=self.history[-1])

    def _finish(self, h: np.ndarray, b0: np.ndarray) -> ControlResult:
        ctx = self.ctx
        grid = ctx.grid
        sol = self.system.unpack(self.system.solve_vector(b0 + self.system.leader_columns(h)), self.problem.y0)
        v1, v2 = follower_controls_from_adjoint(sol.adjoints, ctx)
        return ControlResult(
            h=h,
            state=sol.state,
            adjoints=sol.adjoints,
            v1=v1,
            v2=v2,
            terminal_norm=sol.state.slice_norm(grid.n_t, grid.dx),
            control_norm=self.mass * float(np.sum(self.weight * h**2)),
            cg_iterations=max(self.iterations - 1, 0),
            phi_history=list(self.phi_history),
        )


def solve_linearized_control(
    ctx: ProblemContext,
    problem: ControlProblem,
    state_sources: Optional[StatePair] = None,
    adjoint_sources: Optional[Sequence[StatePair]] = None,
    system: Optional[OptimalitySystem] = None,
) -> ControlResult:
    """
    Leader control of the optimality system linearized at the origin

    Args:
        state_sources: Sources (F0, F0bar) of the two state equations
        adjoint_sources: Extra sources (F_i, F_ibar) of follower i's adjoint system
    """
    controller = LeaderController(ctx, problem, system)
    result = controller.solve(state_sources, adjoint_sources)
    result.state_sources = state_sources
    result.adjoint_sources = tuple(adjoint_sources) if adjoint_sources is not None else None
    return result


def semilinear_sources(
    ctx: ProblemContext, state: StatePair, adjoints: AdjointQuad
) -> Tuple[StatePair, Tuple[StatePair, StatePair]]:
    """
    Frozen remainders of the coupling around its linearization c = DF(0, 0)

    State rows k carry -(F(y^{k+1}) - c y^{k+1}); adjoint rows k carry
    -(DF(y^{k+1}) - c)^T P^i[k].
    """
    grid = ctx.grid
    n_t = grid.n_t
    c = ctx.F.linearization()
    y1, y2 = state.y1[1:], state.y2[1:]
    r1, r2 = ctx.F.remainder(y1, y2)
    f = StatePair.zeros(grid)
    f.y1[:n_t] = -r1
    f.y2[:n_t] = -r2

    jac = ctx.F.jacobian(y1, y2)
    out = []
    for i in (1, 2):
        p = adjoints.follower(i)
        p1, p2 = p.y1[:n_t], p.y2[:n_t]
        q = StatePair.zeros(grid)
        q.y1[:n_t] = -((jac[0, 0] - c[0, 0]) * p1 + (jac[1, 0] - c[1, 0]) * p2)
        q.y2[:n_t] = -((jac[0, 1] - c[0, 1]) * p1 + (jac[1, 1] - c[1, 1]) * p2)
        out.append(q)
    return f, (out[0], out[1])


def optimality_residual(
    ctx: ProblemContext,
    state: StatePair,
    adjoints: AdjointQuad,
    h: np.ndarray,
    y0: Tuple[np.ndarray, np.ndarray],
) -> Dict[str, float]:
    """
    Max-norm residuals of the nonlinear controlled optimality system: state
    equations with F, both adjoint systems linearized along y, initial trace
    """
    grid = ctx.grid
    n_t = grid.n_t
    op = LinearizedOperator(ctx.tc, grid, ctx.F, lin_state=state)
    v1, v2 = follower_controls_from_adjoint(adjoints, ctx)
    ctrl = ControlSet(h, v1, v2, ctx.masks)

    state_res = 0.0
    for k in range(n_t):
        z = state.at(k + 1)
        f1, f2 = ctx.F(state.y1[k + 1], state.y2[k + 1])
        lhs = (z - state.at(k)) / grid.dt + op.spatial(k + 1) @ z + np.concatenate((f1, f2))
        rhs = np.concatenate((ctrl.source(k), np.zeros(grid.n_x)))
        state_res = max(state_res, float(np.max(np.abs(lhs - rhs))))

    out = {"state": state_res}
    for i in (1, 2):
        p = adjoints.follower(i)
        residual = op.apply_adjoint(p) - tracking_source(ctx, i, state)
        out[f"adjoint_{i}"] = float(max(np.max(np.abs(residual.y1[:n_t])), np.max(np.abs(residual.y2[:n_t]))))
    y1_0, y2_0 = initial_pair(ctx, y0)
    out["initial"] = float(max(np.max(np.abs(state.y1[0] - y1_0)), np.max(np.abs(state.y2[0] - y2_0))))
    return out


class SemilinearController(IterativeSolver):
    """Outer Picard loop feeding frozen coupling remainders to the linearized leader solve"""

    def __init__(self, ctx: ProblemContext, problem: ControlProblem):
        opts = problem.options
        super().__init__("semilinear", opts.tol_outer, opts.max_outer_control)
        self.ctx = ctx
        self.problem = problem
        self.system = OptimalitySystem(ctx)

    def solve(self) -> ControlResult:
        ctx = self.ctx
        self.reset()
        result = solve_linearized_control(ctx, self.problem, system=self.system)
        converged = ctx.F.is_linear
        if converged:
            self.record(0.0)
        while not converged and self.iterations < self.max_iter:
            f, q = semilinear_sources(ctx, result.state, result.adjoints)
            nxt = solve_linearized_control(ctx, self.problem, f, q, system=self.system)
            scale = 1.0 + max(result.state.max_abs(), _adjoint_max(result.adjoints))
            change = max(
                (nxt.state - result.state).max_abs(),
                _adjoint_max(_adjoint_diff(nxt.adjoints, result.adjoints)),
            ) / scale
            result = nxt
            converged = self.record(change)
            residual = optimality_residual(ctx, result.state, result.adjoints, result.h, self.problem.y0)
            logger.info("semilinear iteration %d: update %.3e, state residual %.3e",
                        self.iterations, change, residual["state"])
            if not converged and self.growing(3):
                self.fail(
                    "outer iteration diverging for 3 consecutive steps; reduce the size of the initial data",
                    residual=change,
                    error=DivergenceError,
                )
        if not converged:
            logger.warning("semilinear loop stopped after %d iterations", self.iterations)

        # Rerun the true semilinear state under the computed controls
        opts = self.problem.options
        ctrl = ControlSet(result.h, result.v1, result.v2, ctx.masks)
        true_state = solve_forward(
            self.problem.y0, ctrl, ctx.F, ctx.grid, ctx.tc,
            full_newton=True, max_inner=opts.max_inner, tol_newton=max(opts.tol_newton, 1e-12),
        )
        result.terminal_norm = true_state.slice_norm(ctx.grid.n_t, ctx.grid.dx)
        result.residuals = optimality_residual(ctx, true_state, result.adjoints, result.h, self.problem.y0)
        result.state = true_state
        result.outer_iterations = self.iterations
        result.outer_history = list(self.history)
        result.converged = converged
        return result


def _adjoint_max(adj: AdjointQuad) -> float:
    return float(max(np.max(np.abs(f)) for f in adj.fields()))


def _adjoint_diff(a: AdjointQuad, b: AdjointQuad) -> AdjointQuad:
    return AdjointQuad(*(x - y for x, y in zip(a.fields(), b.fields())))


def solve_semilinear_control(ctx: ProblemContext, problem: ControlProblem) -> ControlResult:
    return SemilinearController(ctx, problem).solve()


def _weighted_sum(values: np.ndarray, weight: np.ndarray, grid) -> float:
    return grid.dt * grid.dx * float(np.sum(weight[:, None] * values))


def weighted_norm_report(result: ControlResult, ctx: ProblemContext, problem: ControlProblem) -> NormReport:
    """
    Weighted norms of the control estimate with rho_0, rho_hat, rho_2 normalized over the
    truncated grid and capped like the control weight, kappa0 and the realized ratio
    """
    grid = ctx.grid
    n_t = grid.n_t
    rho = ctx.rho
    times = ctx.times
    # state rows 1..n_t sit at t_{k+1}, adjoint rows 0..n_t-1 at t_k
    w0_state = normalized_square(rho.log_rho0(times[1:]), ctx.weight_cap)
    w0_adj = normalized_square(rho.log_rho0(times[:n_t]), ctx.weight_cap)
    w2 = normalized_square(rho.log_rho2(times[:n_t]), ctx.weight_cap)
    w_hat = normalized_square(rho.log_rho_hat(times), ctx.weight_cap)

    y = result.state
    state_norm = _weighted_sum(y.y1[1:] ** 2 + y.y2[1:] ** 2, w0_state, grid)
    adjoint_norm = sum(
        _weighted_sum(f[:n_t] ** 2, w0_adj, grid) for f in result.adjoints.fields()
    )
    control_norm = result.control_norm

    slice_state = grid.dx * (np.sum(y.y1**2, axis=1) + np.sum(y.y2**2, axis=1))
    slice_adj = grid.dx * sum(np.sum(f**2, axis=1) for f in result.adjoints.fields())
    sup_state = float(np.max(w_hat * slice_state))
    sup_adjoint = float(np.max(w_hat * slice_adj))
    energy = np.array([
        h1a_norm(y.y1[n], grid.dx, ctx.tc.diff) ** 2 + h1a_norm(y.y2[n], grid.dx, ctx.tc.diff) ** 2
        for n in range(n_t + 1)
    ])
    gradient_energy = grid.dt * float(np.sum((w_hat * energy)[1:]))

    kappa0 = data_functional(ctx, problem, result.state_sources, result.adjoint_sources, w2)
    lhs = state_norm + adjoint_norm + control_norm
    ratio = lhs / kappa0 if kappa0 > 0.0 else 0.0
    return NormReport(
        state_norm=state_norm,
        adjoint_norm=adjoint_norm,
        control_norm=control_norm,
        sup_state=sup_state,
        sup_adjoint=sup_adjoint,
        gradient_energy=gradient_energy,
        kappa0=kappa0,
        ratio=ratio,
    )


def data_functional(
    ctx: ProblemContext,
    problem: ControlProblem,
    state_sources: Optional[StatePair],
    adjoint_sources: Optional[Sequence[StatePair]],
    w2: Optional[np.ndarray] = None,
) -> float:
    """kappa0 = |y0_1|^2 + |y0_2|^2 + sum of rho_2-weighted source norms"""
    grid = ctx.grid
    n_t = grid.n_t
    if w2 is None:
        w2 = normalized_square(ctx.rho.log_rho2(ctx.times[:n_t]), ctx.weight_cap)
    y1_0, y2_0 = problem.y0
    kappa = grid.dx * float(np.sum(y1_0**2) + np.sum(y2_0**2))
    sources = []
    if state_sources is not None:
        sources.append(state_sources)
    if adjoint_sources is not None:
        sources.extend(adjoint_sources)
    for src in sources:
        kappa += _weighted_sum(src.y1[:n_t] ** 2 + src.y2[:n_t] ** 2, w2, grid)
    return kappa


def penalty_sweep(
    ctx: ProblemContext,
    problem: ControlProblem,
    eps_values: Sequence[float],
    threads: int = 1,
) -> List[Tuple[float, float, float]]:
    """(eps, terminal norm, weighted control norm) for each penalty, one shared factorization"""
    system = OptimalitySystem(ctx)

    def run(eps):
        res = solve_linearized_control(ctx, problem.with_eps(eps), system=system)
        logger.info("penalty %.1e: terminal norm %.3e, control norm %.3e", eps, res.terminal_norm, res.control_norm)
        return eps, res.terminal_norm, res.control_norm

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(run, eps_values))
    return [run(eps) for eps in eps_values]
