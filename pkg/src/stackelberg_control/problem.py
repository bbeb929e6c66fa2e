"""
Builds the numerical objects of one run from a ProblemConfig.
"""
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .config import ProblemConfig
from .errors import DomainError
from .geometry import DegenerateDiffusion, MovingDomain, TransformedCoefficients, h1a_norm
from .pde.coupling import CouplingF
from .pde.grid import Grid
from .solvers.context import FollowerConfig, ProblemContext, SolverOptions
from .utils.logger import get_logger
from .weights import (
    CarlemanParameters,
    PsiFunction,
    RhoFamily,
    WeightFamily,
    build_psi,
    build_weights,
    scan_lambda,
    truncated_time_grid,
)

logger = get_logger(__name__)

# Points of the truncated grid used by the lambda scan and check-weights
N_WEIGHT_TIMES = 201


@dataclass
class Problem:
    config: ProblemConfig
    diff: DegenerateDiffusion
    dom: MovingDomain
    tc: TransformedCoefficients
    F: CouplingF
    grid: Grid
    params: CarlemanParameters
    psi: PsiFunction
    weights: WeightFamily
    rho: RhoFamily
    ctx: ProblemContext
    y0: Tuple[np.ndarray, np.ndarray]
    options: SolverOptions
    lambda_scanned: bool

    @property
    def weight_times(self) -> np.ndarray:
        cfg = self.config
        return truncated_time_grid(cfg.geometry.T, N_WEIGHT_TIMES, cfg.weights.delta_frac)

    @property
    def initial_h1a(self) -> float:
        return float(np.hypot(
            h1a_norm(self.y0[0], self.grid.dx, self.diff),
            h1a_norm(self.y0[1], self.grid.dx, self.diff),
        ))


def build_domain(cfg: ProblemConfig) -> MovingDomain:
    geo = cfg.geometry
    if geo.ell == "constant":
        return MovingDomain.constant(geo.T)
    if geo.ell == "linear":
        return MovingDomain.linear(geo.T, geo.gamma, geo.drift_bound)
    return MovingDomain.sinusoidal(geo.T, geo.gamma, geo.drift_bound)


def build_coupling(cfg: ProblemConfig) -> CouplingF:
    c = cfg.coupling
    if c.family == "linear":
        return CouplingF.linear(c.c11, c.c12, c.c21, c.c22)
    return CouplingF.bounded_sine(c.a11, c.a12, c.a21, c.a22)


def target_fields(cfg: ProblemConfig, grid: Grid) -> Tuple[Tuple[np.ndarray, np.ndarray], Tuple[np.ndarray, np.ndarray]]:
    """
    Follower targets on the (t, x) grid: each configured value times the target profile

    constant: the value itself; sine: value sin(pi x); ramp: value t / T
    """
    f = cfg.follower
    if f.target_profile == "sine":
        shape = np.broadcast_to(np.sin(np.pi * grid.x)[None, :], (grid.n_t + 1, grid.n_x))
    elif f.target_profile == "ramp":
        shape = np.broadcast_to((grid.t / grid.T)[:, None], (grid.n_t + 1, grid.n_x))
    else:
        shape = np.ones((grid.n_t + 1, grid.n_x))
    return (
        (f.target1_1 * shape, f.target1_2 * shape),
        (f.target2_1 * shape, f.target2_2 * shape),
    )


def build_follower(cfg: ProblemConfig, grid: Grid) -> FollowerConfig:
    f = cfg.follower
    r = cfg.regions
    return FollowerConfig(
        alpha=(f.alpha1, f.alpha2),
        mu=(f.mu1, f.mu2),
        O1=r.O1,
        O2=r.O2,
        Od=r.Od,
        targets=target_fields(cfg, grid),
    )


def inner_window(cfg: ProblemConfig) -> Tuple[float, float]:
    w = cfg.weights
    if w.alpha_prime is not None:
        return w.alpha_prime, w.beta_prime
    lo, hi = cfg.regions.O
    quarter = 0.25 * (hi - lo)
    return lo + quarter, hi - quarter


def initial_data(cfg: ProblemConfig, grid: Grid) -> Tuple[np.ndarray, np.ndarray]:
    """Profile pair scaled so that its discrete L2 norm equals the configured amplitude"""
    x = grid.x
    profile = cfg.initial.profile
    if profile == "zero" or cfg.initial.amplitude == 0.0:
        return np.zeros_like(x), np.zeros_like(x)
    if profile == "sine":
        y1, y2 = np.sin(np.pi * x), np.sin(2.0 * np.pi * x)
    else:
        y1 = x * (1.0 - x)
        y2 = y1.copy()
    norm = np.sqrt(grid.dx * (np.sum(y1**2) + np.sum(y2**2)))
    scale = cfg.initial.amplitude / norm
    return scale * y1, scale * y2


def build_problem(cfg: ProblemConfig) -> Problem:
    """
    Assemble geometry, weights, grid and problem context from a validated config

    Raises:
        DomainError: when no lambda up to the scan cap orders the weights
    """
    diff = DegenerateDiffusion(cfg.coefficient.alpha, cfg.coefficient.K)
    dom = build_domain(cfg)
    tc = TransformedCoefficients(diff, dom)
    F = build_coupling(cfg)
    grid = Grid(cfg.discretization.n_x, cfg.discretization.n_t, cfg.geometry.T)

    w = cfg.weights
    a_p, b_p = inner_window(cfg)
    scanned = w.lam is None
    params = CarlemanParameters(w.s, 1.0 if scanned else w.lam, a_p, b_p, w.s0)
    psi = build_psi(diff, params, w.n_quad)
    if scanned:
        times = truncated_time_grid(cfg.geometry.T, N_WEIGHT_TIMES, w.delta_frac)
        params = params.with_lambda(scan_lambda(psi, params, cfg.geometry.T, times))
    weights = build_weights(psi, params, cfg.geometry.T)
    rho = RhoFamily(weights, params.s)

    ctx = ProblemContext(
        grid, tc, F, build_follower(cfg, grid), cfg.regions.O, rho,
        delta_frac=w.delta_frac, weight_cap=w.weight_cap,
    )
    y0 = initial_data(cfg, grid)
    logger.info("problem: n_x=%d n_t=%d alpha=%.3g ell=%s lambda=%.4g%s",
                grid.n_x, grid.n_t, diff.alpha, dom.family, params.lam, " (scanned)" if scanned else "")
    if not np.all(np.isfinite(y0[0])) or not np.all(np.isfinite(y0[1])):
        raise DomainError("initial data is not finite")
    return Problem(
        config=cfg, diff=diff, dom=dom, tc=tc, F=F, grid=grid, params=params, psi=psi,
        weights=weights, rho=rho, ctx=ctx, y0=y0, options=cfg.solver, lambda_scanned=scanned,
    )
