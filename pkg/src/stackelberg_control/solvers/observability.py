"""
Observability diagnostic for the (phi, psi) system dual to the optimality system.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..utils.logger import get_logger
from ..weights import carleman_log_weight
from .context import ProblemContext
from .optimality import OptimalitySystem

logger = get_logger(__name__)

# Sine modes spanning the random terminal data; fixed so samples agree across grids
N_MODES = 8


@dataclass
class ObservabilitySample:
    sample_id: int
    lhs: float
    rhs: float
    ratio: float
    combined_1: float
    combined_2: float
    violation: bool = False


@dataclass
class ObservabilityReport:
    samples: List[ObservabilitySample] = field(default_factory=list)
    exponent: float = 28.0

    @property
    def max_ratio(self) -> float:
        return max((s.ratio for s in self.samples), default=0.0)

    @property
    def violations(self) -> int:
        return sum(1 for s in self.samples if s.violation)

    def rows(self):
        for s in self.samples:
            yield s.sample_id, s.lhs, s.rhs, s.ratio, s.combined_1, s.combined_2


OBSERVABILITY_HEADER = ["sample_id", "lhs", "rhs", "ratio", "combined_1_T", "combined_2_T"]


def terminal_samples(x: np.ndarray, n_samples: int, seed: int) -> List[Tuple[np.ndarray, np.ndarray]]:
    """Gaussian combinations of sin(m pi x), m = 1..N_MODES, for both components"""
    rng = np.random.default_rng(seed)
    modes = np.sin(np.pi * np.outer(np.arange(1, N_MODES + 1), x))
    out = []
    for _ in range(n_samples):
        coeffs = rng.standard_normal((2, N_MODES))
        out.append((coeffs[0] @ modes, coeffs[1] @ modes))
    return out


def observation_weight(ctx: ProblemContext, exponent: float) -> np.ndarray:
    """e^{2sA} (s lam zeta)^exponent on (time rows, interior x), zero outside O"""
    log_w = carleman_log_weight(ctx.rho.weights, ctx.rho.s, exponent, ctx.grid.x, ctx.times)
    with np.errstate(under="ignore", over="ignore"):
        w = np.exp(log_w)
    return np.where(ctx.masks.O[None, :], w, 0.0)


class ObservabilitySampler:
    """Solves the (phi, psi) system for terminal data and compares both sides of the inequality"""

    def __init__(self, ctx: ProblemContext, exponent: float = 28.0, system: Optional[OptimalitySystem] = None):
        self.ctx = ctx
        self.exponent = exponent
        self.system = system or OptimalitySystem(ctx)
        self.weight = observation_weight(ctx, exponent)

    def evaluate(self, sample_id: int, phi_T: Tuple[np.ndarray, np.ndarray]) -> ObservabilitySample:
        ctx = self.ctx
        grid = ctx.grid
        phi, psi1, psi2 = self.system.solve_dual(phi_T)
        n_t = grid.n_t
        lhs = grid.dx * float(np.sum(phi.y1[0] ** 2) + np.sum(phi.y2[0] ** 2))
        for psi in (psi1, psi2):
            lhs += grid.dx * float(np.sum(psi.y1[n_t] ** 2) + np.sum(psi.y2[n_t] ** 2))
        rhs = grid.dx * float(np.sum(ctx.window[:, None] * self.weight * phi.y1**2))

        # alpha_1 psi^1 + alpha_2 psi^2 per component, at t = T
        a1, a2 = ctx.alpha(1), ctx.alpha(2)
        comb_1 = a1 * psi1.y1[n_t] + a2 * psi2.y1[n_t]
        comb_2 = a1 * psi1.y2[n_t] + a2 * psi2.y2[n_t]

        violation = rhs == 0.0 and lhs > 0.0
        if violation:
            logger.warning("observability sample %d: rhs vanishes with lhs = %.3e", sample_id, lhs)
            ratio = np.inf
        else:
            ratio = lhs / rhs if rhs > 0.0 else 0.0
        return ObservabilitySample(
            sample_id=sample_id,
            lhs=lhs,
            rhs=rhs,
            ratio=ratio,
            combined_1=float(np.sqrt(grid.dx * np.sum(comb_1**2))),
            combined_2=float(np.sqrt(grid.dx * np.sum(comb_2**2))),
            violation=violation,
        )


def observability_ratio(
    ctx: ProblemContext,
    terminal_data: Optional[Sequence[Tuple[np.ndarray, np.ndarray]]] = None,
    n_samples: int = 50,
    exponent: float = 28.0,
    seed: int = 0,
    threads: int = 1,
    system: Optional[OptimalitySystem] = None,
) -> ObservabilityReport:
    """
    lhs = |phi_1(0)|^2 + |phi_2(0)|^2 + sum |psi^j_i(T)|^2 against
    rhs = int_O e^{2sA} (s lam zeta)^exponent |phi_1|^2 for each terminal datum

    Args:
        ctx: Problem context (the diagnostic is homogeneous: no sources)
        terminal_data: Explicit terminal pairs; random sine combinations otherwise
        n_samples: Number of random samples when terminal_data is None
        exponent: Power of s lam zeta in the observation weight
    """
    sampler = ObservabilitySampler(ctx, exponent, system)
    if terminal_data is None:
        terminal_data = terminal_samples(ctx.grid.x, n_samples, seed)
    jobs = list(enumerate(terminal_data))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            samples = list(pool.map(lambda job: sampler.evaluate(*job), jobs))
    else:
        samples = [sampler.evaluate(i, data) for i, data in jobs]
    report = ObservabilityReport(samples=samples, exponent=exponent)
    logger.info("observability: %d samples, max ratio %.6e, %d violations",
                len(samples), report.max_ratio, report.violations)
    return report
