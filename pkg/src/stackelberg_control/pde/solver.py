"""
Forward and backward implicit Euler solves on the unit cylinder.
"""
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from ..errors import SolverError
from ..geometry import MovingDomain, TransformedCoefficients
from ..utils.logger import get_logger
from .coupling import CouplingF
from .grid import AdjointQuad, ControlSet, Grid, StatePair
from .operators import LinearizedOperator

logger = get_logger(__name__)


def factorize(matrix: sp.spmatrix, what: str):
    """Sparse LU of a step or space-time matrix"""
    try:
        lu = splu(sp.csc_matrix(matrix))
    except RuntimeError as e:
        raise SolverError(f"{what}: singular matrix ({e})")
    return lu


def _solve(matrix: sp.spmatrix, rhs: np.ndarray, what: str) -> np.ndarray:
    out = factorize(matrix, what).solve(rhs)
    if not np.all(np.isfinite(out)):
        raise SolverError(f"{what}: linear solve returned non-finite values")
    return out


def _stacked(F: CouplingF, z: np.ndarray, n_x: int) -> np.ndarray:
    f1, f2 = F(z[:n_x], z[n_x:])
    return np.concatenate((f1, f2))


def solve_forward(
    y0: Tuple[np.ndarray, np.ndarray],
    ctrl: Optional[ControlSet],
    F: CouplingF,
    grid: Grid,
    tc: TransformedCoefficients,
    sources: Optional[StatePair] = None,
    full_newton: bool = False,
    max_inner: int = 20,
    tol_newton: float = 1e-12,
) -> StatePair:
    """
    Semilinear state trajectory by implicit Euler

    Each level takes one Newton step from the previous value (exact for linear
    coupling); with full_newton the step is repeated until the residual drops
    below tol_newton times the size of the step data. A failed Newton solve
    falls back to lagged Picard, where F is frozen at the latest iterate.

    Args:
        y0: Initial interior values of (y1, y2)
        ctrl: Leader and follower controls acting on the first equation
        F: Coupling
        grid: Space-time grid
        tc: Transformed coefficients b(t) and transport speed
        sources: Extra right-hand sides (rows indexed by step)
    """
    op = LinearizedOperator(tc, grid, F)
    n_x = grid.n_x
    traj = StatePair.from_initial(grid, y0)
    zeros = np.zeros(n_x)
    sweeps = max_inner if full_newton else 1

    for k in range(grid.n_t):
        prev = traj.at(k)
        rhs = np.concatenate((ctrl.source(k) if ctrl is not None else zeros, zeros))
        if sources is not None:
            rhs = rhs + sources.at(k)
        base = op.identity_dt + op.spatial(k + 1)
        tol = tol_newton * (1.0 + float(np.max(np.abs(rhs))) + float(np.max(np.abs(prev))) / grid.dt)

        def residual(z):
            return (z - prev) / grid.dt + op.spatial(k + 1) @ z + _stacked(F, z, n_x) - rhs

        z = prev.copy()
        res = np.inf
        for _ in range(sweeps):
            r = residual(z)
            res = float(np.linalg.norm(r, np.inf))
            if full_newton and res <= tol:
                break
            jac = base + op.coupling_block_at(z)
            try:
                z = z - _solve(jac, r, f"Newton step {k}")
            except SolverError:
                logger.warning("step %d: Newton solve failed, falling back to lagged Picard", k)
                z = _lagged_picard(base, prev, rhs, z, F, n_x, sweeps, grid.dt, k)
                break
        if full_newton:
            res = float(np.linalg.norm(residual(z), np.inf))
            if res > tol:
                raise SolverError(
                    f"Newton did not converge at step {k} after {max_inner} iterations", residual=res
                )
        traj.set(k + 1, z)
    return traj


def _lagged_picard(base, prev, rhs, z, F, n_x, sweeps, dt, k) -> np.ndarray:
    lu = factorize(base, f"Picard step {k}")
    for _ in range(sweeps):
        z = lu.solve(prev / dt + rhs - _stacked(F, z, n_x))
    if not np.all(np.isfinite(z)):
        raise SolverError(f"Picard fallback diverged at step {k}")
    return z


def solve_linearized(
    sources: StatePair,
    grid: Grid,
    tc: TransformedCoefficients,
    F: CouplingF,
    lin_state: Optional[StatePair] = None,
    y0: Optional[Tuple[np.ndarray, np.ndarray]] = None,
) -> StatePair:
    """Forward solve of w_t + K w + DF(lin_state) w = sources"""
    op = LinearizedOperator(tc, grid, F, lin_state)
    if y0 is None:
        traj = StatePair.zeros(grid)
    else:
        traj = StatePair.from_initial(grid, y0)
    for k in range(grid.n_t):
        rhs = traj.at(k) / grid.dt + sources.at(k)
        traj.set(k + 1, _solve(op.step_matrix(k), rhs, f"linearized step {k}"))
    return traj


def solve_adjoint_pair(
    sources: StatePair,
    grid: Grid,
    tc: TransformedCoefficients,
    F: CouplingF,
    lin_state: Optional[StatePair] = None,
    terminal: Optional[Tuple[np.ndarray, np.ndarray]] = None,
) -> StatePair:
    """
    Backward solve (P[k] - P[k+1])/dt + (K + DF(lin_state))^T P[k] = sources[k]
    with P[n_t] = terminal (zero by default)
    """
    return _backward(grid, tc, F, lin_state, [sources], [terminal])[0]


def solve_adjoint(
    sources: Sequence[StatePair],
    grid: Grid,
    tc: TransformedCoefficients,
    F: CouplingF,
    lin_state: Optional[StatePair] = None,
    terminals: Optional[Sequence[Optional[Tuple[np.ndarray, np.ndarray]]]] = None,
) -> AdjointQuad:
    """
    Both followers' adjoint systems, which share one matrix per step

    Args:
        sources: (Q^1, Q^2) right-hand sides, rows indexed by step
        lin_state: State trajectory the coupling is linearized along
        terminals: Terminal data per follower (zero by default)
    """
    if len(sources) != 2:
        raise SolverError(f"expected sources for 2 followers, got {len(sources)}")
    terminals = terminals or [None, None]
    first, second = _backward(grid, tc, F, lin_state, list(sources), list(terminals))
    return AdjointQuad.from_pairs(first, second)


def _backward(grid, tc, F, lin_state, sources: List[StatePair], terminals) -> List[StatePair]:
    op = LinearizedOperator(tc, grid, F, lin_state)
    outs = [StatePair.zeros(grid) for _ in sources]
    for out, term in zip(outs, terminals):
        if term is not None:
            out.y1[-1] = term[0]
            out.y2[-1] = term[1]
    for k in range(grid.n_t - 1, -1, -1):
        rhs = np.column_stack([out.at(k + 1) / grid.dt + src.at(k) for out, src in zip(outs, sources)])
        sol = factorize(op.adjoint_step_matrix(k), f"adjoint step {k}").solve(rhs)
        if not np.all(np.isfinite(sol)):
            raise SolverError(f"adjoint step {k}: linear solve returned non-finite values")
        for col, out in enumerate(outs):
            out.set(k, sol[:, col])
    return outs


def trajectory_header(names: Sequence[str], physical: bool = False) -> List[str]:
    header = ["t", "x"]
    if physical:
        header.append("x_phys")
    return header + list(names)


def trajectory_rows(
    grid: Grid,
    fields: Sequence[np.ndarray],
    dom: Optional[MovingDomain] = None,
) -> Iterator[tuple]:
    """
    Long-format rows (t, x[, x_phys], values...) with the boundary zeros included

    Passing the moving domain adds the physical coordinate x' = x ell(t).
    """
    x_full = grid.x_full
    padded = [np.pad(np.asarray(f), ((0, 0), (1, 1))) for f in fields]
    for n, t in enumerate(grid.t):
        length = float(dom.ell(t)) if dom is not None else None
        for j, x in enumerate(x_full):
            row = [t, x]
            if length is not None:
                row.append(x * length)
            row.extend(f[n, j] for f in padded)
            yield tuple(row)
