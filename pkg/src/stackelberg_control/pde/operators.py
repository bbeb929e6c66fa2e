"""
Flux-form finite differences for the transformed operator and the implicit
Euler space-time matrices built from them.

The spatial operator K(t) acts on interior nodes as

    (K u)_j = -b(t) [a_{j+1/2}(u_{j+1} - u_j) - a_{j-1/2}(u_j - u_{j-1})] / dx^2
              - c_j (u_{j+1} - u_{j-1}) / (2 dx),        c_j = (ell'/ell)(t) x_j

with a evaluated at half-points, so a_{1/2} > 0 although a(0) = 0. The adjoint
operator is assembled from its own stencil, -b (a p_x)_x + (c p)_x with the
product c p differenced centrally, and coincides with K(t)^T.
"""
from typing import Dict, Optional

import numpy as np
import scipy.sparse as sp

from ..geometry import TransformedCoefficients, eval_a
from .coupling import CouplingF
from .grid import Grid, StatePair


def _stencil(tc: TransformedCoefficients, grid: Grid, t: float):
    a_half = eval_a(tc.diff, grid.half_points)
    b = tc.b(t)
    drift = tc.drift_rate(t) * grid.x
    dx2 = grid.dx**2
    diag = b * (a_half[1:] + a_half[:-1]) / dx2
    return a_half, b, drift, diag


def assemble_operator(tc: TransformedCoefficients, grid: Grid, t: float) -> sp.csr_matrix:
    """Tridiagonal K(t) on interior nodes, Dirichlet rows eliminated"""
    a_half, b, drift, diag = _stencil(tc, grid, t)
    dx2 = grid.dx**2
    inner = a_half[1:-1]
    lower = -b * inner / dx2 + drift[1:] / (2.0 * grid.dx)
    upper = -b * inner / dx2 - drift[:-1] / (2.0 * grid.dx)
    return sp.diags([lower, diag, upper], [-1, 0, 1], format="csr")


def assemble_adjoint_operator(tc: TransformedCoefficients, grid: Grid, t: float) -> sp.csr_matrix:
    """Tridiagonal K*(t): diffusion unchanged, transport in divergence form"""
    a_half, b, drift, diag = _stencil(tc, grid, t)
    dx2 = grid.dx**2
    inner = a_half[1:-1]
    # (c p)_x at node j reads c_{j+1} p_{j+1} - c_{j-1} p_{j-1}
    lower = -b * inner / dx2 - drift[:-1] / (2.0 * grid.dx)
    upper = -b * inner / dx2 + drift[1:] / (2.0 * grid.dx)
    return sp.diags([lower, diag, upper], [-1, 0, 1], format="csr")


def coupling_block(F: CouplingF, y1: np.ndarray, y2: np.ndarray) -> sp.csr_matrix:
    """[[D1F1, D2F1], [D1F2, D2F2]] as a 2x2 block of diagonals"""
    jac = F.jacobian(y1, y2)
    return sp.bmat(
        [[sp.diags(jac[0, 0]), sp.diags(jac[0, 1])], [sp.diags(jac[1, 0]), sp.diags(jac[1, 1])]],
        format="csr",
    )


class LinearizedOperator:
    """
    Implicit Euler discretization of w_t + K(t) w + DF(ybar) w linearized along
    a trajectory ybar (the origin when no trajectory is given).

    Step k maps w^k to w^{k+1} with everything evaluated at t_{k+1}:
        A_k w^{k+1} - w^k / dt,   A_k = I/dt + diag(K, K)(t_{k+1}) + DF(ybar^{k+1})
    """

    def __init__(
        self,
        tc: TransformedCoefficients,
        grid: Grid,
        F: CouplingF,
        lin_state: Optional[StatePair] = None,
    ):
        self.tc = tc
        self.grid = grid
        self.F = F
        self.lin_state = lin_state
        self._spatial: Dict[int, sp.csr_matrix] = {}
        self._spatial_adjoint: Dict[int, sp.csr_matrix] = {}
        n = 2 * grid.n_x
        self.identity_dt = sp.identity(n, format="csr") / grid.dt

    def spatial(self, row: int) -> sp.csr_matrix:
        """diag(K, K) at time row `row`"""
        if row not in self._spatial:
            K = assemble_operator(self.tc, self.grid, self.grid.t[row])
            self._spatial[row] = sp.block_diag((K, K), format="csr")
        return self._spatial[row]

    def spatial_adjoint(self, row: int) -> sp.csr_matrix:
        if row not in self._spatial_adjoint:
            K = assemble_adjoint_operator(self.tc, self.grid, self.grid.t[row])
            self._spatial_adjoint[row] = sp.block_diag((K, K), format="csr")
        return self._spatial_adjoint[row]

    def coupling(self, row: int) -> sp.csr_matrix:
        if self.lin_state is None:
            zeros = np.zeros(self.grid.n_x)
            return coupling_block(self.F, zeros, zeros)
        return coupling_block(self.F, self.lin_state.y1[row], self.lin_state.y2[row])

    def coupling_block_at(self, z: np.ndarray) -> sp.csr_matrix:
        """Coupling Jacobian at a stacked state [y1; y2]"""
        n_x = self.grid.n_x
        return coupling_block(self.F, z[:n_x], z[n_x:])

    def step_matrix(self, k: int) -> sp.csr_matrix:
        return (self.identity_dt + self.spatial(k + 1) + self.coupling(k + 1)).tocsr()

    def adjoint_step_matrix(self, k: int) -> sp.csr_matrix:
        return (self.identity_dt + self.spatial_adjoint(k + 1) + self.coupling(k + 1).T).tocsr()

    def assemble_forward(self) -> sp.csr_matrix:
        """Block lower bidiagonal matrix acting on (w^1, ..., w^{n_t})"""
        n_t = self.grid.n_t
        diag = sp.block_diag([self.step_matrix(k) for k in range(n_t)], format="csr")
        shift = sp.kron(sp.eye(n_t, k=-1), -self.identity_dt, format="csr")
        return (diag + shift).tocsr()

    def assemble_adjoint(self) -> sp.csr_matrix:
        """Block upper bidiagonal matrix acting on (P[0], ..., P[n_t - 1]), built from adjoint stencils"""
        n_t = self.grid.n_t
        diag = sp.block_diag([self.adjoint_step_matrix(k) for k in range(n_t)], format="csr")
        shift = sp.kron(sp.eye(n_t, k=1), -self.identity_dt, format="csr")
        return (diag + shift).tocsr()

    def apply_forward(self, w: StatePair) -> StatePair:
        """
        Row k of the result is A_k w^{k+1} - w^k/dt; w^0 is used as given
        """
        out = StatePair.zeros(self.grid)
        for k in range(self.grid.n_t):
            out.set(k, self.step_matrix(k) @ w.at(k + 1) - w.at(k) / self.grid.dt)
        return out

    def apply_adjoint(self, p: StatePair) -> StatePair:
        """
        Row k of the result is A_k^T p[k] - p[k+1]/dt and pairs with w^{k+1}:
        sum_k <(L w)[k], p[k]> = sum_k <w^{k+1}, (L* p)[k]> when w^0 = 0 and p[n_t] = 0
        """
        out = StatePair.zeros(self.grid)
        for k in range(self.grid.n_t):
            out.set(k, self.adjoint_step_matrix(k) @ p.at(k) - p.at(k + 1) / self.grid.dt)
        return out


def assemble_spacetime_forward(
    tc: TransformedCoefficients, grid: Grid, F: CouplingF, lin_state: Optional[StatePair] = None
) -> sp.csr_matrix:
    return LinearizedOperator(tc, grid, F, lin_state).assemble_forward()


def assemble_spacetime_adjoint(
    tc: TransformedCoefficients, grid: Grid, F: CouplingF, lin_state: Optional[StatePair] = None
) -> sp.csr_matrix:
    return LinearizedOperator(tc, grid, F, lin_state).assemble_adjoint()


def apply_forward(
    w: StatePair, tc: TransformedCoefficients, grid: Grid, F: CouplingF, lin_state: Optional[StatePair] = None
) -> StatePair:
    return LinearizedOperator(tc, grid, F, lin_state).apply_forward(w)


def apply_adjoint(
    p: StatePair, tc: TransformedCoefficients, grid: Grid, F: CouplingF, lin_state: Optional[StatePair] = None
) -> StatePair:
    return LinearizedOperator(tc, grid, F, lin_state).apply_adjoint(p)


def spacetime_pairing(lw: StatePair, p: StatePair, grid: Grid) -> float:
    """sum_k <lw[k], p[k]> over the step rows"""
    n_t = grid.n_t
    return float(np.sum(lw.y1[:n_t] * p.y1[:n_t]) + np.sum(lw.y2[:n_t] * p.y2[:n_t]))


def shifted_pairing(w: StatePair, lp: StatePair, grid: Grid) -> float:
    """sum_k <w^{k+1}, lp[k]>"""
    n_t = grid.n_t
    return float(np.sum(w.y1[1:] * lp.y1[:n_t]) + np.sum(w.y2[1:] * lp.y2[:n_t]))
