"""
Monolithic space-time matrix of the linearized optimality system.

Unknowns are Y = (y^1, ..., y^{n_t}) and the follower multipliers
P^i = (P^i[0], ..., P^i[n_t - 1]), every block ordered [component 1; component 2]:

    [  L    B_1  B_2 ] [ Y   ]   [ state data    ]
    [ -A_1  L*   0   ] [ P^1 ] = [ adjoint data 1 ]
    [ -A_2  0    L*  ] [ P^2 ]   [ adjoint data 2 ]

L is the implicit Euler operator linearized at the origin, L* its adjoint
stencil assembly, B_i substitutes the follower feedback
v^i = -(1/mu_i) rho_*^{-2} P^i_1 on O_i and A_i is the tracking weight on O_d.
The transposed system is the (phi, psi) system: phi runs backward from
terminal data, psi^i runs forward from zero.
"""
import threading
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from ..errors import SolverError
from ..pde.grid import AdjointQuad, StatePair
from ..pde.operators import LinearizedOperator
from ..pde.solver import factorize
from ..utils.logger import get_logger
from .context import ProblemContext, initial_pair

logger = get_logger(__name__)


@dataclass
class OptimalityState:
    state: StatePair
    adjoints: AdjointQuad


class OptimalitySystem:
    """Assembles and factorizes the coupled state/adjoint matrix once per problem"""

    def __init__(self, ctx: ProblemContext):
        self.ctx = ctx
        grid = ctx.grid
        self.n_x = grid.n_x
        self.n_t = grid.n_t
        self.block = 2 * grid.n_x
        self.size = self.n_t * self.block

        op = LinearizedOperator(ctx.tc, grid, ctx.F)
        L = op.assemble_forward()
        La = op.assemble_adjoint()
        B = [self._feedback(i) for i in (1, 2)]
        A = [self._tracking(i) for i in (1, 2)]
        self.matrix = sp.bmat(
            [[L, B[0], B[1]], [-A[0], La, None], [-A[1], None, La]],
            format="csc",
        )
        self._lu = factorize(self.matrix, "optimality system")
        self._lock = threading.Lock()
        logger.debug("optimality system factorized: %d unknowns", self.matrix.shape[0])

    def _feedback(self, i: int) -> sp.csr_matrix:
        ctx = self.ctx
        mask = ctx.follower_mask(i).astype(float)
        zero = np.zeros(self.n_x)
        blocks = [
            np.concatenate((ctx.star_inv_sq[k] / ctx.mu(i) * mask, zero)) for k in range(self.n_t)
        ]
        return sp.diags(np.concatenate(blocks), format="csr")

    def _tracking(self, i: int) -> sp.csr_matrix:
        ctx = self.ctx
        blocks = [np.tile(ctx.alpha(i) * ctx.obs[k + 1], 2) for k in range(self.n_t)]
        return sp.diags(np.concatenate(blocks), format="csr")

    def _flatten(self, pair: StatePair, rows: slice) -> np.ndarray:
        return np.hstack((pair.y1[rows], pair.y2[rows])).ravel()

    def _unflatten(self, vec: np.ndarray, shift: int) -> StatePair:
        """Blocks of vec fill rows shift .. shift + n_t - 1 of a new pair"""
        pair = StatePair.zeros(self.ctx.grid)
        blocks = vec.reshape(self.n_t, self.block)
        pair.y1[shift:shift + self.n_t] = blocks[:, : self.n_x]
        pair.y2[shift:shift + self.n_t] = blocks[:, self.n_x:]
        return pair

    def leader_columns(self, h: np.ndarray) -> np.ndarray:
        """R h: leader control into the first component of the state rows"""
        out = np.zeros(3 * self.size)
        out[: self.size] = self._flatten(
            StatePair(np.where(self.ctx.masks.O, h, 0.0), np.zeros_like(h)), slice(0, self.n_t)
        )
        return out

    def leader_rows(self, vec: np.ndarray) -> np.ndarray:
        """R^T vec as a field on (n_t + 1, n_x), zero outside O"""
        pair = self._unflatten(vec[: self.size], 0)
        return np.where(self.ctx.masks.O, pair.y1, 0.0)

    def rhs(
        self,
        y0: Optional[Tuple[np.ndarray, np.ndarray]] = None,
        h: Optional[np.ndarray] = None,
        state_sources: Optional[StatePair] = None,
        adjoint_sources: Optional[Sequence[StatePair]] = None,
    ) -> np.ndarray:
        ctx = self.ctx
        out = np.zeros(3 * self.size)
        y1_0, y2_0 = initial_pair(ctx, y0)
        out[: self.block] += np.concatenate((y1_0, y2_0)) / ctx.grid.dt
        if h is not None:
            out += self.leader_columns(h)
        if state_sources is not None:
            out[: self.size] += self._flatten(state_sources, slice(0, self.n_t))
        for idx, i in enumerate((1, 2)):
            part = slice((idx + 1) * self.size, (idx + 2) * self.size)
            yd = ctx.target(i)
            weighted = StatePair(ctx.alpha(i) * ctx.obs * yd.y1, ctx.alpha(i) * ctx.obs * yd.y2)
            out[part] -= self._flatten(weighted, slice(1, self.n_t + 1))
            if adjoint_sources is not None:
                out[part] += self._flatten(adjoint_sources[idx], slice(0, self.n_t))
        return out

    def solve_vector(self, rhs: np.ndarray) -> np.ndarray:
        with self._lock:
            z = self._lu.solve(rhs)
        if not np.all(np.isfinite(z)):
            raise SolverError("optimality system solve returned non-finite values")
        return z

    def solve_transposed(self, rhs: np.ndarray) -> np.ndarray:
        with self._lock:
            z = self._lu.solve(rhs, trans="T")
        if not np.all(np.isfinite(z)):
            raise SolverError("transposed optimality solve returned non-finite values")
        return z

    def unpack(self, z: np.ndarray, y0: Optional[Tuple[np.ndarray, np.ndarray]] = None) -> OptimalityState:
        state = self._unflatten(z[: self.size], 1)
        y1_0, y2_0 = initial_pair(self.ctx, y0)
        state.y1[0] = y1_0
        state.y2[0] = y2_0
        first = self._unflatten(z[self.size: 2 * self.size], 0)
        second = self._unflatten(z[2 * self.size:], 0)
        return OptimalityState(state=state, adjoints=AdjointQuad.from_pairs(first, second))

    def solve(
        self,
        y0: Optional[Tuple[np.ndarray, np.ndarray]] = None,
        h: Optional[np.ndarray] = None,
        state_sources: Optional[StatePair] = None,
        adjoint_sources: Optional[Sequence[StatePair]] = None,
    ) -> OptimalityState:
        z = self.solve_vector(self.rhs(y0, h, state_sources, adjoint_sources))
        return self.unpack(z, y0)

    def terminal(self, z: np.ndarray) -> np.ndarray:
        """E z: stacked y(T)"""
        return z[self.size - self.block: self.size]

    def terminal_columns(self, y_T: np.ndarray) -> np.ndarray:
        """E^T y_T"""
        out = np.zeros(3 * self.size)
        out[self.size - self.block: self.size] = y_T
        return out

    def solve_dual(self, phi_T: Tuple[np.ndarray, np.ndarray]) -> Tuple[StatePair, StatePair, StatePair]:
        """
        (phi, psi^1, psi^2) with phi(T) = phi_T, psi^i(0) = 0 and no sources

        phi row k is the multiplier of state step k, so phi[0] is phi(0) and
        phi[n_t] = phi_T; psi^i row k + 1 is the value at t_{k+1}.
        """
        rhs = self.terminal_columns(np.concatenate(phi_T) / self.ctx.grid.dt)
        z = self.solve_transposed(rhs)
        phi = self._unflatten(z[: self.size], 0)
        phi.y1[self.n_t] = phi_T[0]
        phi.y2[self.n_t] = phi_T[1]
        psi1 = self._unflatten(z[self.size: 2 * self.size], 1)
        psi2 = self._unflatten(z[2 * self.size:], 1)
        return phi, psi1, psi2
