import numpy as np
import pytest

from stackelberg_control.geometry import DegenerateDiffusion, MovingDomain, TransformedCoefficients, eval_a
from stackelberg_control.pde.coupling import CouplingF
from stackelberg_control.pde.grid import Grid, StatePair
from stackelberg_control.pde.operators import (
    apply_adjoint,
    apply_forward,
    assemble_adjoint_operator,
    assemble_operator,
    assemble_spacetime_adjoint,
    assemble_spacetime_forward,
    shifted_pairing,
    spacetime_pairing,
)


def _tc(ell="linear"):
    diff = DegenerateDiffusion(0.5)
    dom = {
        "constant": lambda: MovingDomain.constant(1.0),
        "linear": lambda: MovingDomain.linear(1.0, 0.2),
        "sinusoidal": lambda: MovingDomain.sinusoidal(1.0, 0.3),
    }[ell]()
    return TransformedCoefficients(diff, dom)


def _random_pair(grid, rng):
    return StatePair(rng.standard_normal((grid.n_t + 1, grid.n_x)), rng.standard_normal((grid.n_t + 1, grid.n_x)))


@pytest.mark.parametrize("ell", ["constant", "linear", "sinusoidal"])
def test_adjoint_stencil_is_the_transpose(ell):
    tc = _tc(ell)
    grid = Grid(n_x=16, n_t=8)
    for t in (0.0, 0.37, 1.0):
        K = assemble_operator(tc, grid, t).toarray()
        K_adj = assemble_adjoint_operator(tc, grid, t).toarray()
        assert np.max(np.abs(K_adj - K.T)) <= 1e-12


def test_spacetime_adjoint_is_the_transpose_along_a_trajectory():
    tc = _tc("sinusoidal")
    grid = Grid(n_x=16, n_t=8)
    rng = np.random.default_rng(3)
    ybar = _random_pair(grid, rng)
    for F in (CouplingF.linear(0.5, -0.3, 0.2, 0.4), CouplingF.bounded_sine()):
        L = assemble_spacetime_forward(tc, grid, F, ybar)
        La = assemble_spacetime_adjoint(tc, grid, F, ybar)
        assert np.max(np.abs((La - L.T).toarray())) <= 1e-12


def test_bilinear_identity_on_random_pairs():
    tc = _tc("linear")
    grid = Grid(n_x=64, n_t=128)
    F = CouplingF.linear(0.5, -0.3, 0.2, 0.4)
    rng = np.random.default_rng(11)
    for _ in range(20):
        w = _random_pair(grid, rng)
        w.y1[0] = 0.0
        w.y2[0] = 0.0
        p = _random_pair(grid, rng)
        p.y1[-1] = 0.0
        p.y2[-1] = 0.0
        lhs = spacetime_pairing(apply_forward(w, tc, grid, F), p, grid)
        rhs = shifted_pairing(w, apply_adjoint(p, tc, grid, F), grid)
        assert abs(lhs - rhs) <= 1e-10 * max(abs(lhs), 1.0)


def test_fixed_domain_operator_is_the_degenerate_stencil():
    diff = DegenerateDiffusion(0.5)
    tc = TransformedCoefficients(diff, MovingDomain.constant(1.0))
    grid = Grid(n_x=12, n_t=4)
    a = eval_a(diff, grid.half_points)
    dx2 = grid.dx**2
    expected = np.diag((a[:-1] + a[1:]) / dx2) - np.diag(a[1:-1] / dx2, 1) - np.diag(a[1:-1] / dx2, -1)
    assert np.max(np.abs(assemble_operator(tc, grid, 0.5).toarray() - expected)) <= 1e-12


def test_moving_domain_operator_is_coercive():
    tc = _tc("linear")
    grid = Grid(n_x=16, n_t=4)
    K = assemble_operator(tc, grid, 0.5).toarray()
    # coercive diffusion dominates the transport on this grid
    assert np.min(np.linalg.eigvals(K).real) > 0.0
