import numpy as np
import pytest
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from stackelberg_control.errors import SolverError
from stackelberg_control.geometry import DegenerateDiffusion, MovingDomain, TransformedCoefficients, eval_a
from stackelberg_control.pde.coupling import CouplingF
from stackelberg_control.pde.grid import Grid, StatePair
from stackelberg_control.pde.solver import (
    solve_adjoint,
    solve_adjoint_pair,
    solve_forward,
    solve_linearized,
    trajectory_header,
    trajectory_rows,
)

ALPHA = 0.5
ZERO_F = CouplingF.linear()


def _tc(dom):
    return TransformedCoefficients(DegenerateDiffusion(ALPHA), dom)


def _sine_data(grid, amplitude=1.0):
    return amplitude * np.sin(np.pi * grid.x), amplitude * np.sin(2.0 * np.pi * grid.x)


def test_zero_data_stays_zero():
    grid = Grid(16, 16)
    traj = solve_forward((np.zeros(16), np.zeros(16)), None, CouplingF.bounded_sine(), grid,
                         _tc(MovingDomain.linear(1.0, 0.2)))
    assert traj.max_abs() == 0.0


def test_energy_and_max_norm_decay_on_a_fixed_domain():
    grid = Grid(31, 40)
    traj = solve_forward(_sine_data(grid), None, ZERO_F, grid, _tc(MovingDomain.constant(1.0)))
    norms = np.array([traj.slice_norm(n, grid.dx) for n in range(grid.n_t + 1)])
    assert np.all(np.diff(norms) <= 1e-15)
    peaks = np.maximum(np.max(np.abs(traj.y1), axis=1), np.max(np.abs(traj.y2), axis=1))
    assert np.all(np.diff(peaks) <= 1e-15)


def test_fixed_domain_reduction_matches_direct_degenerate_solver():
    grid = Grid(24, 20)
    y0 = _sine_data(grid, 0.3)
    traj = solve_forward(y0, None, ZERO_F, grid, _tc(MovingDomain.constant(1.0)))

    a = eval_a(DegenerateDiffusion(ALPHA), grid.half_points)
    dx2 = grid.dx**2
    K = sp.diags([-a[1:-1] / dx2, (a[:-1] + a[1:]) / dx2, -a[1:-1] / dx2], [-1, 0, 1], format="csc")
    step = sp.identity(grid.n_x, format="csc") / grid.dt + K
    for y, start in ((traj.y1, y0[0]), (traj.y2, y0[1])):
        u = start.copy()
        for k in range(grid.n_t):
            u = spsolve(step, u / grid.dt)
            assert np.max(np.abs(y[k + 1] - u)) <= 1e-12


def test_linear_coupling_needs_one_newton_step():
    grid = Grid(16, 16)
    tc = _tc(MovingDomain.linear(1.0, 0.2))
    F = CouplingF.linear(0.5, -0.3, 0.2, 0.4)
    one = solve_forward(_sine_data(grid), None, F, grid, tc)
    full = solve_forward(_sine_data(grid), None, F, grid, tc, full_newton=True)
    assert np.max(np.abs((one - full).y1)) <= 1e-12
    assert np.max(np.abs((one - full).y2)) <= 1e-12


def test_full_newton_converges_for_bounded_sine():
    grid = Grid(16, 16)
    traj = solve_forward(_sine_data(grid, 0.5), None, CouplingF.bounded_sine(), grid,
                         _tc(MovingDomain.sinusoidal(1.0, 0.3)), full_newton=True)
    assert np.all(np.isfinite(traj.y1)) and np.all(np.isfinite(traj.y2))


def test_newton_failure_carries_the_residual():
    grid = Grid(16, 2)
    with pytest.raises(SolverError) as err:
        solve_forward(_sine_data(grid, 3.0), None, CouplingF.bounded_sine(2.0, 2.0, 2.0, 2.0), grid,
                      _tc(MovingDomain.linear(1.0, 0.2)), full_newton=True, max_inner=1, tol_newton=1e-300)
    assert err.value.residual is not None and err.value.residual > 0.0


def test_linearized_and_adjoint_solves_are_dual():
    grid = Grid(20, 24)
    tc = _tc(MovingDomain.linear(1.0, 0.2))
    rng = np.random.default_rng(5)
    F = CouplingF.bounded_sine()
    ybar = StatePair(0.3 * rng.standard_normal((25, 20)), 0.3 * rng.standard_normal((25, 20)))
    f = StatePair(rng.standard_normal((25, 20)), rng.standard_normal((25, 20)))
    q = StatePair(rng.standard_normal((25, 20)), rng.standard_normal((25, 20)))
    w = solve_linearized(f, grid, tc, F, lin_state=ybar)
    P = solve_adjoint_pair(q, grid, tc, F, lin_state=ybar)
    n_t = grid.n_t
    lhs = np.sum(f.y1[:n_t] * P.y1[:n_t]) + np.sum(f.y2[:n_t] * P.y2[:n_t])
    rhs = np.sum(w.y1[1:] * q.y1[:n_t]) + np.sum(w.y2[1:] * q.y2[:n_t])
    assert abs(lhs - rhs) <= 1e-10 * abs(lhs)


def test_both_followers_share_the_adjoint_matrix():
    grid = Grid(12, 10)
    tc = _tc(MovingDomain.linear(1.0, 0.2))
    rng = np.random.default_rng(9)
    q1 = StatePair(rng.standard_normal((11, 12)), rng.standard_normal((11, 12)))
    q2 = StatePair(rng.standard_normal((11, 12)), rng.standard_normal((11, 12)))
    quad = solve_adjoint([q1, q2], grid, tc, ZERO_F)
    single = solve_adjoint_pair(q2, grid, tc, ZERO_F)
    assert np.allclose(quad.p2_1, single.y1, rtol=1e-13, atol=1e-14)
    assert np.allclose(quad.p2_2, single.y2, rtol=1e-13, atol=1e-14)
    assert np.all(quad.p1_1[-1] == 0.0)


def _manufactured_error(n_x, dom):
    """Final-time interior error for y = (1 + t) x^3 (1 - x); implicit Euler is exact in time"""
    grid = Grid(n_x, 4)
    tc = _tc(dom)
    x = grid.x
    g = x**3 * (1.0 - x)
    dg = 3.0 * x**2 - 4.0 * x**3
    flux_x = 3.0 * (ALPHA + 2.0) * x ** (ALPHA + 1.0) - 4.0 * (ALPHA + 3.0) * x ** (ALPHA + 2.0)
    src = StatePair.zeros(grid)
    for k in range(grid.n_t):
        t = grid.t[k + 1]
        f = g - (1.0 + t) * (tc.b(t) * flux_x + tc.drift_rate(t) * x * dg)
        src.y1[k] = f
        src.y2[k] = f
    traj = solve_forward((g, g), None, ZERO_F, grid, tc, sources=src)
    exact = (1.0 + grid.T) * g
    inner = x >= 0.25
    return np.sqrt(grid.dx * np.sum((traj.y1[-1] - exact)[inner] ** 2))


@pytest.mark.parametrize("dom", [MovingDomain.constant(1.0), MovingDomain.linear(1.0, 0.2)])
def test_manufactured_solution_space_order(dom):
    errors = [_manufactured_error(n, dom) for n in (15, 31, 63)]
    order = np.log2(errors[1] / errors[2])
    assert order >= 1.5, f"errors {errors}, observed order {order:.3f}"


def test_time_order_of_implicit_euler():
    dom = MovingDomain.linear(1.0, 0.2)
    finals = []
    for n_t in (20, 40, 80, 160):
        grid = Grid(31, n_t)
        traj = solve_forward(_sine_data(grid), None, CouplingF.bounded_sine(), grid, _tc(dom), full_newton=True)
        finals.append(traj.at(n_t))
    d = [np.linalg.norm(finals[i] - finals[i + 1]) for i in range(3)]
    order = np.log2(d[1] / d[2])
    assert order >= 0.9, f"successive differences {d}, observed order {order:.3f}"


def test_trajectory_rows_include_boundary_zeros_and_physical_coordinate():
    grid = Grid(3, 2)
    dom = MovingDomain.linear(1.0, 0.5)
    y = np.ones((3, 3))
    rows = list(trajectory_rows(grid, [y], dom))
    assert trajectory_header(["y1"], physical=True) == ["t", "x", "x_phys", "y1"]
    assert len(rows) == 3 * 5
    assert rows[0][3] == 0.0 and rows[4][3] == 0.0 and rows[2][3] == 1.0
    last = rows[-2]
    assert last[0] == pytest.approx(1.0)
    assert last[2] == pytest.approx(last[1] * 1.5)
