import numpy as np
import pytest

from stackelberg_control.errors import DomainError
from stackelberg_control.pde.grid import ControlSet, Grid, RegionMasks, StatePair, field_l2


def test_grid_spacing():
    grid = Grid(n_x=9, n_t=4, T=2.0)
    assert grid.dx == pytest.approx(0.1)
    assert grid.dt == pytest.approx(0.5)
    assert grid.x[0] == pytest.approx(0.1)
    assert grid.x[-1] == pytest.approx(0.9)
    assert grid.x_full.size == 11
    assert grid.zeros().shape == (5, 9)


def test_grid_rejects_degenerate_sizes():
    with pytest.raises(DomainError):
        Grid(n_x=1, n_t=4)
    with pytest.raises(DomainError):
        Grid(n_x=4, n_t=0)


def test_masks_round_outward():
    grid = Grid(n_x=9, n_t=2)
    mask = grid.mask((0.3, 0.8))
    assert np.flatnonzero(mask).tolist() == [2, 3, 4, 5, 6, 7]
    # ends between nodes round outward
    assert np.flatnonzero(grid.mask((0.33, 0.47))).tolist() == [2, 3, 4]


def test_trapezoid_weights_integrate_constants():
    grid = Grid(n_x=99, n_t=2)
    w = grid.trapezoid_weights((0.4, 0.6))
    assert grid.dx * np.sum(w) == pytest.approx(0.2, abs=1e-14)
    assert w[39] == 0.5 and w[59] == 0.5


def test_window_weights_integrate_linear_interpolants_exactly():
    grid = Grid(n_x=4, n_t=10)
    w = grid.window_weights(0.013, 0.987)
    assert np.sum(w) == pytest.approx(0.974, abs=1e-14)
    assert np.sum(w * grid.t) == pytest.approx(0.5 * (0.987**2 - 0.013**2), abs=1e-14)


def test_window_outside_horizon():
    with pytest.raises(DomainError):
        Grid(n_x=4, n_t=10).window_weights(0.5, 1.5)


def test_control_set_masks_controls():
    grid = Grid(n_x=9, n_t=3)
    masks = RegionMasks.from_intervals(grid, (0.3, 0.8), (0.2, 0.4), (0.6, 0.8), (0.45, 0.55))
    ones = np.ones((4, 9))
    ctrl = ControlSet(ones, ones, ones, masks)
    assert np.all(ctrl.h[:, ~masks.O] == 0.0)
    assert np.all(ctrl.v1[:, ~masks.O1] == 0.0)
    assert np.all(ctrl.v2[:, masks.O2] == 1.0)
    assert np.array_equal(ctrl.source(0), masks.O + masks.O1.astype(float) + masks.O2)


def test_state_pair_shape_check():
    with pytest.raises(DomainError):
        StatePair(np.zeros((3, 4)), np.zeros((3, 5)))


def test_state_pair_slices():
    grid = Grid(n_x=3, n_t=2)
    pair = StatePair.from_initial(grid, (np.array([1.0, 2.0, 3.0]), np.zeros(3)))
    assert np.array_equal(pair.at(0), [1.0, 2.0, 3.0, 0.0, 0.0, 0.0])
    assert pair.slice_norm(0, grid.dx) == pytest.approx(np.sqrt(0.25 * 14.0))
    assert pair.slice_norm(1, grid.dx) == 0.0


def test_field_l2_ignores_the_unused_last_row():
    grid = Grid(n_x=3, n_t=2)
    values = grid.zeros()
    values[-1] = 100.0
    assert field_l2(values, grid) == 0.0
