import numpy as np
import pytest

from stackelberg_control.problem import build_problem
from stackelberg_control.solvers.observability import (
    N_MODES,
    ObservabilitySampler,
    observability_ratio,
    observation_weight,
    terminal_samples,
)

from conftest import small_config


def test_zero_terminal_data_gives_zero_ratio(small_problem):
    ctx = small_problem.ctx
    zeros = ctx.zero_initial()
    report = observability_ratio(ctx, terminal_data=[zeros])
    sample = report.samples[0]
    assert sample.lhs == 0.0 and sample.rhs == 0.0
    assert sample.ratio == 0.0
    assert not sample.violation
    assert report.violations == 0


def test_observation_weight_lives_on_the_leader_region(small_problem):
    ctx = small_problem.ctx
    w = observation_weight(ctx, 28.0)
    assert w.shape == (ctx.grid.n_t + 1, ctx.grid.n_x)
    assert np.all(w[:, ~ctx.masks.O] == 0.0)
    assert np.all(w >= 0.0)
    assert np.any(w[:, ctx.masks.O] > 0.0)


def test_terminal_samples_are_seeded_sine_combinations():
    x = np.linspace(0.05, 0.95, 19)
    first = terminal_samples(x, 3, seed=4)
    again = terminal_samples(x, 3, seed=4)
    other = terminal_samples(x, 3, seed=5)
    assert len(first) == 3
    for (a1, a2), (b1, b2) in zip(first, again):
        assert np.array_equal(a1, b1) and np.array_equal(a2, b2)
    assert not np.array_equal(first[0][0], other[0][0])
    modes = np.sin(np.pi * np.outer(np.arange(1, N_MODES + 1), x))
    coeffs, *_ = np.linalg.lstsq(modes.T, first[0][0], rcond=None)
    assert np.allclose(modes.T @ coeffs, first[0][0], atol=1e-12)


def test_random_samples_have_finite_ratios(small_problem):
    report = observability_ratio(small_problem.ctx, n_samples=6, seed=1)
    assert len(report.samples) == 6
    assert report.violations == 0
    assert np.isfinite(report.max_ratio)
    assert all(s.lhs > 0.0 for s in report.samples)
    rows = list(report.rows())
    assert [r[0] for r in rows] == list(range(6))


def test_threaded_sampler_matches_serial(small_problem):
    ctx = small_problem.ctx
    serial = observability_ratio(ctx, n_samples=4, seed=2)
    threaded = observability_ratio(ctx, n_samples=4, seed=2, threads=2)
    assert [s.ratio for s in threaded.samples] == [s.ratio for s in serial.samples]


def test_combined_terminal_adjoints_vanish_without_tracking():
    problem = build_problem(small_config(follower=dict(alpha1=0.0, alpha2=0.0)))
    sampler = ObservabilitySampler(problem.ctx)
    sample = sampler.evaluate(0, terminal_samples(problem.grid.x, 1, seed=0)[0])
    assert sample.combined_1 == 0.0 and sample.combined_2 == 0.0


def test_vanishing_observation_is_flagged(small_problem):
    sampler = ObservabilitySampler(small_problem.ctx)
    sampler.weight = np.zeros_like(sampler.weight)
    sample = sampler.evaluate(3, terminal_samples(small_problem.grid.x, 1, seed=0)[0])
    assert sample.violation
    assert sample.ratio == np.inf


@pytest.mark.slow
def test_max_ratio_is_stable_under_refinement():
    ratios = []
    for n_x, n_t in ((64, 128), (128, 256)):
        problem = build_problem(small_config(n_x=n_x, n_t=n_t))
        report = observability_ratio(problem.ctx, n_samples=50, seed=0)
        assert len(report.samples) == 50
        assert report.violations == 0
        assert np.isfinite(report.max_ratio) and report.max_ratio > 0.0
        ratios.append(report.max_ratio)
    assert 0.5 <= ratios[1] / ratios[0] <= 2.0
