import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from stackelberg_control.errors import DomainError
from stackelberg_control.geometry import (
    DegenerateDiffusion,
    MovingDomain,
    TransformedCoefficients,
    b_bounds,
    check_hypotheses,
    eval_a,
    eval_a_prime,
    eval_b,
    h1a_norm,
    map_from_cylinder,
    map_to_cylinder,
    pullback_field,
    pushforward_field,
)


def test_eval_a_power_law():
    diff = DegenerateDiffusion(0.5)
    assert eval_a(diff, 0.0) == 0.0
    assert eval_a(diff, 0.25) == pytest.approx(0.5)
    assert eval_a(diff, 1.0) == 1.0
    # a(xy) = a(x) a(y)
    assert eval_a(diff, 0.5 * 0.5) == pytest.approx(eval_a(diff, 0.5) * eval_a(diff, 0.5), rel=1e-15)


def test_eval_a_rejects_negative_points():
    with pytest.raises(DomainError):
        eval_a(DegenerateDiffusion(0.5), -0.1)


def test_strongly_degenerate_rejected():
    with pytest.raises(DomainError, match="strongly degenerate unsupported"):
        DegenerateDiffusion(1.5)


def test_default_K_is_alpha():
    assert DegenerateDiffusion(0.3).K == 0.3


def test_eval_a_prime_blows_up_at_origin():
    diff = DegenerateDiffusion(0.5)
    assert np.isinf(eval_a_prime(diff, 0.0))
    assert eval_a_prime(diff, 0.25) == pytest.approx(0.5 * 0.25**-0.5)


def test_fixed_domain_has_unit_b_and_no_drift():
    tc = TransformedCoefficients(DegenerateDiffusion(0.5), MovingDomain.constant(1.0))
    ts = np.linspace(0.0, 1.0, 11)
    assert np.all(eval_b(tc, ts) == 1.0)
    assert np.all(tc.drift(np.linspace(0.0, 1.0, 5), 0.3) == 0.0)


def test_linear_domain_b_is_ell_power():
    alpha = 0.5
    dom = MovingDomain.linear(1.0, 0.2)
    tc = TransformedCoefficients(DegenerateDiffusion(alpha), dom)
    ts = np.linspace(0.0, 1.0, 7)
    expected = (1.0 + 0.2 * ts) ** (alpha - 2.0)
    assert np.allclose(eval_b(tc, ts), expected, rtol=1e-14)
    m, M = b_bounds(tc, ts)
    assert m == pytest.approx(1.2 ** (alpha - 2.0))
    assert M == pytest.approx(1.0)


def test_eval_b_outside_horizon():
    tc = TransformedCoefficients(DegenerateDiffusion(0.5), MovingDomain.linear(1.0, 0.2))
    with pytest.raises(DomainError):
        eval_b(tc, 1.5)


def test_domain_must_stay_positive():
    with pytest.raises(DomainError):
        MovingDomain.linear(1.0, -1.5)


@given(x=st.floats(0.0, 1.0), t=st.floats(0.0, 1.0))
def test_cylinder_maps_are_inverse(x, t):
    dom = MovingDomain.sinusoidal(1.0, 0.3)
    x_prime = map_from_cylinder(dom, x, t)
    assert map_to_cylinder(dom, x_prime, t) == pytest.approx(x, abs=1e-14)


def test_map_to_cylinder_rejects_points_outside_domain():
    dom = MovingDomain.linear(1.0, 0.2)
    with pytest.raises(DomainError):
        map_to_cylinder(dom, 1.3, 1.0)


def test_field_transfer_preserves_linear_profiles():
    dom = MovingDomain.linear(1.0, 0.5)
    length = 1.5
    xp = np.linspace(0.0, length, 31)
    unit = pullback_field(dom, 2.0 * xp, 1.0)
    assert np.allclose(unit, 2.0 * length * np.linspace(0.0, 1.0, 31))
    back = pushforward_field(dom, unit, 1.0)
    assert np.allclose(back, 2.0 * xp)


def test_hypotheses_hold_for_power_law():
    report = check_hypotheses(DegenerateDiffusion(0.5), MovingDomain.linear(1.0, 0.2))
    assert report.ok
    assert report.multiplicativity_residual < 1e-14


def test_drift_bound_violation_reported():
    dom = MovingDomain.linear(1.0, 0.2, drift_bound=0.1)
    report = check_hypotheses(DegenerateDiffusion(0.5), dom)
    assert report.drift_violation > 0.0
    assert not report.ok


def test_h1a_norm():
    diff = DegenerateDiffusion(0.5)
    assert h1a_norm(np.zeros(9), 0.1, diff) == 0.0
    x = np.arange(1, 10) * 0.1
    assert h1a_norm(np.sin(np.pi * x), 0.1, diff) > np.sqrt(0.1 * np.sum(np.sin(np.pi * x) ** 2))
