from dataclasses import replace

import pytest
from hypothesis import given
from hypothesis import strategies as st

from stackelberg_control.config import ProblemConfig, emit_config, parse_config
from stackelberg_control.errors import ConfigError

DOCUMENT = """
# two followers on a growing domain
[geometry]
T = 1.0
ell = sinusoidal   # constant | linear | sinusoidal
gamma = 0.3

[coupling]
family = bounded-sine

[regions]
O = 0.3, 0.8

[weights]
lambda = 4.5
alpha_prime = auto
beta_prime = auto

[solver]
full_newton = yes
max_cg = 250
"""


def _errors(text):
    with pytest.raises(ConfigError) as err:
        parse_config(text)
    return err.value.errors


def test_empty_document_gives_defaults():
    assert parse_config("") == ProblemConfig()


def test_document_values_are_read():
    cfg = parse_config(DOCUMENT)
    assert cfg.geometry.ell == "sinusoidal"
    assert cfg.geometry.gamma == 0.3
    assert cfg.coupling.family == "bounded-sine"
    assert cfg.regions.O == (0.3, 0.8)
    assert cfg.weights.lam == 4.5
    assert cfg.weights.alpha_prime is None
    assert cfg.solver.full_newton is True
    assert cfg.solver.max_cg == 250
    assert cfg.discretization.n_x == 64


def test_strongly_degenerate_coefficient_is_rejected():
    errors = _errors("[coefficient]\nalpha = 1.5\n")
    assert len(errors) == 1
    assert errors[0].startswith("line 2: ")
    assert "strongly degenerate unsupported" in errors[0]


def test_observation_region_must_meet_leader_region():
    errors = _errors("[regions]\nO = 0.3, 0.5\nOd = 0.6, 0.7\n")
    assert any("intersect" in e and e.startswith("line 3: ") for e in errors)


def test_every_problem_is_reported_with_its_line():
    text = "\n".join([
        "[geometry]",
        "T = 1.0",
        "T = 2.0",
        "shape = round",
        "[plotting]",
        "dpi = 300",
        "[discretization]",
        "n_x = many",
        "[weights]",
        "n_quad = 8",
        "[regions]",
        "O1 = 0.4",
    ])
    errors = _errors(text)
    assert errors == [
        "line 3: duplicate key 'T' in [geometry]",
        "line 4: unknown key 'shape' in [geometry]",
        "line 5: unknown section [plotting]",
        "line 8: malformed value 'many' for discretization.n_x",
        "line 10: weights.n_quad = 8 must be > 15",
        "line 12: malformed value '0.4' for regions.O1",
    ]


def test_error_message_counts_errors():
    with pytest.raises(ConfigError) as err:
        parse_config("x = 1\n[geometry]\nT = nan\n")
    assert str(err.value).startswith("2 configuration error(s):")
    assert err.value.errors[0] == "line 1: key 'x' outside a known section"


def test_cross_checks_on_weights_and_solver():
    errors = _errors("[weights]\ns = 1e-4\nalpha_prime = 0.5\n[solver]\nomega = 1.5\n")
    assert any("must be >= s0" in e for e in errors)
    assert any("given together" in e for e in errors)
    assert any("omega must lie in (0, 1]" in e for e in errors)


def test_gamma_is_bounded_for_moving_domains():
    errors = _errors("[geometry]\nell = linear\ngamma = -1.0\n")
    assert errors == ["line 3: |gamma| must be < 1 so that ell stays positive"]
    assert parse_config("[geometry]\nell = constant\ngamma = -1.0\n").geometry.gamma == -1.0


def test_emitted_defaults_parse_back():
    assert parse_config(emit_config(ProblemConfig())) == ProblemConfig()


@given(
    mu=st.floats(min_value=1e-3, max_value=1e4),
    gamma=st.floats(min_value=-0.9, max_value=0.9),
    n_x=st.integers(min_value=2, max_value=512),
    profile=st.sampled_from(["zero", "sine", "bump"]),
    values=st.lists(st.floats(min_value=0.1, max_value=1e3), max_size=4),
)
def test_emitted_config_parses_back(mu, gamma, n_x, profile, values):
    cfg = ProblemConfig()
    cfg = replace(
        cfg,
        geometry=replace(cfg.geometry, gamma=gamma),
        follower=replace(cfg.follower, mu2=mu),
        initial=replace(cfg.initial, profile=profile),
        discretization=replace(cfg.discretization, n_x=n_x),
        sweep=replace(cfg.sweep, values=tuple(values)),
    )
    assert parse_config(emit_config(cfg)) == cfg


def test_with_value_replaces_one_key():
    cfg = ProblemConfig()
    grid = cfg.with_value("discretization.n_x", 32.0)
    assert grid.discretization.n_x == 32
    assert isinstance(grid.discretization.n_x, int)
    assert cfg.with_value("follower.mu1", 1000.0).follower.mu1 == 1000.0
    assert cfg.with_value("regions.O", "0.2, 0.9").regions.O == (0.2, 0.9)
    assert cfg.with_value("solver.full_newton", True).solver.full_newton is True


def test_with_value_validates():
    cfg = ProblemConfig()
    with pytest.raises(ConfigError):
        cfg.with_value("follower.mu3", 1.0)
    with pytest.raises(ConfigError):
        cfg.with_value("coefficient.alpha", 2.0)


def test_unknown_sweep_parameter():
    errors = _errors("[sweep]\nparameter = follower.nu\n")
    assert errors == ["line 2: sweep.parameter 'follower.nu' is not a known section.key"]
