import os
from dataclasses import replace

import hypothesis
import numpy as np
import pytest

from stackelberg_control.config import ProblemConfig
from stackelberg_control.problem import build_problem

np.seterr(over="warn", divide="warn", invalid="warn", under="ignore")

hypothesis.settings.register_profile("fast", max_examples=5, deadline=None)
hypothesis.settings.register_profile("ci", max_examples=50, deadline=None)
hypothesis.settings.register_profile("debugger", report_multiple_bugs=False)
hypothesis.settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "fast"))


def small_config(n_x: int = 16, n_t: int = 32, **sections) -> ProblemConfig:
    """Default config on a small grid; keyword arguments replace fields section by section"""
    cfg = ProblemConfig()
    cfg = replace(cfg, discretization=replace(cfg.discretization, n_x=n_x, n_t=n_t))
    for name, values in sections.items():
        cfg = replace(cfg, **{name: replace(getattr(cfg, name), **values)})
    return cfg


@pytest.fixture
def small_problem():
    return build_problem(small_config())


@pytest.fixture
def linear_problem():
    """Linear coupling with nonzero targets so the followers act"""
    cfg = small_config(
        coupling=dict(family="linear", c11=0.5, c12=-0.3, c21=0.2, c22=0.4),
        follower=dict(target1_1=0.5, target2_2=-0.4),
        solver=dict(tol_nash=1e-12, max_outer=500),
    )
    return build_problem(cfg)


@pytest.fixture
def sine_problem():
    cfg = small_config(
        coupling=dict(family="bounded-sine"),
        follower=dict(target1_1=0.5, target2_2=-0.4),
        solver=dict(full_newton=True, tol_nash=1e-12, max_outer=500),
    )
    return build_problem(cfg)
