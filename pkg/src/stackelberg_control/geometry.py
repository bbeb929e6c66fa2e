"""
Degenerate diffusion coefficient, moving interval geometry and the
coefficients of the problem pulled back to the unit cylinder.

A point x' of Omega_t = (0, ell(t)) is sent to x = x'/ell(t) in (0, 1). The
transformed equation carries the time scaling b(t) = a(ell)/ell^2 in front of
the diffusion and the transport speed ell'(t) x / ell(t).
"""
from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple, Union

import numpy as np

from .errors import DomainError

ArrayLike = Union[float, np.ndarray]

# Relative slack when checking t in [0, T] and x' in [0, ell(t)]
_EDGE_TOL = 1e-12


@dataclass(frozen=True)
class DegenerateDiffusion:
    """Power-law coefficient a(x) = x**alpha, weakly degenerate at x = 0"""

    alpha: float
    K: Optional[float] = None

    def __post_init__(self):
        if not np.isfinite(self.alpha) or self.alpha <= 0.0:
            raise DomainError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.alpha >= 1.0:
            raise DomainError(f"alpha = {self.alpha}: strongly degenerate unsupported (need alpha < 1)")
        if self.K is None:
            object.__setattr__(self, "K", float(self.alpha))
        if not 0.0 < self.K <= 1.0:
            raise DomainError(f"K must lie in (0, 1], got {self.K}")


def eval_a(diff: DegenerateDiffusion, x: ArrayLike) -> ArrayLike:
    """
    Evaluate a(x) = x**alpha, extended to [0, inf)

    Args:
        diff: Diffusion coefficient
        x: Point(s), must be >= 0
    """
    xs = np.asarray(x, dtype=float)
    if np.any(xs < 0.0) or np.any(np.isnan(xs)):
        raise DomainError("a(x) is only defined for x >= 0")
    out = np.power(xs, diff.alpha)
    return float(out) if out.ndim == 0 else out


def eval_a_prime(diff: DegenerateDiffusion, x: ArrayLike) -> ArrayLike:
    """a'(x) = alpha x**(alpha-1); +inf at x = 0"""
    xs = np.asarray(x, dtype=float)
    if np.any(xs < 0.0):
        raise DomainError("a'(x) is only defined for x >= 0")
    with np.errstate(divide="ignore"):
        out = diff.alpha * np.power(xs, diff.alpha - 1.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class MovingDomain:
    """Interval (0, ell(t)) on [0, T] with C^1 length ell"""

    T: float
    ell: Callable[[ArrayLike], ArrayLike]
    ell_prime: Callable[[ArrayLike], ArrayLike]
    drift_bound: Optional[float] = None
    family: str = "custom"
    gamma: float = 0.0
    n_check: int = field(default=1001, repr=False)

    def __post_init__(self):
        if not np.isfinite(self.T) or self.T <= 0.0:
            raise DomainError(f"final time T must be positive, got {self.T}")
        ts = np.linspace(0.0, self.T, self.n_check)
        lengths = np.asarray(self.ell(ts), dtype=float) * np.ones_like(ts)
        if np.any(lengths <= 0.0) or not np.all(np.isfinite(lengths)):
            raise DomainError(f"ell(t) must stay positive on [0, {self.T}]")
        if self.drift_bound is None:
            ratio = np.asarray(self.ell_prime(ts), dtype=float) / lengths
            object.__setattr__(self, "drift_bound", float(np.max(ratio)))

    @classmethod
    def constant(cls, T: float, length: float = 1.0) -> "MovingDomain":
        return cls(
            T=T,
            ell=lambda t: length + 0.0 * np.asarray(t, dtype=float),
            ell_prime=lambda t: 0.0 * np.asarray(t, dtype=float),
            drift_bound=0.0,
            family="constant",
        )

    @classmethod
    def linear(cls, T: float, gamma: float, drift_bound: Optional[float] = None) -> "MovingDomain":
        """ell(t) = 1 + gamma t"""
        return cls(
            T=T,
            ell=lambda t: 1.0 + gamma * np.asarray(t, dtype=float),
            ell_prime=lambda t: gamma + 0.0 * np.asarray(t, dtype=float),
            drift_bound=drift_bound,
            family="linear",
            gamma=gamma,
        )

    @classmethod
    def sinusoidal(cls, T: float, gamma: float, drift_bound: Optional[float] = None) -> "MovingDomain":
        """ell(t) = 1 + gamma sin(pi t / T)"""
        w = np.pi / T
        return cls(
            T=T,
            ell=lambda t: 1.0 + gamma * np.sin(w * np.asarray(t, dtype=float)),
            ell_prime=lambda t: gamma * w * np.cos(w * np.asarray(t, dtype=float)),
            drift_bound=drift_bound,
            family="sinusoidal",
            gamma=gamma,
        )

    def check_time(self, t: ArrayLike) -> np.ndarray:
        ts = np.asarray(t, dtype=float)
        slack = _EDGE_TOL * self.T
        if np.any(ts < -slack) or np.any(ts > self.T + slack) or np.any(np.isnan(ts)):
            raise DomainError(f"t must lie in [0, {self.T}]")
        return np.clip(ts, 0.0, self.T)


@dataclass(frozen=True)
class TransformedCoefficients:
    """b(t) = a(ell)/ell^2 and the transport speed ell' x / ell on the unit cylinder"""

    diff: DegenerateDiffusion
    dom: MovingDomain

    @property
    def T(self) -> float:
        return self.dom.T

    def b(self, t: ArrayLike) -> ArrayLike:
        length = np.asarray(self.dom.ell(t), dtype=float)
        out = eval_a(self.diff, length) / length**2
        return float(out) if np.ndim(out) == 0 else out

    def drift_rate(self, t: ArrayLike) -> ArrayLike:
        """ell'(t) / ell(t); drift(x, t) = drift_rate(t) * x"""
        out = np.asarray(self.dom.ell_prime(t), dtype=float) / np.asarray(self.dom.ell(t), dtype=float)
        return float(out) if np.ndim(out) == 0 else out

    def drift(self, x: ArrayLike, t: float) -> ArrayLike:
        # Stored as the product B*sqrt(a); B alone is 0/0 at x = 0
        return self.drift_rate(t) * np.asarray(x, dtype=float)


def eval_b(tc: TransformedCoefficients, t: ArrayLike) -> ArrayLike:
    """b(t) = a(ell(t)) / ell(t)**2 for t in [0, T]"""
    ts = tc.dom.check_time(t)
    out = tc.b(ts)
    return float(out) if np.ndim(out) == 0 else out


def b_bounds(tc: TransformedCoefficients, times: np.ndarray) -> Tuple[float, float]:
    """Lower and upper bounds (m, M) of b over the sample times"""
    values = np.atleast_1d(eval_b(tc, times))
    return float(values.min()), float(values.max())


def map_to_cylinder(dom: MovingDomain, x_prime: ArrayLike, t: float) -> ArrayLike:
    """x = x'/ell(t) for x' in [0, ell(t)]"""
    ts = dom.check_time(t)
    length = float(dom.ell(ts))
    xp = np.asarray(x_prime, dtype=float)
    if np.any(xp < 0.0) or np.any(xp > length * (1.0 + _EDGE_TOL)):
        raise DomainError(f"x' must lie in [0, ell(t)] = [0, {length}]")
    out = xp / length
    return float(out) if out.ndim == 0 else out


def map_from_cylinder(dom: MovingDomain, x: ArrayLike, t: float) -> ArrayLike:
    """x' = x ell(t) for x in [0, 1]"""
    ts = dom.check_time(t)
    length = float(dom.ell(ts))
    xs = np.asarray(x, dtype=float)
    if np.any(xs < 0.0) or np.any(xs > 1.0 + _EDGE_TOL):
        raise DomainError("x must lie in [0, 1]")
    out = xs * length
    return float(out) if out.ndim == 0 else out


def pullback_field(dom: MovingDomain, values: np.ndarray, t: float, n_target: Optional[int] = None) -> np.ndarray:
    """
    Resample a field given on a uniform grid of [0, ell(t)] onto a uniform grid of [0, 1]

    Args:
        dom: Moving domain
        values: Samples at linspace(0, ell(t), len(values))
        t: Time of the slice
        n_target: Target sample count (defaults to len(values))
    """
    src = np.asarray(values, dtype=float)
    if src.ndim != 1 or src.size < 2:
        raise DomainError("field transfer needs at least 2 samples")
    n_target = src.size if n_target is None else n_target
    if n_target < 2:
        raise DomainError("field transfer needs at least 2 target points")
    length = float(dom.ell(dom.check_time(t)))
    x_src = np.linspace(0.0, length, src.size)
    x_phys = np.linspace(0.0, 1.0, n_target) * length
    x_phys[-1] = length
    return np.interp(x_phys, x_src, src)


def pushforward_field(dom: MovingDomain, values: np.ndarray, t: float, n_target: Optional[int] = None) -> np.ndarray:
    """Inverse of pullback_field: uniform grid of [0, 1] onto a uniform grid of [0, ell(t)]"""
    src = np.asarray(values, dtype=float)
    if src.ndim != 1 or src.size < 2:
        raise DomainError("field transfer needs at least 2 samples")
    n_target = src.size if n_target is None else n_target
    if n_target < 2:
        raise DomainError("field transfer needs at least 2 target points")
    length = float(dom.ell(dom.check_time(t)))
    x_src = np.linspace(0.0, 1.0, src.size)
    x_unit = np.linspace(0.0, length, n_target) / length
    x_unit[-1] = 1.0
    return np.interp(x_unit, x_src, src)


@dataclass(frozen=True)
class HypothesisReport:
    """Sampled violations of the structural hypotheses (<= 0 means satisfied)"""

    degeneracy_violation: float
    drift_violation: float
    multiplicativity_residual: float
    b_min: float
    b_max: float

    @property
    def ok(self) -> bool:
        return self.degeneracy_violation <= 1e-12 and self.drift_violation <= 1e-12


def check_hypotheses(diff: DegenerateDiffusion, dom: MovingDomain, n_samples: int = 1001) -> HypothesisReport:
    """
    Sample x a'(x) <= K a(x) on (0, 1] and ell'/ell <= C on [0, T]

    Violations are reported, never raised.
    """
    if n_samples < 2:
        raise DomainError("check_hypotheses needs n_samples >= 2")
    xs = np.linspace(0.0, 1.0, n_samples)[1:]
    deg = xs * eval_a_prime(diff, xs) - diff.K * eval_a(diff, xs)

    ts = np.linspace(0.0, dom.T, n_samples)
    ratio = np.asarray(dom.ell_prime(ts), dtype=float) / np.asarray(dom.ell(ts), dtype=float)
    drift = ratio - dom.drift_bound

    # a(xy) = a(x)a(y) on a tensor sample of [0, 1]
    grid = np.linspace(0.0, 1.0, min(n_samples, 101))
    prod = eval_a(diff, np.outer(grid, grid))
    sep = np.outer(eval_a(diff, grid), eval_a(diff, grid))
    mult = np.max(np.abs(prod - sep) / (1.0 + sep))

    tc = TransformedCoefficients(diff, dom)
    b_min, b_max = b_bounds(tc, ts)
    return HypothesisReport(
        degeneracy_violation=float(np.max(deg)),
        drift_violation=float(np.max(drift)),
        multiplicativity_residual=float(mult),
        b_min=b_min,
        b_max=b_max,
    )


def h1a_norm(values: np.ndarray, dx: float, diff: DegenerateDiffusion) -> float:
    """
    Weighted H^1 norm (int u^2 + int a u_x^2)^(1/2) of interior samples with zero traces
    """
    u = np.concatenate(([0.0], np.asarray(values, dtype=float), [0.0]))
    half = (np.arange(u.size - 1) + 0.5) * dx
    grad = np.diff(u) / dx
    energy = dx * np.sum(u**2) + dx * np.sum(eval_a(diff, half) * grad**2)
    return float(np.sqrt(energy))
