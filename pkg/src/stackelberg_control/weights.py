"""
Carleman and control weights.

Everything exponential is carried in log space: the weights span hundreds of
orders of magnitude over a unit horizon and are exponentiated only for
reporting. The x-dependence of every weight enters through eta(x), so its
extrema are located once on a dense sample of Psi and cached.
"""
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from numpy.polynomial import Polynomial
from numpy.polynomial.legendre import leggauss

from .errors import DomainError
from .geometry import DegenerateDiffusion
from .utils.logger import get_logger

logger = get_logger(__name__)

# Dense x-sample used to locate the extrema of Psi
_N_PSI_SAMPLES = 4001


@dataclass(frozen=True)
class CarlemanParameters:
    """Carleman scale s, shape scale lam and the inner window (alpha', beta')"""

    s: float
    lam: float
    alpha_prime: float
    beta_prime: float
    s0: float = 1e-3

    def __post_init__(self):
        if not self.s > 0.0 or not self.lam > 0.0:
            raise DomainError(f"s and lambda must be positive, got s={self.s}, lambda={self.lam}")
        if self.s < self.s0:
            raise DomainError(f"s = {self.s} is below s0 = {self.s0}")
        if not 0.0 < self.alpha_prime < self.beta_prime < 1.0:
            raise DomainError(
                f"inner window needs 0 < alpha' < beta' < 1, got ({self.alpha_prime}, {self.beta_prime})"
            )

    def with_lambda(self, lam: float) -> "CarlemanParameters":
        return CarlemanParameters(self.s, lam, self.alpha_prime, self.beta_prime, self.s0)


class PsiFunction:
    """
    Psi(x) = int_0^x s/a(s) ds left of alpha', -int_{beta'}^x s/a(s) ds right of beta',
    joined by a quintic that matches value, slope and curvature at both ends.
    """

    def __init__(self, alpha: float, alpha_prime: float, beta_prime: float, n_quad: int = 32):
        self.alpha = alpha
        self.alpha_prime = alpha_prime
        self.beta_prime = beta_prime
        self.width = beta_prime - alpha_prime
        self.bridge = self._build_bridge()

        xs = np.linspace(0.0, 1.0, _N_PSI_SAMPLES)
        values = self(xs)
        self.psi_max = float(values.max())
        self.psi_min = float(values.min())
        self.psi_inf = float(max(abs(self.psi_max), abs(self.psi_min)))
        self.quadrature_gap = self._quadrature_gap(n_quad)

    # closed-form antiderivative of s^(1-alpha)
    def _left(self, x, order=0):
        p = 2.0 - self.alpha
        if order == 0:
            return np.power(x, p) / p
        if order == 1:
            return np.power(x, 1.0 - self.alpha)
        with np.errstate(divide="ignore"):
            return (1.0 - self.alpha) * np.power(x, -self.alpha)

    def _right(self, x, order=0):
        p = 2.0 - self.alpha
        if order == 0:
            return -(np.power(x, p) - self.beta_prime**p) / p
        return -self._left(x, order)

    def _build_bridge(self) -> Polynomial:
        L = self.width
        a0, b1 = self.alpha_prime, self.beta_prime
        c0 = self._left(a0, 0)
        c1 = L * self._left(a0, 1)
        c2 = 0.5 * L**2 * self._left(a0, 2)
        v1 = self._right(b1, 0)
        d1 = L * self._right(b1, 1)
        s1 = L**2 * self._right(b1, 2)
        lhs = np.array([[1.0, 1.0, 1.0], [3.0, 4.0, 5.0], [6.0, 12.0, 20.0]])
        rhs = np.array([v1 - c0 - c1 - c2, d1 - c1 - 2.0 * c2, s1 - 2.0 * c2])
        c3, c4, c5 = np.linalg.solve(lhs, rhs)
        return Polynomial([c0, c1, c2, c3, c4, c5])

    def _quadrature_gap(self, n_quad: int) -> float:
        """|Gauss-Legendre - closed form| for int_0^alpha' s/a(s) ds"""
        nodes, wts = leggauss(n_quad)
        half = 0.5 * self.alpha_prime
        s = half * (nodes + 1.0)
        numeric = half * np.sum(wts * np.power(s, 1.0 - self.alpha))
        return float(abs(numeric - self._left(self.alpha_prime, 0)))

    def derivative(self, x, order: int = 0):
        xs = np.asarray(x, dtype=float)
        out = np.empty_like(xs)
        left = xs < self.alpha_prime
        right = xs >= self.beta_prime
        mid = ~(left | right)
        out[left] = self._left(xs[left], order)
        out[right] = self._right(xs[right], order)
        u = (xs[mid] - self.alpha_prime) / self.width
        out[mid] = self.bridge.deriv(order)(u) / self.width**order if order else self.bridge(u)
        return float(out) if out.ndim == 0 else out

    def __call__(self, x):
        return self.derivative(x, 0)


def build_psi(diff: DegenerateDiffusion, params: CarlemanParameters, n_quad: int = 32) -> PsiFunction:
    """
    Build Psi for the given coefficient and inner window

    Args:
        diff: Diffusion coefficient (alpha < 1 so that s/a(s) is integrable at 0)
        params: Carleman parameters carrying (alpha', beta')
        n_quad: Gauss-Legendre nodes for the quadrature cross-check
    """
    if diff.alpha >= 1.0:
        raise DomainError("strongly degenerate coefficients (alpha >= 1) are unsupported")
    if n_quad < 16:
        raise DomainError(f"n_quad must be at least 16, got {n_quad}")
    return PsiFunction(diff.alpha, params.alpha_prime, params.beta_prime, n_quad)


def _smooth_step(u: np.ndarray) -> np.ndarray:
    """C-infinity step: 0 for u <= 0, 1 for u >= 1"""
    u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        f = np.where(u > 0.0, np.exp(-1.0 / np.where(u > 0.0, u, 1.0)), 0.0)
        g = np.where(u < 1.0, np.exp(-1.0 / np.where(u < 1.0, 1.0 - u, 1.0)), 0.0)
    return f / (f + g)


@dataclass(frozen=True)
class WeightValues:
    theta: np.ndarray
    sigma: np.ndarray
    phi: np.ndarray
    zeta: np.ndarray
    A: np.ndarray
    exp_2s_phi: np.ndarray


class WeightFamily:
    """theta, eta, sigma, phi and the non-vanishing family m, tau, zeta, A"""

    def __init__(self, psi: PsiFunction, params: CarlemanParameters, T: float):
        self.psi = psi
        self.params = params
        self.T = T
        lam = params.lam
        self.lam = lam
        self.log_e_max = lam * (psi.psi_inf + psi.psi_max)
        self.log_e_min = lam * (psi.psi_inf + psi.psi_min)
        self.e_max = np.exp(self.log_e_max)
        self.e_min = np.exp(self.log_e_min)
        self.e3 = np.exp(3.0 * lam * psi.psi_inf)
        self.m0 = (T / 2.0) ** 8 / 16.0

    def _times(self, t) -> np.ndarray:
        ts = np.asarray(t, dtype=float)
        if np.any(ts < 0.0) or np.any(ts > self.T) or np.any(np.isnan(ts)):
            raise DomainError(f"t must lie in [0, {self.T}]")
        return ts

    def theta(self, t):
        ts = self._times(t)
        with np.errstate(divide="ignore"):
            return 1.0 / (ts**4 * (self.T - ts) ** 4)

    def eta(self, x):
        return np.exp(self.lam * (self.psi.psi_inf + self.psi(np.asarray(x, dtype=float))))

    def sigma(self, x, t):
        return self.theta(t) * self.eta(x)

    def phi(self, x, t):
        return self.theta(t) * (self.eta(x) - self.e3)

    def m(self, t):
        ts = self._times(t)
        bump = _smooth_step((self.T / 2.0 - ts) / (self.T / 4.0))
        return ts**4 * (self.T - ts) ** 4 + self.m0 * bump

    def tau(self, t):
        with np.errstate(divide="ignore"):
            return 1.0 / self.m(t)

    def log_tau(self, t):
        with np.errstate(divide="ignore"):
            return -np.log(self.m(t))

    def zeta(self, x, t):
        return self.tau(t) * self.eta(x)

    def A(self, x, t):
        return self.tau(t) * (self.eta(x) - self.e3)

    def A_star(self, t):
        return self.tau(t) * (self.e_max - self.e3)

    def A_hat(self, t):
        return self.tau(t) * (self.e_min - self.e3)

    def zeta_star(self, t):
        return self.tau(t) * self.e_max

    def zeta_hat(self, t):
        return self.tau(t) * self.e_min

    def log_zeta_star(self, t):
        return self.log_tau(t) + self.log_e_max

    def log_zeta_hat(self, t):
        return self.log_tau(t) + self.log_e_min

    def phi_hat(self, t):
        """min over x of phi(x, t)"""
        return self.theta(t) * (self.e_min - self.e3)


def build_weights(psi: PsiFunction, params: CarlemanParameters, T: float) -> WeightFamily:
    return WeightFamily(psi, params, T)


def eval_weights(w: WeightFamily, x, t, s: Optional[float] = None) -> WeightValues:
    """
    Pointwise weights at (x, t)

    At t in {0, T} theta is +inf and e^{2 s phi} is 0.
    """
    s = w.params.s if s is None else s
    ts = w._times(t)
    xs = np.asarray(x, dtype=float)
    theta = w.theta(ts)
    eta = w.eta(xs)
    with np.errstate(invalid="ignore", over="ignore"):
        sigma = theta * eta
        phi = theta * (eta - w.e3)
        exp_2s_phi = np.exp(2.0 * s * phi)
    return WeightValues(
        theta=theta,
        sigma=sigma,
        phi=phi,
        zeta=w.zeta(xs, ts),
        A=w.A(xs, ts),
        exp_2s_phi=exp_2s_phi,
    )


class RhoFamily:
    """rho_0, rho_1, rho_2, rho_hat and the follower weight rho_*, all in log form"""

    def __init__(self, weights: WeightFamily, s: Optional[float] = None):
        self.weights = weights
        self.s = weights.params.s if s is None else s

    def _base(self, t):
        return -self.s * self.weights.A_star(t)

    def log_rho0(self, t):
        return self._base(t) - 7.0 * self.weights.log_zeta_star(t)

    def log_rho1(self, t):
        return self._base(t) - 14.0 * self.weights.log_zeta_star(t)

    def log_rho2(self, t):
        return 1.5 * self._base(t) - self.weights.log_zeta_hat(t)

    def log_rho_hat(self, t):
        return self._base(t) - 10.5 * self.weights.log_zeta_star(t)

    def log_rho_star(self, t):
        return -0.5 * self.s * self.weights.phi_hat(t)

    def rho_star_inv_sq(self, t):
        """rho_*^{-2} = e^{s phi_hat}, at most 1"""
        with np.errstate(invalid="ignore"):
            return np.exp(self.s * self.weights.phi_hat(t))

    def rho_star_sq(self, t):
        with np.errstate(over="ignore"):
            return np.exp(-self.s * self.weights.phi_hat(t))

    def rho(self, name: str, t):
        with np.errstate(over="ignore", under="ignore"):
            return np.exp(getattr(self, f"log_{name}")(t))


def truncated_time_grid(T: float, n_t: int, delta_frac: float) -> np.ndarray:
    """Uniform grid on [delta_frac T, (1 - delta_frac) T]"""
    if not 0.0 < delta_frac < 0.1:
        raise DomainError(f"delta_frac must lie in (0, 0.1), got {delta_frac}")
    if n_t < 2:
        raise DomainError("truncated grid needs at least 2 points")
    return np.linspace(delta_frac * T, (1.0 - delta_frac) * T, n_t)


def clamp_to_window(times, T: float, delta_frac: float) -> np.ndarray:
    """Clamp solver times into the truncated window where theta-based weights are finite"""
    return np.clip(np.asarray(times, dtype=float), delta_frac * T, (1.0 - delta_frac) * T)


@dataclass
class OrderingReport:
    """Weight identities and orderings sampled over a time grid"""

    times: np.ndarray
    A_star: np.ndarray
    A_hat: np.ndarray
    margin: np.ndarray
    rho0: np.ndarray
    rho1: np.ndarray
    rho2: np.ndarray
    rho_hat: np.ndarray
    identity_residual: np.ndarray
    star_bound_excess: float
    constants: Dict[str, float] = field(default_factory=dict)
    log10_constants: Dict[str, float] = field(default_factory=dict)
    failures: List[Tuple[float, str]] = field(default_factory=list)

    @property
    def max_identity_residual(self) -> float:
        return float(np.max(self.identity_residual))

    @property
    def min_margin(self) -> float:
        return float(np.min(self.margin))

    @property
    def ok(self) -> bool:
        return not self.failures

    def rows(self):
        for i, t in enumerate(self.times):
            yield (
                t, self.A_star[i], self.A_hat[i], self.margin[i], self.rho0[i],
                self.rho1[i], self.rho2[i], self.rho_hat[i], self.identity_residual[i],
            )


ORDERING_HEADER = ["t", "A_star", "A_hat", "margin", "rho0", "rho1", "rho2", "rho_hat", "identity_residual"]


def verify_orderings(rho: RhoFamily, w: WeightFamily, time_grid: np.ndarray, n_x: int = 257) -> OrderingReport:
    """
    Check rho_hat^2 = rho_0 rho_1, 3A* < 2A_hat < 0, rho_*^{-2} <= e^{s phi} and the
    empirical constants of rho_1 <= C rho_hat <= C rho_0 <= C rho_2, rho_2 <= C rho_1^2
    """
    ts = np.asarray(time_grid, dtype=float)
    a_star = w.A_star(ts)
    a_hat = w.A_hat(ts)
    margin = 2.0 * a_hat - 3.0 * a_star

    lr0, lr1, lr2, lrh = rho.log_rho0(ts), rho.log_rho1(ts), rho.log_rho2(ts), rho.log_rho_hat(ts)
    # |rho_hat^2 - rho_0 rho_1| / rho_hat^2
    identity_residual = np.abs(np.expm1(lr0 + lr1 - 2.0 * lrh))
    # rounding of the four logs themselves
    identity_tol = 1e-12 + 8.0 * np.finfo(float).eps * (np.abs(lr0) + np.abs(lr1) + 2.0 * np.abs(lrh))
    log_ratios = {
        "rho1_le_C_rho_hat": np.max(lr1 - lrh),
        "rho_hat_le_C_rho0": np.max(lrh - lr0),
        "rho0_le_C_rho2": np.max(lr0 - lr2),
        "rho2_le_C_rho1_sq": np.max(lr2 - 2.0 * lr1),
    }
    with np.errstate(over="ignore"):
        constants = {k: float(np.exp(v)) for k, v in log_ratios.items()}
    log10_constants = {k: float(v / np.log(10.0)) for k, v in log_ratios.items()}

    # rho_*^{-2} e^{-s phi(x, t)} <= 1 on the space-time sample
    xs = np.linspace(0.0, 1.0, n_x)
    phi = np.outer(w.theta(ts), w.eta(xs) - w.e3)
    excess = rho.s * (w.phi_hat(ts)[:, None] - phi)
    star_bound_excess = float(np.max(np.expm1(excess)))

    failures = []
    for t, r, tol in zip(ts, identity_residual, identity_tol):
        if r > tol:
            failures.append((float(t), f"identity residual {r:.3e}"))
    for t, g in zip(ts, margin):
        if not g > 0.0:
            failures.append((float(t), f"ordering margin {g:.3e} <= 0"))
    if star_bound_excess > 1e-12:
        failures.append((float("nan"), f"rho_* bound exceeded by {star_bound_excess:.3e}"))

    return OrderingReport(
        times=ts,
        A_star=a_star,
        A_hat=a_hat,
        margin=margin,
        rho0=rho.rho("rho0", ts),
        rho1=rho.rho("rho1", ts),
        rho2=rho.rho("rho2", ts),
        rho_hat=rho.rho("rho_hat", ts),
        identity_residual=identity_residual,
        star_bound_excess=star_bound_excess,
        constants=constants,
        log10_constants=log10_constants,
        failures=failures,
    )


def scan_lambda(
    psi: PsiFunction,
    params: CarlemanParameters,
    T: float,
    time_grid: np.ndarray,
    start: float = 1.0,
    step: float = 0.25,
    cap: float = 50.0,
) -> float:
    """Smallest lambda on the scan start, start+step, ... with 2A_hat - 3A* > 0 on the grid"""
    lam = start
    while lam <= cap:
        w = WeightFamily(psi, params.with_lambda(lam), T)
        margin = 2.0 * w.A_hat(time_grid) - 3.0 * w.A_star(time_grid)
        if np.all(margin > 0.0):
            logger.info("lambda scan: margin positive at lambda0 = %.2f", lam)
            return lam
        lam += step
    raise DomainError(f"no lambda <= {cap} makes 2A_hat - 3A* positive")


def carleman_log_weight(w: WeightFamily, s: float, exponent: float, x, t) -> np.ndarray:
    """log of e^{2sA}(s lam zeta)^exponent on the (t, x) tensor grid"""
    xs = np.asarray(x, dtype=float)
    ts = np.asarray(t, dtype=float)
    log_tau = w.log_tau(ts)[:, None]
    log_eta = (w.lam * (w.psi.psi_inf + w.psi(xs)))[None, :]
    A = w.tau(ts)[:, None] * (np.exp(log_eta) - w.e3)
    return 2.0 * s * A + exponent * (np.log(s * w.lam) + log_tau + log_eta)


def normalized_square(log_rho: np.ndarray, cap: float = 1e12) -> np.ndarray:
    """rho^2 from log rho, scaled to unit minimum and capped at `cap`"""
    log_w = 2.0 * np.asarray(log_rho, dtype=float)
    return np.exp(np.minimum(log_w - np.min(log_w), np.log(cap)))


def control_weight(rho: RhoFamily, times, cap: float = 1e12) -> np.ndarray:
    """rho_1^2 normalized to unit minimum over the given times and capped"""
    return normalized_square(rho.log_rho1(np.asarray(times, dtype=float)), cap)
