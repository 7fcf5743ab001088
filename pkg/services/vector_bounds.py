"""
Concentration bounds for sums of independent random vectors.

Everything here is built around the golden two-point law Z on {-1/phi, phi},
the zero-mean distribution of unit variance with the smallest possible range
(sqrt 5). Each evaluator returns the raw bound and a copy clipped to 1.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import xlogy

from config.settings import MGF_PRESCAN_POINTS, SEARCH_TOL
from services.errors import DomainError, ParameterError, SingularMatrixError, require
from services.expressions import Expr, eval_point, parse
from services.model import InequalityResult
from services.search import minimize_with_prescan

logger = logging.getLogger(__name__)

PHI = (1.0 + math.sqrt(5.0)) / 2.0
SQRT5 = math.sqrt(5.0)

MAX_CONDITION = 1e12
POWER_ITERATIONS = 200
POWER_TOL = 1e-10
ORDER_SLACK = 1e-9


# --------- Golden distribution ---------

@dataclass(frozen=True)
class GoldenDistribution:
    """Z = phi with probability 1/(sqrt5 phi), Z = -1/phi with probability phi/sqrt5"""

    phi: float = PHI
    p_plus: float = 1.0 / (SQRT5 * PHI)
    p_minus: float = PHI / SQRT5
    value_plus: float = PHI
    value_minus: float = -1.0 / PHI

    @property
    def range(self):
        return self.value_plus - self.value_minus

    @property
    def max_abs(self):
        return max(self.value_plus, abs(self.value_minus))

    def moment(self, k):
        return golden_moment(k)

    def sample(self, rng, size):
        """`size` draws of Z from a numpy Generator"""
        plus = rng.random(size) < self.p_plus
        return np.where(plus, self.value_plus, self.value_minus)


def golden_moment(k):
    """E[Z^k] = (phi^(k-1) + (-1)^k phi^(1-k)) / sqrt5"""
    require(int(k) == k and k >= 0, f"k must be a nonnegative integer, got {k}")
    k = int(k)
    sign = 1.0 if k % 2 == 0 else -1.0
    return (PHI ** (k - 1) + sign * PHI ** (1 - k)) / SQRT5


# --------- MGF bound ---------

def _as_mgf(g):
    if isinstance(g, Expr):
        return g
    return parse(str(g), names=("s",))


def mgf_vector_bound(g, tau, eps, n):
    """
    (1/sqrt5^n) inf over t in (0, tau) of
        e^{-n t eps} ([g(phi t)/phi + phi g(-t/phi)]^n + [g(-phi t)/phi + phi g(t/phi)]^n)
    for a moment generating envelope g of the increments, minimized in log space.
    """
    require(tau > 0.0, f"tau must be positive, got {tau}", "TAU_NONPOSITIVE")
    require(eps > 0.0, f"eps must be positive, got {eps}")
    require(int(n) == n and n >= 1, f"n must be a positive integer, got {n}")
    g = _as_mgf(g)
    n = int(n)

    def log_bound(t):
        s = np.array([[PHI * t], [-t / PHI], [-PHI * t], [t / PHI]])
        values = eval_point(g, s)
        if np.any(np.isnan(values)):
            bad = float(s[int(np.argmax(np.isnan(values))), 0])
            raise DomainError(f"g is undefined at s={bad!r}", g)
        first = values[0] / PHI + PHI * values[1]
        second = values[2] / PHI + PHI * values[3]
        if first <= 0.0 or second <= 0.0:
            raise ParameterError(f"g must be positive, got bracket values {first!r}, {second!r}")
        with np.errstate(over="ignore", divide="ignore"):
            spread = np.logaddexp(n * np.log(first), n * np.log(second))
        return float(-n * t * eps + spread - 0.5 * n * math.log(5.0))

    lo, hi = tau * 1e-9, tau * (1.0 - 1e-9)
    t, value = minimize_with_prescan(log_bound, lo, hi, MGF_PRESCAN_POINTS, SEARCH_TOL)
    logger.debug("MGF vector bound minimized at t=%.10g (log bound %.10g)", t, value)
    return InequalityResult.from_rate(value / n, samples=n, zeta=t, epsilon=eps, tau=tau)


# --------- Bounded increments ---------

def iid_bounded_bound(V, n, eps):
    """2 exp(-2 n eps^2 / (5 V)) for ||(1/n) sum X_i|| >= eps and its maximal form"""
    require(V > 0.0, f"V must be positive, got {V}")
    require(int(n) == n and n >= 1, f"n must be a positive integer, got {n}")
    require(eps > 0.0, f"eps must be positive, got {eps}")
    rate = -2.0 * eps * eps / (5.0 * V)
    return InequalityResult.from_bound(
        2.0 * math.exp(n * rate), samples=n, V=V, epsilon=eps,
    )


def variance_proxy_from_radii(radii):
    """V = mean r_i^2 for ||X_i|| <= r_i"""
    radii = np.asarray(radii, dtype=float)
    require(radii.size > 0 and np.all(radii > 0.0), "radii must be positive")
    return float(np.mean(radii ** 2))


def variance_proxy_from_diameters(diameters):
    """V = mean D_i^2 for supports of diameter D_i"""
    diameters = np.asarray(diameters, dtype=float)
    require(diameters.size > 0 and np.all(diameters > 0.0), "diameters must be positive")
    return float(np.mean(diameters ** 2))


def martingale_bound(c, eps):
    """2 exp(-2 eps^2 / (5 sum c_k^2)) for ||X_n - X_0|| >= eps with ||X_k - X_k-1|| <= c_k"""
    c = np.asarray(c, dtype=float)
    require(c.size > 0 and np.all(c > 0.0), "increment bounds c_k must be positive")
    n = int(c.size)
    return iid_bounded_bound(float(np.sum(c ** 2)) / n, n, eps / n)


# --------- Componentwise information ---------

def _is_range_mode(items):
    return all(np.ndim(item) == 1 and len(item) == 2 for item in items)


def componentwise_tail(r_or_ranges, sigma2, eps):
    """
    exp(-2 (eps^2 - sigma^2)^2 / denominator) for a vector with independent
    components. Radius mode takes |x_i| <= r_i and a second-moment bound
    sigma2; range mode takes pairs (a_i, b_i) and uses sigma^2 = sum |a_i b_i|.
    """
    items = list(r_or_ranges)
    require(items, "at least one component is required")
    if _is_range_mode(items):
        ranges = np.asarray(items, dtype=float)
        a, b = ranges[:, 0], ranges[:, 1]
        require(np.all(a <= 0.0) and np.all(b >= 0.0) and np.all(b > a),
                "ranges must satisfy a_i <= 0 <= b_i and a_i < b_i")
        sigma2 = float(np.sum(np.abs(a * b)))
        denominator = float(np.sum((b - a) ** 4))
        mode = "range"
    else:
        radii = np.asarray(items, dtype=float)
        require(np.all(radii > 0.0), "radii must be positive")
        require(sigma2 is not None and sigma2 >= 0.0, f"sigma2 must be nonnegative, got {sigma2}")
        denominator = float(np.sum(radii ** 4))
        mode = "radius"
    if not eps > math.sqrt(sigma2):
        raise ParameterError(f"eps={eps} must exceed sigma={math.sqrt(sigma2):.6g}", "EPS_NOT_ABOVE_SIGMA")
    rate = -2.0 * (eps * eps - sigma2) ** 2 / denominator
    return InequalityResult.from_rate(rate, epsilon=eps, sigma2=sigma2, denominator=denominator, mode=mode)


# --------- Variance and range ---------

@dataclass(frozen=True)
class VarianceRangeResult:
    """Bounds from tightest (tier1) to loosest (tier3)"""

    zero_probability: bool
    tier1: float
    tier2: float
    tier2_relaxed: float
    tier3: float
    zeta: Optional[float] = None

    @property
    def bound(self):
        return self.tier1

    @property
    def clipped_bound(self):
        return min(1.0, self.tier1)

    @property
    def tiers(self):
        return self.tier1, self.tier2, self.tier2_relaxed, self.tier3

    def to_dict(self):
        return {
            "zero_probability": self.zero_probability,
            "bound": self.bound,
            "clipped_bound": self.clipped_bound,
            "tier1": self.tier1,
            "tier2": self.tier2,
            "tier2_relaxed": self.tier2_relaxed,
            "tier3": self.tier3,
            "zeta": self.zeta,
        }


def _log_two_point(t, low_weight, low_value, high_value):
    """ln E[e^{tY}] for Y in {low_value, high_value} with Pr{Y = low_value} = low_weight"""
    return float(np.logaddexp(math.log(low_weight) + t * low_value, math.log1p(-low_weight) + t * high_value))


def variance_range_bound(sigma, r, n, eps):
    """
    Pr{max_l ||X_1 + ... + X_l|| >= n eps} for zero-mean vectors with
    sum E||X_i||^2 <= n sigma^2 and ||X_i|| <= r. Zero beyond eps > r.
    """
    require(sigma >= 0.0, f"sigma must be nonnegative, got {sigma}")
    require(r > 0.0, f"r must be positive, got {r}")
    require(int(n) == n and n >= 1, f"n must be a positive integer, got {n}")
    require(eps > 0.0, f"eps must be positive, got {eps}")
    n = int(n)
    if eps > r:
        return VarianceRangeResult(True, 0.0, 0.0, 0.0, 0.0)

    s2 = sigma * sigma
    big = PHI * r
    tier3 = 2.0 * math.exp(-n * eps * eps / (2.0 * (s2 + big * eps / 3.0)))
    if s2 == 0.0:
        return VarianceRangeResult(False, 0.0, 0.0, 0.0, tier3)

    head = xlogy(s2 + big * eps, s2 / (s2 + big * eps))
    tier2 = 2.0 * math.exp(n / (s2 + big * big) * (head - xlogy(big * (big - eps), 1.0 - eps / big)))
    tier2_relaxed = 2.0 * math.exp(n / (big * big) * (head + big * eps))

    # Two-point laws with variance s2 and maxima phi r and r / phi
    outer = (big * big / (s2 + big * big), -s2 / big, big)
    inner_weight = r * r / (r * r + PHI * PHI * s2)
    inner = (inner_weight, -PHI * s2 / r, r / PHI)

    def log_objective(t):
        return -n * t * eps + float(np.logaddexp(n * _log_two_point(t, *outer), n * _log_two_point(t, *inner)))

    weight = s2 / (s2 + big * big)
    t_hi = 2.0 * (math.log(2.0) / n - math.log(weight)) / (big - eps)
    t, value = minimize_with_prescan(log_objective, 0.0, t_hi, MGF_PRESCAN_POINTS, SEARCH_TOL)
    bennett_t = (big / (s2 + big * big)) * math.log((1.0 + eps * big / s2) / (1.0 - eps / big))
    if bennett_t < t_hi and log_objective(bennett_t) < value:
        t, value = bennett_t, log_objective(bennett_t)
    tier1 = math.exp(value)

    tiers = (tier1, tier2, tier2_relaxed, tier3)
    if any(a > b + ORDER_SLACK for a, b in zip(tiers, tiers[1:])):
        logger.warning("Variance-range tiers out of order: %s", tiers)
    return VarianceRangeResult(False, tier1, float(tier2), float(tier2_relaxed), tier3, zeta=t)


def small_deviation_bound(c_n, x):
    """2 exp(-(x^2/2)(1 - x phi c_n / 2)) for max_l ||S_l|| >= x s_n"""
    require(c_n > 0.0, f"c_n must be positive, got {c_n}")
    limit = 1.0 / (PHI * c_n)
    if not 0.0 < x < limit:
        raise ParameterError(f"x={x} outside (0, {limit:.6g})", "X_OUT_OF_RANGE")
    rate = -(x * x / 2.0) * (1.0 - x * PHI * c_n / 2.0)
    return InequalityResult.from_bound(2.0 * math.exp(rate), c_n=c_n, x=x)


# --------- Moment envelopes ---------

@dataclass(frozen=True)
class EllipsoidSpec:
    """Support inside {x : ||A x + b|| <= c}, mean mu"""

    A: np.ndarray
    b: np.ndarray
    c: float
    mu: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.asarray(self.b, dtype=float).reshape(-1)
        mu = np.asarray(self.mu, dtype=float).reshape(-1)
        require(A.shape[0] == A.shape[1] == b.size == mu.size,
                f"A is {A.shape}, b has {b.size} entries, mu has {mu.size}")
        require(self.c >= 0.0, f"c must be nonnegative, got {self.c}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "c", float(self.c))

    @property
    def offset_norm(self):
        return float(np.linalg.norm(self.A @ self.mu + self.b))


def spectral_norm(matrix, iterations=POWER_ITERATIONS, tol=POWER_TOL):
    """Largest singular value by power iteration on M^T M"""
    gram = matrix.T @ matrix
    vector = np.random.default_rng(0).standard_normal(gram.shape[0])
    vector /= np.linalg.norm(vector)
    value = 0.0
    for _ in range(iterations):
        image = gram @ vector
        norm = np.linalg.norm(image)
        if norm == 0.0:
            return 0.0
        vector = image / norm
        previous, value = value, float(vector @ gram @ vector)
        if abs(value - previous) <= tol * value:
            break
    return math.sqrt(value)


def moment_envelope(spec):
    """
    (bound on ||X - mu||, bound on E||X - mu||^2) from a support diameter D
    (a number) or an EllipsoidSpec.
    """
    if not isinstance(spec, EllipsoidSpec):
        diameter = float(spec)
        require(diameter > 0.0, f"diameter must be positive, got {diameter}")
        return diameter, diameter * diameter / 2.0

    condition = np.linalg.cond(spec.A)
    if not np.isfinite(condition) or condition >= MAX_CONDITION:
        raise SingularMatrixError(f"A is singular or ill-conditioned (condition {condition:.3g})")
    offset = spec.offset_norm
    require(offset <= spec.c * (1.0 + 1e-12), f"||A mu + b|| = {offset:.6g} exceeds c = {spec.c}")
    inverse_norm = spectral_norm(np.linalg.inv(spec.A))
    return inverse_norm * (spec.c + offset), inverse_norm * (spec.c * spec.c - offset * offset)
