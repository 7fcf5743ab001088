"""
Uniform exponential inequalities for sums of independent variables.

A cumulant bound phi(s) >= ln E[exp(s X)] on (a, b) gives, for
zeta = argmin phi(s) - eps s,

    Pr{ S_n >= m eps + (phi(zeta) / zeta)(n - m) for some n } <= exp(m (phi(zeta) - eps zeta))

The generic engine works on any convex phi given as an expression in `s`;
the Bernoulli, bounded-variance, normal and Poisson cases have closed forms.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import xlogy

from config.settings import CONVEXITY_GRID, CONVEXITY_TOL, SEARCH_TOL
from services.errors import NonConvexError, ParameterError, require
from services.expressions import eval_point, parse
from services.model import InequalityResult
from services.search import central_derivative, minimize_convex

logger = logging.getLogger(__name__)

EDGE_SHRINK = 1e-9  # relative shrink of the cumulant domain edges


@dataclass(frozen=True)
class CumulantSpec:
    """phi(s) in the variable `s` on the open interval (lower, upper)"""

    phi: object
    lower: float
    upper: float

    def __post_init__(self):
        require(math.isfinite(self.lower) and math.isfinite(self.upper), "cumulant domain must be finite")
        require(self.lower <= 0.0 < self.upper, f"cumulant domain ({self.lower}, {self.upper}) must contain (0, b)")

    @classmethod
    def from_text(cls, text, lower, upper):
        return cls(parse(text, names=("s",)), float(lower), float(upper))

    def __call__(self, s):
        return eval_point(self.phi, [s])

    def values(self, s):
        return eval_point(self.phi, np.asarray(s, dtype=float)[:, None])

    @property
    def edges(self):
        shrink = EDGE_SHRINK * (self.upper - self.lower)
        return self.lower + shrink, self.upper - shrink


@dataclass(frozen=True)
class AsymptoticReport:
    epsilon: float
    zeta: float
    rate: float
    gaussian_rate: float
    corrected_rate: float
    ratio_phi_zeta: float
    sigma2: float
    nu: float

    def to_dict(self):
        return dict(self.__dict__)


# --------- Standard cumulants ---------

def _num(value):
    return f"({float(value)!r})"


def bernoulli_cumulant(mu_bar, limit=50.0):
    """ln(mu e^s + 1 - mu)"""
    require(0.0 < mu_bar < 1.0, f"mu_bar must be in (0, 1), got {mu_bar}")
    return CumulantSpec.from_text(f"ln({_num(mu_bar)}*exp(s) + {_num(1.0 - mu_bar)})", -limit, limit)


def bounded_variance_cumulant(b, nu_m, limit=50.0):
    """Bennett: ln((nu e^{s b} + b^2 e^{-s nu / b}) / (b^2 + nu)) for X - E X <= b with variance nu"""
    require(b > 0.0 and nu_m > 0.0, "b and nu_m must be positive")
    edge = limit / max(b, nu_m / b)
    text = (
        f"ln(({_num(nu_m)}*exp({_num(b)}*s) + {_num(b * b)}*exp(-{_num(nu_m / b)}*s)) / {_num(b * b + nu_m)})"
    )
    return CumulantSpec.from_text(text, -edge, edge)


def normal_cumulant(mu_bar, nu_bar, limit=100.0):
    """mu s + nu s^2 / 2"""
    require(nu_bar > 0.0, f"nu_bar must be positive, got {nu_bar}")
    return CumulantSpec.from_text(f"{_num(mu_bar)}*s + {_num(nu_bar / 2.0)}*s^2", -limit, limit)


def poisson_cumulant(lambda_bar, limit=30.0):
    """lambda (e^s - 1)"""
    require(lambda_bar > 0.0, f"lambda_bar must be positive, got {lambda_bar}")
    return CumulantSpec.from_text(f"{_num(lambda_bar)}*(exp(s) - 1)", -limit, limit)


def centered_coin_cumulant(limit=50.0):
    """ln cosh(s/2), the fair coin on {-1/2, +1/2} (sigma^2 = 1/4, nu = 0)"""
    return CumulantSpec.from_text("ln((exp(s/2) + exp(-s/2))/2)", -limit, limit)


# --------- Generic engine ---------

def check_convexity(c):
    """Second differences of phi on a CONVEXITY_GRID-point grid must be >= -tol * scale"""
    lo, hi = c.edges
    grid = np.linspace(lo, hi, CONVEXITY_GRID)
    values = c.values(grid)
    if not np.all(np.isfinite(values)):
        raise ParameterError("phi is not finite on its whole domain", "PARAM_OUT_OF_RANGE")
    second = values[2:] - 2.0 * values[1:-1] + values[:-2]
    scale = max(1.0, float(np.max(np.abs(values))))
    worst = float(np.min(second))
    if worst < -CONVEXITY_TOL * scale:
        raise NonConvexError(f"phi is not convex on ({c.lower}, {c.upper}): second difference {worst:.3g}")


def admissible_range(c):
    """(phi(s)/s at the left edge, phi(s)/s at the right edge); eps must lie strictly between"""
    lo, hi = c.edges
    left = c(lo) / lo if lo < 0.0 else central_derivative(c, lo, lo, hi)
    return left, c(hi) / hi


def _ratio(c, zeta):
    if abs(zeta) < 1e-12:
        lo, hi = c.edges
        return central_derivative(c, 0.0, lo, hi)
    return c(zeta) / zeta


def chernoff_inf(c, eps, m=1):
    """
    inf over s of exp(m (phi(s) - eps s)) by golden-section search refined by
    bisection on the derivative sign. details carry phi(zeta) and phi(zeta)/zeta.
    """
    require(m >= 1, f"m must be at least 1, got {m}")
    check_convexity(c)
    left, right = admissible_range(c)
    if not left < eps < right:
        raise ParameterError(f"eps={eps} outside the admissible range ({left:.6g}, {right:.6g})", "EPS_OUT_OF_RANGE")

    lo, hi = c.edges

    def exponent(s):
        return c(s) - eps * s

    zeta, rate = minimize_convex(exponent, lo, hi, SEARCH_TOL)
    phi_zeta = c(zeta)
    logger.debug("Chernoff infimum at zeta=%.12g, rate=%.12g", zeta, rate)
    return InequalityResult.from_rate(
        rate, samples=m, zeta=zeta,
        epsilon=eps, phi_zeta=phi_zeta, ratio_phi_zeta=_ratio(c, zeta), domain=[c.lower, c.upper],
    )


def chernoff_at(c, eps, s, m=1):
    """[exp(phi(s) - eps s)]^m for a fixed s of the domain"""
    require(c.lower < s < c.upper, f"s={s} outside ({c.lower}, {c.upper})")
    return InequalityResult.from_rate(c(s) - eps * s, samples=m, zeta=s, epsilon=eps, phi_zeta=c(s))


def crossing_boundary(result, theta, m):
    """
    The line m theta + (phi(zeta)/zeta)(n - m) as an expression in `n`;
    exceeding it at some n is the event bounded by `result`.
    """
    require(result.zeta is not None and result.zeta > 0.0, "the crossing boundary needs zeta > 0")
    slope = result.details["ratio_phi_zeta"]
    return parse(f"{_num(m * theta)} + {_num(slope)}*(n - {_num(m)})", names=("n",))


def asymptotic_check(c, sigma2, nu, eps_list):
    """Chernoff exponent against its Gaussian and third-moment-corrected approximations"""
    require(sigma2 > 0.0, f"sigma2 must be positive, got {sigma2}")
    reports = []
    for eps in eps_list:
        result = chernoff_inf(c, eps)
        reports.append(AsymptoticReport(
            epsilon=eps,
            zeta=result.zeta,
            rate=result.rate,
            gaussian_rate=-eps ** 2 / (2.0 * sigma2),
            corrected_rate=-eps ** 2 / (2.0 * sigma2) + nu * eps ** 3 / (6.0 * sigma2 ** 3),
            ratio_phi_zeta=result.details["ratio_phi_zeta"],
            sigma2=sigma2,
            nu=nu,
        ))
    return reports


# --------- Closed forms ---------

def _require_samples(m):
    require(int(m) == m and m >= 1, f"m must be a positive integer, got {m}")


def uniform_bound_bernoulli(mu_bar, theta, m):
    _require_samples(m)
    require(0.0 < mu_bar < 1.0, f"mu_bar must be in (0, 1), got {mu_bar}")
    require(0.0 < theta < 1.0, f"theta must be in (0, 1), got {theta}")
    zeta = math.log(theta * (1.0 - mu_bar) / (mu_bar * (1.0 - theta)))
    rate = theta * math.log(mu_bar / theta) + (1.0 - theta) * math.log((1.0 - mu_bar) / (1.0 - theta))
    phi_zeta = math.log(mu_bar * math.exp(zeta) + 1.0 - mu_bar)
    ratio = phi_zeta / zeta if zeta != 0.0 else mu_bar
    return InequalityResult.from_rate(rate, samples=m, zeta=zeta, phi_zeta=phi_zeta, ratio_phi_zeta=ratio)


def uniform_bound_bounded_variance(b, nu_m, eps, m):
    """Bennett-type bound; at eps = b the factor (1 - eps/b)^0 is taken as 1 and zeta is unbounded"""
    _require_samples(m)
    require(b > 0.0 and nu_m > 0.0, "b and nu_m must be positive")
    require(0.0 < eps <= b, f"eps must be in (0, b], got {eps}")
    total = b * b + nu_m
    rate = -((nu_m + b * eps) / total) * math.log1p(b * eps / nu_m) - xlogy((b * b - b * eps) / total, 1.0 - eps / b)
    if eps == b:
        return InequalityResult.from_rate(float(rate), samples=m, zeta=None)
    zeta = (b / total) * math.log((1.0 + eps * b / nu_m) / (1.0 - eps / b))
    phi_zeta = float(rate) + eps * zeta
    return InequalityResult.from_rate(float(rate), samples=m, zeta=zeta, phi_zeta=phi_zeta, ratio_phi_zeta=phi_zeta / zeta)


def uniform_bound_normal(mu_bar, nu_bar, theta, m):
    _require_samples(m)
    require(nu_bar > 0.0, f"nu_bar must be positive, got {nu_bar}")
    zeta = (theta - mu_bar) / nu_bar
    rate = -((theta - mu_bar) ** 2) / (2.0 * nu_bar)
    ratio = mu_bar + nu_bar * zeta / 2.0
    return InequalityResult.from_rate(rate, samples=m, zeta=zeta, ratio_phi_zeta=ratio)


def uniform_bound_poisson(lambda_bar, theta, m):
    _require_samples(m)
    require(lambda_bar > 0.0, f"lambda_bar must be positive, got {lambda_bar}")
    require(theta > 0.0, f"theta must be positive, got {theta}")
    zeta = math.log(theta / lambda_bar)
    rate = theta - lambda_bar + theta * math.log(lambda_bar / theta)
    ratio = (theta - lambda_bar) / zeta if zeta != 0.0 else lambda_bar
    return InequalityResult.from_rate(rate, samples=m, zeta=zeta, ratio_phi_zeta=ratio)
