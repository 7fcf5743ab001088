"""
One-dimensional search helpers: golden-section minimization, derivative-sign
refinement and grid pre-scans. Shared by the Chernoff infimum and the vector
MGF / variance-range minimizations.
"""

import logging
import math

import numpy as np
from scipy.optimize import bisect

from config.settings import SEARCH_TOL

logger = logging.getLogger(__name__)

INV_PHI = (math.sqrt(5) - 1) / 2  # 1 / phi
INV_PHI_SQUARE = (3 - math.sqrt(5)) / 2  # 1 / phi^2


def golden_section(f, a, b, tol=SEARCH_TOL):
    """
    Golden-section search.

    Given a function f with a single local minimum in [a, b], returns a
    sub-interval [c, d] containing the minimizer with d - c <= tol.
    """
    a, b = min(a, b), max(a, b)
    h = b - a
    if h <= tol:
        return a, b

    # Required steps to achieve tolerance
    n = int(math.ceil(math.log(tol / h) / math.log(INV_PHI)))

    c = a + INV_PHI_SQUARE * h
    d = a + INV_PHI * h
    yc = f(c)
    yd = f(d)

    for _ in range(n - 1):
        if yc < yd:
            b = d
            d = c
            yd = yc
            h = INV_PHI * h
            c = a + INV_PHI_SQUARE * h
            yc = f(c)
        else:
            a = c
            c = d
            yc = yd
            h = INV_PHI * h
            d = a + INV_PHI * h
            yd = f(d)

    if yc < yd:
        return a, d
    return c, b


def central_derivative(f, x, lo, hi):
    """Central difference of f at x with the step kept inside [lo, hi]"""
    step = 1e-6 * max(1.0, abs(x))
    step = min(step, 0.5 * (x - lo), 0.5 * (hi - x)) if hi > lo else step
    if step <= 0.0:
        step = 1e-12 * max(1.0, abs(x))
    return (f(x + step) - f(x - step)) / (2.0 * step)


def minimize_convex(f, a, b, tol=SEARCH_TOL):
    """
    Minimize a convex f on [a, b]: golden-section first, then bisection on the
    sign of the central-difference derivative around the golden-section
    estimate. Returns (argmin, min).
    """
    c, d = golden_section(f, a, b, tol)
    x = 0.5 * (c + d)
    width = max(d - c, 1e-6 * (b - a))
    lo, hi = max(a, x - width), min(b, x + width)

    def derivative(s):
        return central_derivative(f, s, a, b)

    try:
        d_lo, d_hi = derivative(lo), derivative(hi)
        if d_lo < 0.0 < d_hi:
            x = bisect(derivative, lo, hi, xtol=tol, maxiter=200)
    except (ValueError, ZeroDivisionError, OverflowError) as error:
        logger.debug("Derivative refinement skipped at %r: %s", x, error)
    candidates = [(f(x), x), (f(a), a), (f(b), b)]
    value, x = min(candidates)
    return x, value


def grid_scan(f, a, b, points):
    """Evaluate f on `points` interior grid points; returns (xs, values)"""
    xs = np.linspace(a, b, points + 2)[1:-1]
    return xs, np.array([f(x) for x in xs])


def minimize_with_prescan(f, a, b, points, tol=SEARCH_TOL):
    """
    minimize_convex guarded by a grid pre-scan: when the grid beats the
    golden-section answer by more than 1e-9, search again around the best grid
    point.
    """
    x, value = minimize_convex(f, a, b, tol)
    xs, values = grid_scan(f, a, b, points)
    best = int(np.argmin(values))
    if values[best] < value - 1e-9:
        logger.debug("Grid pre-scan beat golden-section (%r < %r); refining locally", values[best], value)
        spacing = (b - a) / (points + 1)
        x, value = minimize_convex(f, max(a, xs[best] - spacing), min(b, xs[best] + spacing), tol)
    return x, value
