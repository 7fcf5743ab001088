"""
Routh-Hurwitz stability test and the uncertain lead-compensated plant.

The plant's closed loop has characteristic polynomial
s^4 + a1 s^3 + a2 s^2 + a3 s + a4 whose coefficients depend on three
relative parameter errors eta in [-0.16, 0.16]^3. The loop is stable iff
h(eta) = min{a1, a4, a1 a2 - a3, (a1 a2 - a3) a3 - a1^2 a4} > 0, so the
worst-case instability probability is sup Pr{h(eta) <= 0}.
"""

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from config.settings import (ETA_MEAN_RADIUS, ETA_RADIUS,
                             REFERENCE_INSTABILITY_BOUND, REFERENCE_WINDOW)
from services.errors import PolynomialError, require
from services.expressions import parse
from services.model import BoxRegion, MomentProblem, validate_problem

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Polynomial:
    """Real coefficients, highest degree first"""

    coeffs: Tuple[float, ...]

    def __post_init__(self):
        coeffs = tuple(float(c) for c in self.coeffs)
        if not coeffs or coeffs[0] == 0.0:
            raise PolynomialError(f"leading coefficient of {list(coeffs)} is zero")
        require(len(coeffs) >= 2, "polynomial degree must be at least 1")
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def degree(self):
        return len(self.coeffs) - 1

    def roots(self):
        return np.roots(self.coeffs)


@dataclass(frozen=True)
class StabilityReport:
    stable: bool
    margins: Tuple[float, ...]
    margin_min: float
    marginal: bool
    first_column: Tuple[float, ...]

    def to_dict(self):
        return {
            "stable": self.stable,
            "marginal": self.marginal,
            "margins": list(self.margins),
            "margin_min": self.margin_min,
            "first_column": list(self.first_column),
        }


# --------- Routh table ---------

def routh_table(coeffs):
    """
    Rows of the Routh array for a polynomial with positive leading
    coefficient. Construction stops at the first zero pivot, so the last row
    may start with 0.
    """
    n = len(coeffs) - 1
    width = n // 2 + 1
    table = np.zeros((n + 1, width + 1))
    table[0, : len(coeffs[0::2])] = coeffs[0::2]
    table[1, : len(coeffs[1::2])] = coeffs[1::2]
    rows = 2 if n >= 1 else 1
    for j in range(2, n + 1):
        pivot = table[j - 1, 0]
        if pivot == 0.0:
            break
        for i in range(width):
            table[j, i] = (pivot * table[j - 2, i + 1] - table[j - 2, 0] * table[j - 1, i + 1]) / pivot
        rows = j + 1
    return table[:rows, :width]


def _quartic_margins(a0, a1, a2, a3, a4):
    a1, a2, a3, a4 = a1 / a0, a2 / a0, a3 / a0, a4 / a0
    inner = a1 * a2 - a3
    return a1, inner, inner * a3 - a1 * a1 * a4, a4


def routh_stable(p):
    """
    Stable iff every first-column entry of the Routh array is positive. For
    quartics the margins are the four classical Hurwitz conditions instead of
    raw table entries.
    """
    coeffs = np.asarray(p.coeffs, dtype=float)
    if coeffs[0] < 0.0:
        coeffs = -coeffs
    table = routh_table(coeffs)
    first_column = tuple(float(v) for v in table[:, 0])
    complete = len(first_column) == p.degree + 1
    if p.degree == 4:
        margins = tuple(float(v) for v in _quartic_margins(*coeffs))
    else:
        margins = first_column[1:]
    stable = complete and all(m > 0.0 for m in margins) and all(v > 0.0 for v in first_column)
    marginal = not stable and (0.0 in first_column or 0.0 in margins)
    return StabilityReport(
        stable=stable,
        margins=margins,
        margin_min=min(margins) if margins else float(first_column[0]),
        marginal=marginal,
        first_column=first_column,
    )


# --------- Uncertain plant ---------

A1_TEXT = "(20 + 0.2*x2 + 0.3*x3)"
A2_TEXT = "((4 + 0.2*x2)*(6 + 0.3*x3) + 10*(10 + 0.2*x2 + 0.3*x3))"
A3_TEXT = "(10*(4 + 0.2*x2)*(6 + 0.3*x3) + 800*(1 + 0.1*x1))"
A4_TEXT = "(1600*(1 + 0.1*x1))"


def plant_coefficients(eta):
    """(a1, a2, a3, a4); `eta` may be one 3-vector or an array of them"""
    eta = np.asarray(eta, dtype=float)
    e1, e2, e3 = eta[..., 0], eta[..., 1], eta[..., 2]
    pole = 4.0 + 0.2 * e2
    zero = 6.0 + 0.3 * e3
    a1 = 20.0 + 0.2 * e2 + 0.3 * e3
    a2 = pole * zero + 10.0 * (10.0 + 0.2 * e2 + 0.3 * e3)
    a3 = 10.0 * pole * zero + 800.0 * (1.0 + 0.1 * e1)
    a4 = 1600.0 * (1.0 + 0.1 * e1)
    return a1, a2, a3, a4


def plant_margin(eta):
    a1, a2, a3, a4 = plant_coefficients(eta)
    inner = a1 * a2 - a3
    h = np.minimum(np.minimum(a1, a4), np.minimum(inner, inner * a3 - a1 * a1 * a4))
    return float(h) if np.ndim(h) == 0 else h


def stability_event_text():
    inner = f"({A1_TEXT}*{A2_TEXT} - {A3_TEXT})"
    return f"min({A1_TEXT}, {A4_TEXT}, {inner}, {inner}*{A3_TEXT} - {A1_TEXT}^2*{A4_TEXT})"


def build_stability_problem():
    """Instability of the plant as sup Pr{h(eta) <= 0} with |eta_i| <= 0.16 and |E eta_i| <= 0.05"""
    domain = BoxRegion([-ETA_RADIUS] * 3, [ETA_RADIUS] * 3)
    moment_set = BoxRegion([-ETA_MEAN_RADIUS] * 3, [ETA_MEAN_RADIUS] * 3)
    moment_map = [parse(f"x{i}", 3) for i in (1, 2, 3)]
    event = parse(stability_event_text(), 3)
    return validate_problem(MomentProblem(domain, moment_map, moment_set, event))


def compare_with_reference(certificate):
    """Summary of a certified instability bound against the published 0.00031"""
    low, high = REFERENCE_WINDOW
    in_window = low <= certificate.upper <= high
    summary = {
        "reference": REFERENCE_INSTABILITY_BOUND,
        "window": [low, high],
        "certified_upper": certificate.upper,
        "incumbent_lower": certificate.lower,
        "in_window": in_window,
    }
    if not in_window:
        message = f"certified bound {certificate.upper:.6g} lies outside [{low:g}, {high:g}]"
        if certificate.upper == 0.0:
            message += "; h(eta) > 0 over the whole eta box, so the instability event is empty"
        summary["discrepancy"] = message
        logger.info("Stability bound %.6g differs from reference %.6g", certificate.upper, REFERENCE_INSTABILITY_BOUND)
    return summary
