"""
Problem and result data model shared by every service.
Supports, moment sets and the sub-boxes of branch-and-bound are all
axis-aligned boxes; the event C of a problem is the sublevel set {h <= 0}.
"""

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Tuple, Union

import numpy as np

from config.settings import SCHEMA_VERSION, WITNESS_TOL
from services.errors import ExpressionError, ProblemError
from services.expressions import (Expr, eval_point, max_variable_index, parse,
                                  render)

logger = logging.getLogger(__name__)

INDICATOR_OF_EVENT = "indicator"

CERTIFIED = "CERTIFIED"
HEURISTIC_ONLY = "HEURISTIC_ONLY"


@dataclass(frozen=True)
class BoxRegion:
    """Axis-aligned box [lower, upper]; construction raises ProblemError when empty or mismatched"""

    lower: Tuple[float, ...]
    upper: Tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "lower", tuple(float(v) for v in self.lower))
        object.__setattr__(self, "upper", tuple(float(v) for v in self.upper))
        self.check()

    def check(self, what="box"):
        if len(self.lower) != len(self.upper):
            raise ProblemError(
                f"{what}: lower has {len(self.lower)} entries, upper has {len(self.upper)}",
                "DIM_MISMATCH",
            )
        if not self.lower:
            raise ProblemError(f"{what}: dimension must be at least 1", "DIM_MISMATCH")
        for i, (lo, hi) in enumerate(zip(self.lower, self.upper)):
            if not (math.isfinite(lo) and math.isfinite(hi)):
                raise ProblemError(f"{what}: coordinate {i + 1} is not finite", "EMPTY_BOX")
            if lo > hi:
                raise ProblemError(f"{what}: lower {lo} > upper {hi} at coordinate {i + 1}", "EMPTY_BOX")
        return self

    @property
    def dimension(self):
        return len(self.lower)

    @property
    def widths(self):
        return np.asarray(self.upper) - np.asarray(self.lower)

    @property
    def center(self):
        return 0.5 * (np.asarray(self.lower) + np.asarray(self.upper))

    @property
    def widest_axis(self):
        return int(np.argmax(self.widths))

    def contains(self, x, tol=0.0):
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= np.asarray(self.lower) - tol) and np.all(x <= np.asarray(self.upper) + tol))

    def clip(self, x):
        return np.clip(np.asarray(x, dtype=float), self.lower, self.upper)

    def split(self, axis=None):
        """Bisect along `axis` (the widest one by default)"""
        if axis is None:
            axis = self.widest_axis
        middle = 0.5 * (self.lower[axis] + self.upper[axis])
        left_upper = list(self.upper)
        right_lower = list(self.lower)
        left_upper[axis] = middle
        right_lower[axis] = middle
        return BoxRegion(self.lower, left_upper), BoxRegion(right_lower, self.upper)

    def inflate(self, tol):
        return BoxRegion([v - tol for v in self.lower], [v + tol for v in self.upper])

    def to_dict(self):
        return {"lower": list(self.lower), "upper": list(self.upper)}

    @classmethod
    def from_dict(cls, data):
        try:
            return cls(data["lower"], data["upper"])
        except (KeyError, TypeError, ValueError) as error:
            raise ProblemError(f"malformed box {data!r}: {error}", "BAD_EXPR") from error


@dataclass(frozen=True)
class MomentProblem:
    """
    sup E[g(X)] or sup Pr{X in C} over distributions with support in `domain`
    and E[f(X)] in `moment_set`.
    """

    domain: BoxRegion
    moment_map: Tuple[Expr, ...]
    moment_set: BoxRegion
    event: Optional[Expr] = None
    objective: Union[Expr, str] = INDICATOR_OF_EVENT

    def __post_init__(self):
        object.__setattr__(self, "moment_map", tuple(self.moment_map))

    @property
    def dimension(self):
        return self.domain.dimension

    @property
    def moment_count(self):
        return len(self.moment_map)

    @property
    def is_probability(self):
        return isinstance(self.objective, str) and self.objective == INDICATOR_OF_EVENT

    def moments_at(self, points):
        """k x L matrix of moment functions at L points (rows of `points`)"""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return np.vstack([eval_point(f, points) for f in self.moment_map])


def validate_problem(problem):
    """Returns `problem` unchanged when every invariant holds"""
    problem.domain.check("domain")
    problem.moment_set.check("moment_set")
    if problem.moment_count < 1:
        raise ProblemError("at least one moment function is required", "DIM_MISMATCH")
    if problem.moment_count != problem.moment_set.dimension:
        raise ProblemError(
            f"{problem.moment_count} moment functions but moment_set has dimension "
            f"{problem.moment_set.dimension}",
            "DIM_MISMATCH",
        )
    d = problem.dimension
    expressions = list(problem.moment_map)
    if problem.event is not None:
        expressions.append(problem.event)
    if problem.is_probability:
        if problem.event is None:
            raise ProblemError("an indicator objective needs an event", "BAD_EXPR")
    elif isinstance(problem.objective, Expr):
        expressions.append(problem.objective)
    else:
        raise ProblemError(f"unknown objective {problem.objective!r}", "BAD_EXPR")
    for expr in expressions:
        if max_variable_index(expr) >= d:
            raise ProblemError(f"{render(expr)} references a variable beyond x{d}", "BAD_EXPR")
    return problem


# --------- Serialization ---------

def _parse_field(text, dimension, what):
    if not isinstance(text, str):
        raise ProblemError(f"{what} must be an expression string, got {text!r}", "BAD_EXPR")
    try:
        return parse(text, dimension)
    except ExpressionError as error:
        raise ProblemError(f"{what}: {error}", "BAD_EXPR") from error


def problem_from_dict(data):
    if not isinstance(data, dict):
        raise ProblemError("problem document must be a JSON object", "BAD_EXPR")
    schema = data.get("schema", SCHEMA_VERSION)
    if schema != SCHEMA_VERSION:
        raise ProblemError(f"unsupported schema {schema!r}", "BAD_EXPR")
    try:
        domain = BoxRegion.from_dict(data["domain"])
        moment_set = BoxRegion.from_dict(data["moment_set"])
        moments = data["moments"]
    except KeyError as error:
        raise ProblemError(f"missing field {error}", "BAD_EXPR") from error
    d = domain.dimension
    moment_map = [_parse_field(text, d, f"moments[{i}]") for i, text in enumerate(moments)]
    event = None
    if data.get("event") is not None:
        event = _parse_field(data["event"], d, "event")
    objective = data.get("objective", INDICATOR_OF_EVENT)
    if objective != INDICATOR_OF_EVENT:
        objective = _parse_field(objective, d, "objective")
    return validate_problem(MomentProblem(domain, moment_map, moment_set, event, objective))


def problem_to_dict(problem):
    return {
        "schema": SCHEMA_VERSION,
        "domain": problem.domain.to_dict(),
        "moments": [render(f) for f in problem.moment_map],
        "moment_set": problem.moment_set.to_dict(),
        "event": render(problem.event) if problem.event is not None else None,
        "objective": INDICATOR_OF_EVENT if problem.is_probability else render(problem.objective),
    }


def load_problem(path):
    try:
        with open(path, "r", encoding="utf-8") as handle:
            data = json.load(handle)
    except json.JSONDecodeError as error:
        raise ProblemError(f"{path}: invalid JSON ({error})", "BAD_EXPR") from error
    logger.debug("Loaded problem document %s", path)
    return problem_from_dict(data)


def dump_problem(problem, path):
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(problem_to_dict(problem), handle, indent=2)
        handle.write("\n")


# --------- Results ---------

@dataclass(frozen=True)
class DiscreteDistribution:
    """Finitely supported law: ((location, weight), ...)"""

    points: Tuple[Tuple[Tuple[float, ...], float], ...]

    def __post_init__(self):
        object.__setattr__(
            self,
            "points",
            tuple((tuple(float(v) for v in x), float(w)) for x, w in self.points),
        )

    @classmethod
    def from_arrays(cls, locations, weights, drop_below=0.0):
        locations = np.atleast_2d(np.asarray(locations, dtype=float))
        return cls([(x, w) for x, w in zip(locations, weights) if w > drop_below])

    @classmethod
    def point_mass(cls, location):
        return cls([(location, 1.0)])

    @property
    def locations(self):
        return np.array([x for x, _ in self.points], dtype=float)

    @property
    def weights(self):
        return np.array([w for _, w in self.points], dtype=float)

    @property
    def support_size(self):
        return sum(1 for _, w in self.points if w > 0.0)

    def expectation(self, expr):
        if not self.points:
            return 0.0
        return float(np.dot(self.weights, eval_point(expr, self.locations)))

    def moments(self, problem):
        if not self.points:
            return np.zeros(problem.moment_count)
        return problem.moments_at(self.locations) @ self.weights

    def probability_of_event(self, event):
        if not self.points:
            return 0.0
        inside = eval_point(event, self.locations) <= 0.0
        return float(np.sum(self.weights[inside]))

    def to_dict(self):
        return {"points": [{"x": list(x), "w": w} for x, w in self.points]}


def check_distribution(dist, problem=None, tol=WITNESS_TOL, max_points=None, inside_count=None):
    """
    Assert every DiscreteDistribution invariant (used by tests and as a final
    self-check of solver witnesses). Raises AssertionError with a message.
    With `inside_count` = i, points 1..i must satisfy h <= 0 and the rest h >= 0.
    """
    weights = dist.weights
    assert dist.points, "distribution has no support points"
    assert np.all(weights >= 0.0), f"negative weight in {weights}"
    assert abs(weights.sum() - 1.0) <= 1e-9, f"weights sum to {weights.sum()!r}"
    if problem is None:
        return
    if max_points is None:
        max_points = problem.moment_count + 1
    assert dist.support_size <= max_points, f"{dist.support_size} support points > {max_points}"
    for x, _ in dist.points:
        assert problem.domain.contains(x, tol), f"support point {x} outside the domain"
    moments = dist.moments(problem)
    assert problem.moment_set.contains(moments, tol), f"moments {moments} outside the moment set"
    if inside_count is None or problem.event is None:
        return
    h = eval_point(problem.event, dist.locations)
    inside, outside = h[:inside_count], h[inside_count:]
    assert np.all(inside <= tol), f"points meant inside the event have h = {inside}"
    assert np.all(outside >= -tol), f"points meant outside the event have h = {outside}"


@dataclass(frozen=True)
class BoundCertificate:
    upper: float
    lower: float
    witness: DiscreteDistribution
    iterations: int
    boxes_explored: int
    tolerance_used: float
    status: str
    programs: Tuple[dict, ...] = ()
    notes: Tuple[str, ...] = ()

    @property
    def gap(self):
        return self.upper - self.lower


def _json_number(value):
    # JSON has no infinities; an unavailable bound is null
    return value if math.isfinite(value) else None


def certificate_to_dict(cert):
    return {
        "schema": SCHEMA_VERSION,
        "upper": _json_number(cert.upper),
        "lower": _json_number(cert.lower),
        "status": cert.status,
        "witness": cert.witness.to_dict(),
        "boxes_explored": cert.boxes_explored,
        "iterations": cert.iterations,
        "tolerance_used": cert.tolerance_used,
        "programs": list(cert.programs),
        "notes": list(cert.notes),
    }


@dataclass(frozen=True)
class InequalityResult:
    bound: float
    zeta: Optional[float]
    rate: float
    clipped_bound: float
    samples: float = 1
    details: dict = field(default_factory=dict)

    @classmethod
    def from_rate(cls, rate, samples=1, zeta=None, **details):
        """bound = exp(samples * rate)"""
        bound = math.exp(samples * rate) if samples * rate < 709.0 else math.inf
        return cls(bound, zeta, rate, min(1.0, bound), samples, details)

    @classmethod
    def from_bound(cls, bound, zeta=None, samples=1, **details):
        rate = math.log(bound) / samples if bound > 0.0 else -math.inf
        return cls(bound, zeta, rate, min(1.0, bound), samples, details)

    def to_dict(self):
        return {
            "schema": SCHEMA_VERSION,
            "bound": _json_number(self.bound),
            "clipped_bound": self.clipped_bound,
            "zeta": self.zeta,
            "rate": _json_number(self.rate),
            "samples": self.samples,
            "details": self.details,
        }
