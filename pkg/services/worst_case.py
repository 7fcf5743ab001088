"""
Worst-case expectation and probability bounds over all distributions with
support in a box A and moments E[f(X)] in a box B.

The lower bound comes from a multistart projected-gradient search over k+1
support points with the weight program solved at every iterate. The upper
bound comes from interval branch-and-bound: a partition relaxation of A
followed by Lagrangian dual bounds sup_x (g - lambda.f) + sigma_B(lambda)
for the candidate multipliers found along the way.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import product

import numpy as np
import pybnb
from scipy.stats import qmc

from config.settings import (BNB_MAX_BOXES, BNB_TOL, DEFAULT_SEED,
                             DEFAULT_THREADS, FD_RELATIVE_STEP, GRADIENT_ITERS,
                             GRADIENT_TOL, MULTISTARTS, PROJECTION_BISECTIONS,
                             RELAXATION_MAX_BOXES, ROOT_REFINEMENTS,
                             SEARCH_POOL_SIZE, WITNESS_TOL)
from services.errors import InfeasibleProblemError, ProblemError, require
from services.expressions import (BinOp, Neg, Num, eval_centered,
                                  eval_interval, eval_point)
from services.model import (CERTIFIED, HEURISTIC_ONLY, BoundCertificate,
                            BoxRegion, DiscreteDistribution,
                            check_distribution, validate_problem)
from services.simplex import INFEASIBLE, ThetaLP, solve_lp, solve_relaxed_lp

logger = logging.getLogger(__name__)

INSIDE_C = "INSIDE_C"
OUTSIDE_C = "OUTSIDE_C"
MIXED = "MIXED"


@dataclass(frozen=True)
class SolverSettings:
    multistarts: int = MULTISTARTS
    gradient_iters: int = GRADIENT_ITERS
    gradient_tol: float = GRADIENT_TOL
    bnb_tol: float = BNB_TOL
    bnb_max_boxes: int = BNB_MAX_BOXES
    seed: int = DEFAULT_SEED
    threads: int = DEFAULT_THREADS  # worker count; results do not depend on it
    root_refinements: int = ROOT_REFINEMENTS

    def __post_init__(self):
        for name in ("multistarts", "gradient_iters", "gradient_tol", "bnb_tol", "bnb_max_boxes", "threads"):
            require(getattr(self, name) > 0, f"{name} must be positive, got {getattr(self, name)!r}")
        require(self.root_refinements >= 0, "root_refinements must be nonnegative")
        require(0 <= self.seed < 2 ** 64, f"seed must be a 64-bit unsigned integer, got {self.seed!r}")


def classify_box(event, box):
    """INSIDE_C when h <= 0 on the whole box, OUTSIDE_C when h > 0 on it, else MIXED"""
    enclosure = eval_centered(event, box)
    if enclosure.hi <= 0.0:
        return INSIDE_C
    if enclosure.lo > 0.0:
        return OUTSIDE_C
    return MIXED


# --------- Support-point search (lower bound) ---------

def _gradients(exprs, points):
    """Central-difference gradients of each expression at each point: (n_expr, L, d)"""
    L, d = points.shape
    steps = FD_RELATIVE_STEP * np.maximum(1.0, np.abs(points))
    offsets = np.zeros((L, 2 * d, d))
    for i in range(d):
        offsets[:, 2 * i, i] = steps[:, i]
        offsets[:, 2 * i + 1, i] = -steps[:, i]
    shifted = (points[:, None, :] + offsets).reshape(L * 2 * d, d)
    out = np.empty((len(exprs), L, d))
    for n, expr in enumerate(exprs):
        values = eval_point(expr, shifted).reshape(L, 2 * d)
        out[n] = (values[:, 0::2] - values[:, 1::2]) / (2.0 * steps)
    return out


def _sobol(dimension, count, seed):
    sampler = qmc.Sobol(d=dimension, scramble=True, seed=seed)
    return sampler.random_base2(m=max(0, math.ceil(math.log2(max(count, 1)))))[:count]


class SupportSearch:
    """
    Projected gradient ascent of the weight-program value over the locations
    of k+1 support points. `inside_count` selects the probability program
    with that many points in C (None for expectation problems).
    """

    def __init__(self, problem, settings, inside_count=None):
        self.problem = problem
        self.settings = settings
        self.inside_count = inside_count
        self.size = problem.moment_count + 1
        self.lower = np.asarray(problem.domain.lower)
        self.upper = np.asarray(problem.domain.upper)
        self.widths = problem.domain.widths
        self.virtual_moments = problem.moment_set.center
        if inside_count is None:
            self.exprs = [problem.objective] + list(problem.moment_map)
        else:
            self.exprs = list(problem.moment_map)
            self.costs = np.array([1.0] * inside_count + [0.0] * (self.size - inside_count))

    def objective_at(self, points):
        if self.inside_count is None:
            return eval_point(self.problem.objective, points)
        return self.costs

    def on_side(self, points, rows):
        """Whether each of `points` (support indices `rows`) lies on its side of h"""
        h = eval_point(self.problem.event, points)
        return np.where(rows < self.inside_count, h <= 0.0, h >= 0.0)

    def admissible(self, points):
        if self.inside_count is None:
            return True
        return bool(np.all(self.on_side(points, np.arange(len(points)))))

    def project(self, previous, candidate):
        """
        Pull every support point that crossed to the wrong side of h back along
        its own step to the last admissible location; the others move freely.
        """
        if self.inside_count is None:
            return candidate
        blocked = np.flatnonzero(~self.on_side(candidate, np.arange(len(candidate))))
        if not blocked.size:
            return candidate
        start = previous[blocked]
        move = candidate[blocked] - start
        lo = np.zeros(blocked.size)
        hi = np.ones(blocked.size)
        for _ in range(PROJECTION_BISECTIONS):
            middle = 0.5 * (lo + hi)
            ok = self.on_side(start + middle[:, None] * move, blocked)
            lo = np.where(ok, middle, lo)
            hi = np.where(ok, hi, middle)
        projected = candidate.copy()
        projected[blocked] = start + lo[:, None] * move
        return projected

    def elastic(self, points):
        """Weight program plus a virtual point at the centre of B with a big-M cost, always feasible"""
        c = self.objective_at(points)
        penalty = 10.0 * (1.0 + np.max(np.abs(c)))
        F = self.problem.moments_at(points)
        c_ext = np.append(c, np.min(c) - penalty)
        F_ext = np.hstack([F, self.virtual_moments[:, None]])
        return solve_lp(ThetaLP(c_ext, F_ext, self.problem.moment_set))

    def strict(self, points):
        c = self.objective_at(points)
        return solve_lp(ThetaLP(c, self.problem.moments_at(points), self.problem.moment_set))

    def ascend(self, points):
        solution = self.elastic(points)
        value = solution.value
        alpha = 0.25
        iterations = 0
        while iterations < self.settings.gradient_iters and solution.optimal:
            iterations += 1
            grads = _gradients(self.exprs, points)
            weights = solution.multipliers
            if self.inside_count is None:
                direction = grads[0] - np.tensordot(weights, grads[1:], axes=1)
            else:
                direction = -np.tensordot(weights, grads, axes=1)
            scaled = direction * self.widths
            norm = np.max(np.abs(scaled)) if scaled.size else 0.0
            if not np.isfinite(norm) or norm == 0.0:
                break
            step = scaled / norm * self.widths
            improved = False
            while alpha >= self.settings.gradient_tol:
                candidate = self.project(points, np.clip(points + alpha * step, self.lower, self.upper))
                if self.admissible(candidate):
                    trial = self.elastic(candidate)
                    if trial.optimal and trial.value > value + 1e-15 * max(1.0, abs(value)):
                        points, solution, value = candidate, trial, trial.value
                        improved = True
                        break
                alpha *= 0.5
            if not improved:
                break
            alpha = min(2.0 * alpha, 0.5)
        return points, iterations

    def run(self, start):
        points, iterations = self.ascend(np.array(start, dtype=float))
        solution = self.strict(points)
        if not solution.optimal:
            return {"value": None, "iterations": iterations}
        return {
            "value": solution.value,
            "points": points,
            "theta": solution.theta,
            "multipliers": solution.multipliers,
            "inside_count": self.inside_count,
            "iterations": iterations,
        }


def _run_starts(search, starts, threads):
    if threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(search.run, starts))
    return [search.run(start) for start in starts]


def _starts(problem, settings, salt=0):
    size = problem.moment_count + 1
    d = problem.dimension
    units = _sobol(size * d, settings.multistarts, settings.seed + salt)
    lower = np.asarray(problem.domain.lower)
    return [lower + u.reshape(size, d) * problem.domain.widths for u in units]


def _push_level(event, x, domain, want_inside, iterations):
    """Projected gradient walk on h from x until h <= 0 (or h >= 0); None on failure"""
    sign = -1.0 if want_inside else 1.0  # ascend sign * h

    def satisfied(h):
        return h <= 0.0 if want_inside else h >= 0.0

    lower, upper = np.asarray(domain.lower), np.asarray(domain.upper)
    widths = domain.widths
    h = eval_point(event, x)
    alpha = 0.25
    for _ in range(iterations):
        if satisfied(h):
            return x
        grad = sign * _gradients([event], x[None, :])[0, 0] * widths
        norm = np.max(np.abs(grad))
        if not np.isfinite(norm) or norm == 0.0:
            return None
        moved = False
        while alpha > 1e-12:
            candidate = np.clip(x + alpha * grad / norm * widths, lower, upper)
            trial = eval_point(event, candidate)
            if sign * trial > sign * h:
                x, h, moved = candidate, trial, True
                break
            alpha *= 0.5
        if not moved:
            return None
        alpha = min(2.0 * alpha, 0.5)
    return x if satisfied(h) else None


def membership_pools(problem, settings):
    """Sobol points of A split into {h <= 0} and {h >= 0}, widened by descent when a side is empty"""
    domain = problem.domain
    pool = np.asarray(domain.lower) + _sobol(domain.dimension, SEARCH_POOL_SIZE, settings.seed + 7919) * domain.widths
    h = eval_point(problem.event, pool)
    inside, outside = pool[h <= 0.0], pool[h >= 0.0]
    if not len(inside):
        found = [_push_level(problem.event, pool[j], domain, True, settings.gradient_iters) for j in np.argsort(h)[:8]]
        inside = np.array([x for x in found if x is not None]).reshape(-1, domain.dimension)
    if not len(outside):
        found = [_push_level(problem.event, pool[j], domain, False, settings.gradient_iters) for j in np.argsort(-h)[:8]]
        outside = np.array([x for x in found if x is not None]).reshape(-1, domain.dimension)
    logger.debug("Membership pools: %d inside C, %d outside C", len(inside), len(outside))
    return inside, outside


def _repair(start, inside_count, event, inside, outside, widths):
    """Replace support points on the wrong side of h by the nearest pool point"""
    h = eval_point(event, start)
    scale = np.where(widths > 0.0, widths, 1.0)
    repaired = start.copy()
    for ell in range(start.shape[0]):
        want_inside = ell < inside_count
        if (h[ell] <= 0.0) if want_inside else (h[ell] >= 0.0):
            continue
        pool = inside if want_inside else outside
        if not len(pool):
            return None
        distance = np.sum(((pool - start[ell]) / scale) ** 2, axis=1)
        repaired[ell] = pool[int(np.argmin(distance))]
    return repaired


def _best(results):
    best = None
    for result in results:
        if result["value"] is not None and (best is None or result["value"] > best["value"]):
            best = result
    return best


def _search_probability(problem, settings):
    inside, outside = membership_pools(problem, settings)
    widths = problem.domain.widths
    programs = []
    best = None
    iterations = 0
    for i in range(1, problem.moment_count + 2):
        search = SupportSearch(problem, settings, inside_count=i)
        starts = [_repair(s, i, problem.event, inside, outside, widths) for s in _starts(problem, settings, i)]
        starts = [s for s in starts if s is not None]
        results = _run_starts(search, starts, settings.threads)
        iterations += sum(r["iterations"] for r in results)
        incumbent = _best(results)
        programs.append({
            "inside_points": i,
            "value": None if incumbent is None else incumbent["value"],
            "feasible_starts": sum(1 for r in results if r["value"] is not None),
        })
        logger.info("Program with %d point(s) in C: %s", i, programs[-1]["value"])
        if incumbent is not None and (best is None or incumbent["value"] > best["value"]):
            best = incumbent
    if best is None:
        best, used = _find_feasible(problem, settings, outside)
        iterations += used
    return best, programs, iterations


def _find_feasible(problem, settings, outside=None):
    """
    Any distribution meeting the moment constraints with every point outside C.
    Starts are repaired from `outside` when given.
    """
    search = SupportSearch(problem, settings, inside_count=0)
    no_inside = np.empty((0, problem.dimension))
    iterations = 0
    for start in _starts(problem, settings, 0):
        if outside is not None:
            start = _repair(start, 0, problem.event, no_inside, outside, problem.domain.widths)
            if start is None:
                break
        elif not search.admissible(start):
            continue
        result = search.run(start)
        iterations += result["iterations"]
        if result["value"] is not None:
            return result, iterations
    return None, iterations


# --------- Branch-and-bound (upper bound) ---------

BOX_NODE_FLOOR = 1e-12  # relative width below which a box is not bisected further


class BoxMaximization(pybnb.Problem):
    """
    sup over a box of a function with interval upper bounds `upper_bound(box)`
    and point values `point(x)`; nodes are sub-boxes bisected along their
    widest coordinate.
    """

    def __init__(self, upper_bound, point, domain):
        self._upper_bound = upper_bound
        self._point = point
        self._box = domain
        self._parent_bound = math.inf
        self._box_bound = None
        self.unbranched = -math.inf

    def sense(self):
        return pybnb.maximize

    def bound(self):
        if self._box_bound is None:
            # a sub-box never exceeds its parent
            self._box_bound = min(float(self._upper_bound(self._box)), self._parent_bound)
        return self._box_bound

    def objective(self):
        return min(float(self._point(self._box.center)), self.bound())

    def save_state(self, node):
        node.state = (self._box.lower, self._box.upper, self._parent_bound)

    def load_state(self, node):
        lower, upper, self._parent_bound = node.state
        self._box = BoxRegion(lower, upper)
        self._box_bound = None

    def branch(self):
        box = self._box
        if np.max(box.widths) <= BOX_NODE_FLOOR * max(1.0, float(np.max(np.abs(box.center)))):
            # leaves drop out of the solver queue, so their bound is kept here
            self.unbranched = max(self.unbranched, self.bound())
            return
        for child in box.split():
            node = pybnb.Node()
            node.state = (child.lower, child.upper, self.bound())
            yield node


def maximize_on_box(bound, point, domain, tol, max_boxes, seeds=()):
    """
    Interval branch-and-bound for sup over `domain` of a function with box
    upper bounds `bound(box)` and point values `point(x)`, best bound first.
    `seeds` are points whose values start the incumbent.
    Returns (upper, incumbent, boxes_explored).
    """
    incumbent = max([float(point(np.asarray(x))) for x in seeds] + [float(point(domain.center))])
    problem = BoxMaximization(bound, point, domain)
    results = pybnb.Solver(comm=None).solve(
        problem,
        best_objective=incumbent,
        absolute_gap=tol,
        node_limit=max_boxes,
        queue_strategy="bound",
        log=None,
        disable_signal_handlers=True,
    )
    if results.termination_condition == pybnb.TerminationCondition.node_limit:
        logger.warning("Branch-and-bound box budget (%d) exhausted", max_boxes)
    incumbent = max(incumbent, float(results.objective))
    upper = max(float(results.bound), incumbent, problem.unbranched)
    logger.debug("Branch-and-bound: %d boxes, bound %.12g, incumbent %.12g", results.nodes, upper, incumbent)
    return upper, incumbent, int(results.nodes)


def root_partition(domain, per_axis=4):
    """per_axis ** d equal sub-boxes of the domain"""
    edges = [np.linspace(lo, hi, per_axis + 1) for lo, hi in zip(domain.lower, domain.upper)]
    boxes = []
    for cell in product(range(per_axis), repeat=domain.dimension):
        boxes.append(BoxRegion([edges[i][j] for i, j in enumerate(cell)], [edges[i][j + 1] for i, j in enumerate(cell)]))
    return boxes


def _relaxation_data(problem, boxes):
    G = np.empty(len(boxes))
    F_lo = np.empty((problem.moment_count, len(boxes)))
    F_hi = np.empty_like(F_lo)
    for q, box in enumerate(boxes):
        if problem.is_probability:
            G[q] = 0.0 if classify_box(problem.event, box) == OUTSIDE_C else 1.0
        else:
            G[q] = eval_centered(problem.objective, box).hi
        for j, f in enumerate(problem.moment_map):
            enclosure = eval_centered(f, box)
            F_lo[j, q], F_hi[j, q] = enclosure.lo, enclosure.hi
    if not (np.all(np.isfinite(G)) and np.all(np.isfinite(F_lo)) and np.all(np.isfinite(F_hi))):
        return None
    return G, F_lo, F_hi


def partition_relaxation(problem, settings):
    """
    Upper bounds from the partition relaxation, refined by bisecting the
    positively weighted boxes. Raises InfeasibleProblemError when a relaxation
    (a superset of every feasible distribution) is infeasible.
    Returns (best value or inf, multiplier candidates, boxes used, notes).
    """
    boxes = root_partition(problem.domain)
    best = math.inf
    multipliers = []
    notes = []
    for round_index in range(settings.root_refinements + 1):
        data = _relaxation_data(problem, boxes)
        if data is None:
            notes.append("partition relaxation skipped: unbounded interval enclosures")
            break
        solution = solve_relaxed_lp(*data, problem.moment_set)
        if solution.status == INFEASIBLE:
            raise InfeasibleProblemError(
                f"no distribution on the domain has moments in {problem.moment_set.to_dict()} "
                f"(relaxation over {len(boxes)} boxes is infeasible)"
            )
        if not solution.optimal:
            notes.append(f"partition relaxation stopped: {solution.status}")
            break
        best = min(best, solution.value)
        multipliers.append(solution.multipliers)
        logger.debug("Relaxation round %d over %d boxes: %.9g", round_index, len(boxes), solution.value)
        weighted = [q for q, w in enumerate(solution.theta) if w > 1e-12]
        if len(boxes) + len(weighted) > RELAXATION_MAX_BOXES:
            break
        weighted = set(weighted)
        refined = []
        for q, box in enumerate(boxes):
            refined.extend(box.split() if q in weighted else [box])
        boxes = refined
    return best, multipliers, len(boxes), notes


def lagrangian(problem, multipliers):
    """g - sum_j lambda_j f_j as an expression (g omitted for probability problems)"""
    expr = None if problem.is_probability else problem.objective
    for weight, f in zip(multipliers, problem.moment_map):
        if weight == 0.0:
            continue
        term = BinOp("*", Num(float(weight)), f)
        expr = Neg(term) if expr is None else BinOp("-", expr, term)
    return Num(0.0) if expr is None else expr


def support_function(box, multipliers):
    """sigma_B(lambda) = max over b in B of lambda . b"""
    return float(sum(max(w * lo, w * hi) for w, lo, hi in zip(multipliers, box.lower, box.upper)))


def dual_bound(problem, multipliers, settings, seeds=(), tol=None):
    """sup_x (g(x) - lambda.f(x)) + sigma_B(lambda) by interval branch-and-bound; (bound, boxes)"""
    tol = settings.bnb_tol / 2.0 if tol is None else tol
    expr = lagrangian(problem, multipliers)
    event = problem.event

    if problem.is_probability:
        def bound(box):
            indicator = 0.0 if classify_box(event, box) == OUTSIDE_C else 1.0
            return indicator + eval_centered(expr, box).hi

        def point(x):
            return eval_point(expr, x) + (1.0 if eval_point(event, x) <= 0.0 else 0.0)
    else:
        def bound(box):
            return eval_centered(expr, box).hi

        def point(x):
            return eval_point(expr, x)

    upper, _, explored = maximize_on_box(
        bound, point, problem.domain, tol, settings.bnb_max_boxes, seeds
    )
    value = upper + support_function(problem.moment_set, multipliers)
    return float(np.nextafter(value, np.inf)), explored


# --------- Public API ---------

def _certificate(problem, settings, best, relaxation, programs, iterations, notes):
    relaxed_upper, candidates, boxes, relaxation_notes = relaxation
    notes = list(notes) + relaxation_notes
    lower = best["value"] if best is not None else -math.inf
    seeds = []
    if best is not None:
        candidates = [best["multipliers"]] + candidates[::-1]
        seeds = list(best["points"])
    candidates.append(np.zeros(problem.moment_count))

    upper = relaxed_upper
    explored = boxes
    seen = set()
    for multipliers in candidates:
        key = tuple(np.round(multipliers, 12))
        if key in seen:
            continue
        seen.add(key)
        if upper - lower <= settings.bnb_tol:
            break
        value, used = dual_bound(problem, multipliers, settings, seeds)
        explored += used
        logger.info("Dual bound for multipliers %s: %.9g", np.array2string(np.asarray(multipliers), precision=6), value)
        upper = min(upper, value)

    if problem.is_probability:
        upper = min(upper, 1.0)
        lower = max(lower, 0.0) if best is not None else lower
    if best is not None:
        witness = DiscreteDistribution.from_arrays(best["points"], best["theta"])
        every_point = DiscreteDistribution.from_arrays(best["points"], np.clip(best["theta"], 0.0, None), drop_below=-1.0)
        try:
            check_distribution(every_point, problem, WITNESS_TOL, inside_count=best.get("inside_count"))
        except AssertionError as error:
            notes.append(f"witness check: {error}")
            logger.warning("Witness failed its self-check: %s", error)
    else:
        witness = DiscreteDistribution(())
        notes.append("no feasible support found by the search; lower bound unavailable")
    status = CERTIFIED if upper - lower <= settings.bnb_tol else HEURISTIC_ONLY
    if lower > upper + settings.bnb_tol:
        message = f"bracket violated: lower {lower:.12g} exceeds upper {upper:.12g}"
        notes.append(message)
        logger.warning("Unsound certificate: %s", message)
        status = HEURISTIC_ONLY
    return BoundCertificate(
        upper=float(upper),
        lower=float(lower),
        witness=witness,
        iterations=iterations,
        boxes_explored=explored,
        tolerance_used=settings.bnb_tol,
        status=status,
        programs=tuple(programs),
        notes=tuple(notes),
    )


def sup_expectation(problem, settings=None):
    """Certified bracket on sup E[g(X)]"""
    settings = settings or SolverSettings()
    validate_problem(problem)
    if problem.is_probability:
        raise ProblemError("sup_expectation needs an expression objective", "BAD_EXPR")
    relaxation = partition_relaxation(problem, settings)
    search = SupportSearch(problem, settings)
    results = _run_starts(search, _starts(problem, settings), settings.threads)
    iterations = sum(r["iterations"] for r in results)
    best = _best(results)
    logger.info("Search incumbent: %s after %d iterations", None if best is None else best["value"], iterations)
    return _certificate(problem, settings, best, relaxation, (), iterations, ())


def sup_probability(problem, settings=None):
    """Certified bracket on sup Pr{h(X) <= 0}, the max over the P_i programs"""
    settings = settings or SolverSettings()
    validate_problem(problem)
    if not problem.is_probability:
        raise ProblemError("sup_probability needs the indicator objective", "BAD_EXPR")

    if eval_interval(problem.event, problem.domain).lo > 0.0:
        logger.info("Event is empty on the domain; bound is 0")
        boxes = root_partition(problem.domain)
        relaxed = _relaxation_data(problem, boxes)
        if relaxed is not None and not solve_relaxed_lp(*relaxed, problem.moment_set).optimal:
            raise InfeasibleProblemError(f"no distribution on the domain has moments in {problem.moment_set.to_dict()}")
        found, iterations = _find_feasible(problem, settings)
        notes = ["EVENT_EMPTY: h > 0 on the whole domain, so Pr{h(X) <= 0} = 0"]
        if found is None:
            witness = DiscreteDistribution(())
            notes.append("no feasible support found by the search")
        else:
            witness = DiscreteDistribution.from_arrays(found["points"], found["theta"])
        return BoundCertificate(0.0, 0.0, witness, iterations, len(boxes),
                                settings.bnb_tol, CERTIFIED, (), tuple(notes))

    relaxation = partition_relaxation(problem, settings)
    best, programs, iterations = _search_probability(problem, settings)
    return _certificate(problem, settings, best, relaxation, programs, iterations, ())


def solve_problem(problem, settings=None):
    if problem.is_probability:
        return sup_probability(problem, settings)
    return sup_expectation(problem, settings)
