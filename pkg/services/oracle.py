"""
Independent checks for the solver and the inequality evaluators: an
exhaustive grid LP for small worst-case problems and Monte Carlo estimates of
tail and boundary-crossing probabilities.

Replicates are drawn in fixed-size chunks, each from its own Philox stream
keyed by (seed, chunk index), so estimates do not depend on the worker count.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from config.settings import (CROSSING_HORIZON_FACTOR, DEFAULT_SEED, DOMINANCE_STDERRS,
                             GRID_MAX_DIMENSION, GRID_MAX_MOMENTS, GRID_MAX_RESOLUTION,
                             MC_CHUNK_SIZE, MC_REPS)
from services.errors import InfeasibleProblemError, TooLargeError, require
from services.expressions import Expr, eval_point
from services.vector_bounds import GoldenDistribution

logger = logging.getLogger(__name__)

BERNOULLI = "BERNOULLI"
CENTERED_COIN = "CENTERED_COIN"
NORMAL = "NORMAL"
POISSON = "POISSON"
SPHERE_UNIFORM = "SPHERE_UNIFORM"
BALL_UNIFORM = "BALL_UNIFORM"
CUBE_UNIFORM = "CUBE_UNIFORM"
GOLDEN_Z = "GOLDEN_Z"

VECTOR_FAMILIES = {SPHERE_UNIFORM, BALL_UNIFORM, CUBE_UNIFORM}
FAMILY_PARAMS = {
    BERNOULLI: ("p",),
    CENTERED_COIN: (),
    NORMAL: ("mu", "nu"),
    POISSON: ("lam",),
    SPHERE_UNIFORM: ("d",),
    BALL_UNIFORM: ("d",),
    CUBE_UNIFORM: ("d",),
    GOLDEN_Z: (),
}

THRESHOLD_SLACK = 1e-9  # relative; partial sums of decimals land a few ulps short


@dataclass(frozen=True)
class SamplerSpec:
    """i.i.d. increments of `family`, paths of length n, `reps` replicates"""

    family: str
    n: int = 1
    reps: int = MC_REPS
    seed: int = DEFAULT_SEED
    threads: int = 1
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        require(self.family in FAMILY_PARAMS, f"unknown sampler family {self.family!r}")
        missing = [name for name in FAMILY_PARAMS[self.family] if name not in self.params]
        require(not missing, f"{self.family} needs parameters {missing}")
        require(int(self.n) == self.n and self.n >= 1, f"n must be a positive integer, got {self.n}")
        require(int(self.reps) == self.reps and self.reps >= 1, f"reps must be a positive integer, got {self.reps}")
        require(self.threads >= 1, f"threads must be at least 1, got {self.threads}")
        params = self.params
        if self.family == BERNOULLI:
            require(0.0 <= params["p"] <= 1.0, f"p must be in [0, 1], got {params['p']}")
        elif self.family == NORMAL:
            require(params["nu"] > 0.0, f"nu must be positive, got {params['nu']}")
        elif self.family == POISSON:
            require(params["lam"] > 0.0, f"lam must be positive, got {params['lam']}")
        elif self.family in VECTOR_FAMILIES:
            require(int(params["d"]) == params["d"] and params["d"] >= 1, f"d must be a positive integer, got {params['d']}")

    @property
    def is_vector(self):
        return self.family in VECTOR_FAMILIES

    def chunks(self):
        """(index, size) of every replicate chunk"""
        count = -(-self.reps // MC_CHUNK_SIZE)
        return [(c, min(MC_CHUNK_SIZE, self.reps - c * MC_CHUNK_SIZE)) for c in range(count)]

    def stream(self, chunk):
        return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(self.seed), int(chunk)])))

    def draw(self, rng, size, steps):
        """Increments with shape (size, steps) or (size, steps, d)"""
        params = self.params
        shape = (size, steps)
        if self.family == BERNOULLI:
            return (rng.random(shape) < params["p"]).astype(float)
        if self.family == CENTERED_COIN:
            return np.where(rng.random(shape) < 0.5, 0.5, -0.5)
        if self.family == NORMAL:
            return rng.normal(params["mu"], math.sqrt(params["nu"]), shape)
        if self.family == POISSON:
            return rng.poisson(params["lam"], shape).astype(float)
        if self.family == GOLDEN_Z:
            return GoldenDistribution().sample(rng, shape)
        d = int(params["d"])
        if self.family == CUBE_UNIFORM:
            return rng.uniform(-1.0, 1.0, shape + (d,))
        gauss = rng.standard_normal(shape + (d,))
        sphere = gauss / np.linalg.norm(gauss, axis=-1, keepdims=True)
        if self.family == SPHERE_UNIFORM:
            return sphere
        return sphere * rng.random(shape + (1,)) ** (1.0 / d)


@dataclass(frozen=True)
class McEstimate:
    p_hat: float
    stderr: float
    reps: int
    notes: tuple = ()

    @classmethod
    def from_counts(cls, hits, reps, notes=()):
        p_hat = hits / reps
        return cls(p_hat, math.sqrt(p_hat * (1.0 - p_hat) / reps), reps, tuple(notes))

    def dominated_by(self, bound, stderrs=DOMINANCE_STDERRS):
        return bound + stderrs * self.stderr >= self.p_hat

    def to_dict(self):
        return {"p_hat": self.p_hat, "stderr": self.stderr, "reps": self.reps, "notes": list(self.notes)}


# --------- Monte Carlo ---------

def _magnitudes(spec, increments):
    """Running sums S_1..S_steps (norms for vector families)"""
    sums = np.cumsum(increments, axis=1)
    if spec.is_vector:
        return np.linalg.norm(sums, axis=-1)
    return sums


def _count(spec, steps, hit):
    def run(chunk):
        index, size = chunk
        return int(np.count_nonzero(hit(_magnitudes(spec, spec.draw(spec.stream(index), size, steps)))))

    chunks = spec.chunks()
    if spec.threads > 1:
        with ThreadPoolExecutor(max_workers=spec.threads) as pool:
            counts = list(pool.map(run, chunks))
    else:
        counts = [run(chunk) for chunk in chunks]
    return sum(counts)


def _slack(levels):
    return THRESHOLD_SLACK * np.maximum(1.0, np.abs(levels))


def mc_tail(spec, threshold_per_sample):
    """Pr{S_n >= n threshold} (||S_n|| for vector families)"""
    level = spec.n * threshold_per_sample

    def hit(paths):
        return paths[:, -1] >= level - _slack(level)

    hits = _count(spec, spec.n, hit)
    logger.debug("mc_tail %s n=%d threshold=%r: %d / %d", spec.family, spec.n, threshold_per_sample, hits, spec.reps)
    return McEstimate.from_counts(hits, spec.reps)


def default_horizon(m):
    return CROSSING_HORIZON_FACTOR * int(m)


def mc_sup_crossing(spec, boundary, horizon):
    """
    Pr{S_k >= boundary(k) for some k <= horizon}; `boundary` is an expression
    in `n` or a constant. A lower estimate of the untruncated event.
    """
    require(int(horizon) == horizon and horizon >= 1, f"horizon must be a positive integer, got {horizon}")
    horizon = int(horizon)
    steps = np.arange(1, horizon + 1, dtype=float)
    if isinstance(boundary, Expr):
        levels = eval_point(boundary, steps[:, None])
    else:
        levels = np.full(horizon, float(boundary))
    finite = np.isfinite(levels)
    levels = np.where(finite, levels - _slack(np.where(finite, levels, 0.0)), levels)
    if not np.any(levels < np.inf):
        return McEstimate.from_counts(0, spec.reps, notes=("boundary is never crossable",))

    def hit(paths):
        return np.any(paths >= levels, axis=1)

    hits = _count(spec, horizon, hit)
    logger.debug("mc_sup_crossing %s horizon=%d: %d / %d", spec.family, horizon, hits, spec.reps)
    return McEstimate.from_counts(hits, spec.reps, notes=(f"truncated at horizon {horizon}",))


# --------- Grid oracle ---------

def grid_points(domain, resolution):
    axes = [np.linspace(lo, hi, resolution) if hi > lo else np.array([lo])
            for lo, hi in zip(domain.lower, domain.upper)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([m.ravel() for m in mesh])


def grid_bruteforce(problem, resolution):
    """
    Best bound over every support of at most k + 1 grid points, as one LP over
    all grid weights (its basic optima have at most k + 1 nonzeros). Solved by
    HiGHS, independent of the in-house simplex.
    """
    if problem.dimension > GRID_MAX_DIMENSION or problem.moment_count > GRID_MAX_MOMENTS:
        raise TooLargeError(
            f"grid oracle handles d <= {GRID_MAX_DIMENSION} and k <= {GRID_MAX_MOMENTS}, "
            f"got d={problem.dimension}, k={problem.moment_count}"
        )
    if not 2 <= resolution <= GRID_MAX_RESOLUTION:
        raise TooLargeError(f"resolution must be in [2, {GRID_MAX_RESOLUTION}], got {resolution}")

    points = grid_points(problem.domain, resolution)
    if problem.is_probability:
        values = (eval_point(problem.event, points) <= 0.0).astype(float)
    else:
        values = eval_point(problem.objective, points)
    moments = problem.moments_at(points)
    lower, upper = np.asarray(problem.moment_set.lower), np.asarray(problem.moment_set.upper)

    result = linprog(
        -values,
        A_ub=np.vstack([moments, -moments]),
        b_ub=np.concatenate([upper, -lower]),
        A_eq=np.ones((1, len(points))),
        b_eq=[1.0],
        bounds=(0.0, None),
        method="highs",
    )
    if result.status == 2:
        raise InfeasibleProblemError("no grid distribution has moments in the moment set")
    if not result.success:
        raise InfeasibleProblemError(f"grid LP failed: {result.message}")
    logger.debug("Grid oracle over %d points: %.10g", len(points), -result.fun)
    return float(-result.fun)
