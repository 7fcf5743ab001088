"""
Named verification suites behind `main.py verify`.

Each suite returns {"suite", "cells", "violations", "details"}; a violation
is any cell where a bound fails its check (Monte Carlo dominance with a
3-stderr margin, closed-form agreement or exact arithmetic).
"""

import logging
import math
from itertools import combinations

import numpy as np
from scipy.stats import binom

from config.settings import DEFAULT_SEED, DOMINANCE_STDERRS, MC_REPS
from services.chernoff import (asymptotic_check, centered_coin_cumulant,
                               crossing_boundary, uniform_bound_bernoulli,
                               uniform_bound_bounded_variance,
                               uniform_bound_normal, uniform_bound_poisson)
from services.errors import ParameterError
from services.expressions import parse
from services.model import BoxRegion, MomentProblem
from services.oracle import (BALL_UNIFORM, BERNOULLI, CENTERED_COIN, CUBE_UNIFORM, NORMAL,
                             POISSON, SPHERE_UNIFORM, SamplerSpec, default_horizon,
                             grid_bruteforce, mc_sup_crossing, mc_tail)
from services.routh import Polynomial, plant_coefficients, routh_stable
from services.simplex import ThetaLP, solve_lp
from services.vector_bounds import (PHI, GoldenDistribution, componentwise_tail,
                                    golden_moment, iid_bounded_bound,
                                    martingale_bound, mgf_vector_bound,
                                    small_deviation_bound, variance_range_bound)
from services.worst_case import SolverSettings, solve_problem

logger = logging.getLogger(__name__)


def _report(name, cells, violations, details):
    logger.info("Suite %s: %d cells, %d violations", name, cells, len(violations))
    return {"suite": name, "cells": cells, "violations": violations, "details": details}


# --------- Dominance suites ---------

def _uniform_cells():
    """(label, sampler family, params, result, theta, m) for the uniform inequalities"""
    cells = []
    for p in (0.1, 0.3, 0.5, 0.6, 0.7):
        for theta in (p + 0.1, p + 0.2):
            for m in (20, 50):
                cells.append(("bernoulli", BERNOULLI, {"p": p}, uniform_bound_bernoulli(p, theta, m), theta, m))
    for nu in (0.5, 1.0):
        for theta in (0.1, 0.2, 0.3, 0.4, 0.5):
            for m in (20, 50):
                params = {"mu": 0.0, "nu": nu}
                cells.append(("normal", NORMAL, params, uniform_bound_normal(0.0, nu, theta, m), theta, m))
    for lam in (0.5, 1.0, 2.0, 3.0, 5.0):
        for ratio in (1.3, 1.6):
            for m in (20, 50):
                theta = lam * ratio
                cells.append(("poisson", POISSON, {"lam": lam}, uniform_bound_poisson(lam, theta, m), theta, m))
    # centered coin on {-1/2, +1/2}: b = 1/2, variance 1/4
    for eps in (0.05, 0.1, 0.15, 0.2, 0.25):
        for m in (10, 20, 30, 50):
            result = uniform_bound_bounded_variance(0.5, 0.25, eps, m)
            cells.append(("bounded-variance", CENTERED_COIN, {}, result, eps, m))
    return cells


def chernoff_suite(reps, seed, threads):
    violations, details = [], []
    cells = _uniform_cells()
    for index, (label, family, params, result, theta, m) in enumerate(cells):
        spec = SamplerSpec(family, n=m, reps=reps, seed=seed + index, threads=threads, params=params)
        boundary = crossing_boundary(result, theta, m)
        estimate = mc_sup_crossing(spec, boundary, default_horizon(m))
        cell = {"bound": label, "params": params, "theta": theta, "m": m,
                "value": result.bound, **estimate.to_dict()}
        details.append(cell)
        if not estimate.dominated_by(result.bound, DOMINANCE_STDERRS):
            violations.append(cell)
    return _report("chernoff", len(cells), violations, details)


def _vector_bounds(family, n, eps):
    # unit sphere: ||X|| = 1, E||X||^2 = 1; unit ball in R^3: E||X||^2 = 3/5
    sigma2 = 1.0 if family == SPHERE_UNIFORM else 0.6
    sigma = math.sqrt(sigma2)
    bounds = {
        "iid-bounded": iid_bounded_bound(1.0, n, eps).bound,
        "variance-range": variance_range_bound(sigma, 1.0, n, eps).tier1,
    }
    if eps < sigma2 / PHI:
        c_n = 1.0 / (sigma * math.sqrt(n))
        bounds["small-deviation"] = small_deviation_bound(c_n, math.sqrt(n) * eps / sigma).bound
    if family == SPHERE_UNIFORM:
        bounds["mgf-vector"] = mgf_vector_bound("exp(s)", 10.0, eps, n).bound
    bounds["martingale"] = martingale_bound(np.ones(n), n * eps).bound
    return bounds


def _componentwise_cells(reps, seed, threads):
    """||U|| >= eps for one U uniform on [-1, 1]^d: radii 1, E||U||^2 = d/3"""
    details, violations = [], []
    for index, d in enumerate((2, 3, 5, 8)):
        sigma2 = d / 3.0
        for step, fraction in enumerate((0.1, 0.25, 0.4, 0.55, 0.7)):
            eps = math.sqrt(sigma2) + fraction * (math.sqrt(d) - math.sqrt(sigma2))
            value = componentwise_tail(np.ones(d), sigma2, eps).bound
            spec = SamplerSpec(CUBE_UNIFORM, n=1, reps=reps, seed=seed + 5 * index + step, threads=threads,
                               params={"d": d})
            estimate = mc_tail(spec, eps)
            cell = {"bound": "componentwise", "family": CUBE_UNIFORM, "d": d, "eps": eps, "value": value,
                    **estimate.to_dict()}
            details.append(cell)
            if not estimate.dominated_by(value, DOMINANCE_STDERRS):
                violations.append(cell)
    return details, violations


def vector_suite(reps, seed, threads):
    violations, details = [], []
    cells = 0
    for family in (SPHERE_UNIFORM, BALL_UNIFORM):
        for n in (10, 25, 50, 100, 200):
            for eps in (0.2, 0.3, 0.4, 0.5):
                spec = SamplerSpec(family, n=n, reps=reps, seed=seed + cells, threads=threads, params={"d": 3})
                estimate = mc_sup_crossing(spec, n * eps, n)
                cells += 1
                for name, value in _vector_bounds(family, n, eps).items():
                    cell = {"bound": name, "family": family, "n": n, "eps": eps, "value": value, **estimate.to_dict()}
                    details.append(cell)
                    if not estimate.dominated_by(value, DOMINANCE_STDERRS):
                        violations.append(cell)
    componentwise, misses = _componentwise_cells(reps, seed + cells, threads)
    details.extend(componentwise)
    violations.extend(misses)
    return _report("vector", cells + len(componentwise), violations, details)


# --------- Exact suites ---------

def golden_suite(reps=None, seed=None, threads=None):
    z = GoldenDistribution()
    checks = [
        ("E[Z]", golden_moment(1), 0.0, 1e-15),
        ("E[Z^2]", golden_moment(2), 1.0, 1e-14),
        ("range", z.range, math.sqrt(5.0), 1e-15),
        ("max_abs", z.max_abs, PHI, 1e-15),
        ("total mass", z.p_plus + z.p_minus, 1.0, 1e-15),
        ("mean", z.p_plus * z.value_plus + z.p_minus * z.value_minus, 0.0, 1e-15),
    ]
    details, violations = [], []
    for name, value, expected, tol in checks:
        cell = {"check": name, "value": value, "expected": expected, "tol": tol}
        details.append(cell)
        if abs(value - expected) > tol:
            violations.append(cell)
    for k in range(2, 21):
        cell = {"check": f"E[Z^{k}] >= 1", "value": golden_moment(k)}
        details.append(cell)
        if golden_moment(k) < 1.0 - 1e-12:
            violations.append(cell)
    return _report("golden", len(details), violations, details)


def asymptotic_suite(reps=None, seed=None, threads=None):
    """Centered coin: rate error contracts >= 6x and slope error >= 3x per halving of eps"""
    reports = asymptotic_check(centered_coin_cumulant(), 0.25, 0.0, [0.1, 0.05, 0.025])
    rate_errors = [abs(r.rate - r.gaussian_rate) for r in reports]
    slope_errors = [abs(r.ratio_phi_zeta - r.epsilon / 2.0) for r in reports]
    details, violations = [], []
    for i in range(1, len(reports)):
        cell = {
            "epsilon": reports[i].epsilon,
            "rate_contraction": rate_errors[i - 1] / rate_errors[i],
            "slope_contraction": slope_errors[i - 1] / slope_errors[i],
        }
        details.append(cell)
        if cell["rate_contraction"] < 6.0 or cell["slope_contraction"] < 3.0:
            violations.append(cell)
    return _report("asymptotic", len(details), violations, details)


def random_quartic(rng):
    """Product of linear/quadratic factors; returns (coefficients, all roots in the open left half-plane)"""
    def signed():
        value = rng.uniform(0.05, 3.0)
        return value if rng.random() < 0.5 else -value

    layout = rng.integers(3)
    factors = []
    if layout == 0:
        factors = [[1.0, signed(), rng.uniform(0.1, 5.0)] for _ in range(2)]
    elif layout == 1:
        factors = [[1.0, signed(), rng.uniform(0.1, 5.0)], [1.0, signed()], [1.0, signed()]]
    else:
        factors = [[1.0, signed()] for _ in range(4)]
    coeffs = np.array([1.0])
    for factor in factors:
        coeffs = np.polymul(coeffs, factor)
    stable = all(factor[1] > 0.0 for factor in factors)
    return coeffs, stable


def routh_suite(reps=500, seed=DEFAULT_SEED, threads=None):
    rng = np.random.default_rng(seed)
    details, violations = [], []
    nominal = plant_coefficients([0.0, 0.0, 0.0])
    report = routh_stable(Polynomial([1.0, *nominal]))
    cell = {"check": "nominal margins", "margins": list(report.margins)}
    details.append(cell)
    if report.margins != (20.0, 1440.0, 857600.0, 1600.0):
        violations.append(cell)
    skipped = 0
    for _ in range(reps):
        coeffs, stable = random_quartic(rng)
        report = routh_stable(Polynomial(coeffs))
        if min(abs(m) for m in report.margins) <= 1e-9:
            skipped += 1
            continue
        if report.stable != stable:
            violations.append({"coeffs": coeffs.tolist(), "expected": stable, "got": report.stable})
    details.append({"check": "constructed quartics", "count": reps, "skipped_near_zero": skipped})
    return _report("routh", reps + 1, violations, details)


def enumerate_vertices(p):
    """Best objective over basic feasible weights of a ThetaLP by brute force; -inf if infeasible"""
    F, c = p.moment_matrix, p.objective_coeffs
    k, L = F.shape
    lower, upper = np.asarray(p.moment_box.lower), np.asarray(p.moment_box.upper)
    rows = [np.eye(L)[i] for i in range(L)] + list(F) + list(F)
    rhs = [0.0] * L + list(lower) + list(upper)
    best = -math.inf
    for chosen in combinations(range(len(rows)), L - 1):
        A = np.vstack([np.ones(L)] + [rows[i] for i in chosen])
        b = np.array([1.0] + [rhs[i] for i in chosen])
        if abs(np.linalg.det(A)) < 1e-12:
            continue
        theta = np.linalg.solve(A, b)
        moments = F @ theta
        if np.all(theta >= -1e-10) and np.all(moments >= lower - 1e-10) and np.all(moments <= upper + 1e-10):
            best = max(best, float(c @ theta))
    return best


def random_theta_lp(rng):
    L = int(rng.integers(2, 5))
    k = int(rng.integers(1, 3))
    F = rng.uniform(-1.0, 1.0, (k, L))
    center = F @ rng.dirichlet(np.ones(L))
    half = rng.uniform(0.0, 0.3, k)
    return ThetaLP(rng.uniform(-1.0, 1.0, L), F, BoxRegion(center - half, center + half))


def lp_suite(reps=500, seed=DEFAULT_SEED, threads=None):
    rng = np.random.default_rng(seed)
    violations = []
    for _ in range(reps):
        p = random_theta_lp(rng)
        expected = enumerate_vertices(p)
        solution = solve_lp(p)
        if not solution.optimal or abs(solution.value - expected) > 1e-8:
            violations.append({"expected": expected, "got": solution.value, "status": solution.status})
    return _report("lp", reps, violations, [{"instances": reps}])


def markov_problem():
    """sup Pr{X >= 0.9} over X in [0, 1] with E X = 0.5; the answer is 5/9"""
    return MomentProblem(BoxRegion([0.0], [1.0]), [parse("x1", 1)], BoxRegion([0.5], [0.5]), parse("0.9 - x1", 1))


def square_problem():
    """sup E[X^2] over X in [0, 1] with E X = 0.5; the answer is 1/2"""
    return MomentProblem(BoxRegion([0.0], [1.0]), [parse("x1", 1)], BoxRegion([0.5], [0.5]),
                         objective=parse("x1^2", 1))


def oracle_suite(reps=MC_REPS, seed=DEFAULT_SEED, threads=1):
    settings = SolverSettings(seed=seed, threads=threads)
    details, violations = [], []
    for name, problem, exact in (("markov", markov_problem(), 5.0 / 9.0), ("square", square_problem(), 0.5)):
        certificate = solve_problem(problem, settings)
        grid = grid_bruteforce(problem, 101)
        cell = {"problem": name, "exact": exact, "upper": certificate.upper, "lower": certificate.lower, "grid": grid}
        details.append(cell)
        if abs(certificate.upper - exact) > 1e-3 or abs(grid - certificate.upper) > 0.02:
            violations.append(cell)

    spec = SamplerSpec(BERNOULLI, n=100, reps=reps, seed=seed, threads=threads, params={"p": 0.5})
    estimate = mc_tail(spec, 0.6)
    exact = float(binom.sf(59, 100, 0.5))
    cell = {"problem": "binomial tail", "exact": exact, **estimate.to_dict()}
    details.append(cell)
    if abs(estimate.p_hat - exact) > 4.0 * max(estimate.stderr, 1.0 / reps):
        violations.append(cell)
    return _report("oracle", len(details), violations, details)


SUITES = {
    "chernoff": chernoff_suite,
    "vector": vector_suite,
    "golden": golden_suite,
    "asymptotic": asymptotic_suite,
    "routh": routh_suite,
    "lp": lp_suite,
    "oracle": oracle_suite,
}


def run_suite(name, reps=MC_REPS, seed=DEFAULT_SEED, threads=1):
    if name not in SUITES:
        raise ParameterError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    if name in ("routh", "lp"):
        return SUITES[name](min(reps, 500), seed, threads)
    return SUITES[name](reps, seed, threads)
