import math

import numpy as np
import pytest

from services.errors import (InfeasibleProblemError, ParameterError,
                             ProblemError)
from services.expressions import eval_centered, eval_point, parse
from services.model import (CERTIFIED, HEURISTIC_ONLY, BoxRegion,
                            MomentProblem, check_distribution)
from services.worst_case import (INSIDE_C, MIXED, OUTSIDE_C, SolverSettings,
                                 SupportSearch, _certificate, classify_box,
                                 lagrangian, maximize_on_box, root_partition,
                                 solve_problem, sup_expectation,
                                 sup_probability, support_function)


def with_moment_set(problem, lower, upper):
    return MomentProblem(problem.domain, problem.moment_map, BoxRegion(lower, upper),
                         problem.event, problem.objective)


# --------- Building blocks ---------

def test_settings_validation():
    with pytest.raises(ParameterError):
        SolverSettings(multistarts=0)
    with pytest.raises(ParameterError):
        SolverSettings(seed=-1)


def test_classify_box():
    event = parse("0.9 - x1", 1)
    assert classify_box(event, BoxRegion([0.95], [1.0])) == INSIDE_C
    assert classify_box(event, BoxRegion([0.0], [0.5])) == OUTSIDE_C
    assert classify_box(event, BoxRegion([0.8], [1.0])) == MIXED


def test_root_partition_covers_domain():
    boxes = root_partition(BoxRegion([0.0, -1.0], [1.0, 1.0]))
    assert len(boxes) == 16
    assert sum(np.prod(b.widths) for b in boxes) == pytest.approx(2.0)


def test_lagrangian_and_support_function(square):
    expr = lagrangian(square, [2.0])
    assert eval_point(expr, [1.0]) == pytest.approx(-1.0)
    assert support_function(BoxRegion([-1.0, 0.0], [2.0, 3.0]), [1.0, -1.0]) == pytest.approx(2.0)


def test_maximize_on_box_brackets_maximum():
    f = parse("x1 * (1 - x1)", 1)
    upper, incumbent, explored = maximize_on_box(
        lambda box: eval_centered(f, box).hi, lambda x: eval_point(f, x),
        BoxRegion([0.0], [1.0]), 1e-6, 10_000)
    assert incumbent <= 0.25 + 1e-12
    assert 0.25 - 1e-12 <= upper <= 0.25 + 1e-6
    assert explored > 1


# --------- Expectation bounds ---------

def test_second_moment_with_fixed_mean(square, fast_settings):
    cert = sup_expectation(square, fast_settings)
    assert cert.status == CERTIFIED
    assert cert.upper == pytest.approx(0.5, abs=1e-4)
    assert cert.lower <= cert.upper
    assert cert.witness.support_size <= 2
    check_distribution(cert.witness, square)


def test_objective_pinned_by_constraint(fast_settings):
    problem = MomentProblem(BoxRegion([0.0], [1.0]), [parse("x1", 1)], BoxRegion([0.5], [0.5]),
                            objective=parse("x1", 1))
    cert = sup_expectation(problem, fast_settings)
    assert cert.upper == pytest.approx(0.5, abs=1e-4)
    assert cert.lower == pytest.approx(0.5, abs=1e-6)


def test_vacuous_moment_box_gives_unconstrained_maximum(square, fast_settings):
    cert = sup_expectation(with_moment_set(square, [0.0], [1.0]), fast_settings)
    assert cert.upper == pytest.approx(1.0, abs=1e-4)
    assert cert.lower == pytest.approx(1.0, abs=1e-6)


def test_infeasible_moments_raise(square, markov, fast_settings):
    with pytest.raises(InfeasibleProblemError):
        sup_expectation(with_moment_set(square, [2.0], [2.0]), fast_settings)
    with pytest.raises(InfeasibleProblemError):
        sup_probability(with_moment_set(markov, [2.0], [2.0]), fast_settings)


def test_objective_kind_must_match(markov, square, fast_settings):
    with pytest.raises(ProblemError):
        sup_expectation(markov, fast_settings)
    with pytest.raises(ProblemError):
        sup_probability(square, fast_settings)


# --------- Probability bounds ---------

def test_markov_extremal(markov, fast_settings):
    cert = sup_probability(markov, fast_settings)
    assert cert.status == CERTIFIED
    assert cert.upper == pytest.approx(5.0 / 9.0, abs=1e-4)
    assert cert.lower <= cert.upper + fast_settings.bnb_tol
    assert cert.witness.support_size <= 2
    check_distribution(cert.witness, markov)
    assert len(cert.programs) == 2


def test_empty_event_is_certified_zero(markov, fast_settings):
    problem = MomentProblem(markov.domain, markov.moment_map, markov.moment_set, parse("1", 1))
    cert = sup_probability(problem, fast_settings)
    assert cert.upper == 0.0
    assert cert.status == CERTIFIED
    assert any("EVENT_EMPTY" in note for note in cert.notes)


def test_disk_event_reaches_one(disk_problem, fast_settings):
    cert = sup_probability(disk_problem, fast_settings)
    assert cert.upper == pytest.approx(1.0)
    assert cert.lower >= 0.9
    assert cert.witness.support_size <= 3


def test_upper_bound_grows_with_moment_box(markov, fast_settings):
    uppers = []
    for delta in (0.0, 0.1, 0.2):
        cert = sup_probability(with_moment_set(markov, [0.5 - delta], [0.5 + delta]), fast_settings)
        uppers.append(cert.upper)
    assert uppers[0] <= uppers[1] + 1e-9 <= uppers[2] + 2e-9
    # (0.5 + delta) / 0.9 once the mean may move
    assert uppers[2] == pytest.approx(0.7 / 0.9, abs=1e-3)


def test_thread_count_does_not_change_result(markov):
    single = solve_problem(markov, SolverSettings(multistarts=8, gradient_iters=100, seed=3, threads=1))
    pooled = solve_problem(markov, SolverSettings(multistarts=8, gradient_iters=100, seed=3, threads=4))
    assert single.upper == pooled.upper
    assert single.lower == pooled.lower
    assert math.isfinite(single.upper)


def test_support_points_slide_to_the_event_boundary(markov, fast_settings):
    search = SupportSearch(markov, fast_settings, inside_count=1)
    found = search.run(np.array([[0.95], [0.1]]))
    assert found["inside_count"] == 1
    assert found["points"][0, 0] == pytest.approx(0.9, abs=1e-6)
    assert found["points"][1, 0] == pytest.approx(0.0, abs=1e-9)
    assert found["value"] == pytest.approx(5.0 / 9.0, abs=1e-6)


def test_blocked_point_does_not_freeze_the_others(markov, fast_settings):
    search = SupportSearch(markov, fast_settings, inside_count=1)
    previous = np.array([[0.95], [0.1]])
    projected = search.project(previous, np.array([[0.7], [0.0]]))
    assert projected[1, 0] == 0.0
    assert 0.9 <= projected[0, 0] <= 0.9 + 1e-9


@pytest.mark.slow
def test_markov_certified_with_default_settings(markov):
    cert = sup_probability(markov)
    assert cert.status == CERTIFIED
    assert cert.upper == pytest.approx(5.0 / 9.0, abs=1e-5)
    assert cert.lower == pytest.approx(5.0 / 9.0, abs=1e-5)


def test_violated_bracket_is_reported_not_hidden(markov):
    settings = SolverSettings()
    best = {
        "value": 0.9,
        "points": np.array([[0.9], [0.0]]),
        "theta": np.array([5.0 / 9.0, 4.0 / 9.0]),
        "multipliers": np.array([1.0 / 0.9]),
        "inside_count": 1,
        "iterations": 0,
    }
    cert = _certificate(markov, settings, best, (0.5, [], 16, []), [], 0, [])
    assert cert.status == HEURISTIC_ONLY
    assert cert.upper == 0.5
    assert cert.lower == 0.9
    assert any("bracket violated" in note for note in cert.notes)


def test_witness_on_the_wrong_side_is_noted(markov):
    best = {
        "value": 5.0 / 9.0,
        "points": np.array([[0.0], [0.9]]),
        "theta": np.array([4.0 / 9.0, 5.0 / 9.0]),
        "multipliers": np.array([1.0 / 0.9]),
        "inside_count": 1,
        "iterations": 0,
    }
    cert = _certificate(markov, SolverSettings(), best, (5.0 / 9.0, [], 16, []), [], 0, [])
    assert any("witness check" in note for note in cert.notes)
