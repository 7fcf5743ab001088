import json
import math

import numpy as np
import pytest

from services.errors import ProblemError
from services.expressions import parse
from services.model import (CERTIFIED, BoundCertificate, BoxRegion,
                            DiscreteDistribution, InequalityResult,
                            MomentProblem, certificate_to_dict,
                            check_distribution, dump_problem, load_problem,
                            problem_from_dict, problem_to_dict,
                            validate_problem)
from services.routh import build_stability_problem


def test_stability_problem_is_valid():
    problem = validate_problem(build_stability_problem())
    assert problem.dimension == 3
    assert problem.moment_count == 3
    assert problem.is_probability


def test_inverted_domain_is_empty_box():
    with pytest.raises(ProblemError) as caught:
        MomentProblem(BoxRegion([1.0], [0.0]), [parse("x1", 1)], BoxRegion([0.0], [1.0]), parse("x1", 1))
    assert caught.value.code == "EMPTY_BOX"


def test_boxes_are_checked_on_construction():
    with pytest.raises(ProblemError) as caught:
        BoxRegion([0.0], [1.0]).inflate(-0.75)
    assert caught.value.code == "EMPTY_BOX"
    with pytest.raises(ProblemError) as caught:
        BoxRegion([0.0, 1.0], [1.0])
    assert caught.value.code == "DIM_MISMATCH"
    with pytest.raises(ProblemError):
        BoxRegion([0.0], [math.inf])
    left, right = BoxRegion([0.0], [1.0]).split()
    assert left.upper == right.lower == (0.5,)


def test_moment_count_must_match_moment_set():
    moments = [parse("x1", 1), parse("x1^2", 1), parse("x1^3", 1)]
    problem = MomentProblem(BoxRegion([0.0], [1.0]), moments, BoxRegion([0.0, 0.0], [1.0, 1.0]), parse("x1", 1))
    with pytest.raises(ProblemError) as caught:
        validate_problem(problem)
    assert caught.value.code == "DIM_MISMATCH"


def test_indicator_objective_needs_event():
    problem = MomentProblem(BoxRegion([0.0], [1.0]), [parse("x1", 1)], BoxRegion([0.0], [1.0]))
    with pytest.raises(ProblemError) as caught:
        validate_problem(problem)
    assert caught.value.code == "BAD_EXPR"


def test_variables_beyond_dimension_are_rejected():
    problem = MomentProblem(BoxRegion([0.0], [1.0]), [parse("x2", 2)], BoxRegion([0.0], [1.0]), parse("x1", 1))
    with pytest.raises(ProblemError):
        validate_problem(problem)


def test_box_split_and_contains():
    box = BoxRegion([0.0, 0.0], [2.0, 1.0])
    left, right = box.split()
    assert left.upper == (1.0, 1.0) and right.lower == (1.0, 0.0)
    assert box.contains([2.0, 1.0]) and not box.contains([2.1, 0.0])
    assert box.contains([2.0 + 1e-10, 0.0], tol=1e-9)
    np.testing.assert_allclose(box.clip([3.0, -1.0]), [2.0, 0.0])


def test_problem_document_round_trip(tmp_path, markov):
    path = tmp_path / "markov.json"
    dump_problem(markov, path)
    data = json.loads(path.read_text())
    assert data["schema"] == "v1"
    assert data["objective"] == "indicator"
    loaded = load_problem(path)
    assert problem_to_dict(loaded) == problem_to_dict(markov)


def test_problem_document_errors():
    with pytest.raises(ProblemError):
        problem_from_dict({"domain": {"lower": [0], "upper": [1]}})
    with pytest.raises(ProblemError):
        problem_from_dict({"schema": "v0", "domain": {"lower": [0], "upper": [1]},
                           "moments": ["x1"], "moment_set": {"lower": [0], "upper": [1]}, "event": "x1"})
    with pytest.raises(ProblemError) as caught:
        problem_from_dict({"domain": {"lower": [0], "upper": [1]}, "moments": ["x1 +"],
                           "moment_set": {"lower": [0], "upper": [1]}, "event": "x1"})
    assert caught.value.code == "BAD_EXPR"


def test_invalid_json_is_a_problem_error(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(ProblemError):
        load_problem(path)


def test_distribution_expectations(markov):
    dist = DiscreteDistribution([((0.0,), 4.0 / 9.0), ((0.9,), 5.0 / 9.0)])
    assert dist.support_size == 2
    assert dist.expectation(parse("x1", 1)) == pytest.approx(0.5)
    assert dist.probability_of_event(markov.event) == pytest.approx(5.0 / 9.0)
    check_distribution(dist, markov)


def test_check_distribution_rejects_bad_witnesses(markov):
    with pytest.raises(AssertionError):
        check_distribution(DiscreteDistribution([((0.0,), 0.5), ((1.0,), 0.4)]))
    with pytest.raises(AssertionError):
        check_distribution(DiscreteDistribution.point_mass((0.2,)), markov)
    with pytest.raises(AssertionError):
        check_distribution(DiscreteDistribution([((1.5,), 1.0)]), markov)


def test_check_distribution_enforces_event_sides(markov):
    ordered = DiscreteDistribution([((0.9,), 5.0 / 9.0), ((0.0,), 4.0 / 9.0)])
    check_distribution(ordered, markov, inside_count=1)
    # 0.5 is outside {x >= 0.9} but listed first
    swapped = DiscreteDistribution([((0.5,), 0.5), ((0.95,), 0.0), ((0.5,), 0.5)])
    with pytest.raises(AssertionError, match="inside the event"):
        check_distribution(swapped, markov, max_points=3, inside_count=1)
    crossing = DiscreteDistribution([((0.9,), 5.0 / 9.0), ((0.95,), 0.0), ((0.0,), 4.0 / 9.0)])
    with pytest.raises(AssertionError, match="outside the event"):
        check_distribution(crossing, markov, max_points=3, inside_count=1)


def test_certificate_document_maps_infinities_to_null():
    cert = BoundCertificate(math.inf, -math.inf, DiscreteDistribution(()), 0, 0, 1e-5, CERTIFIED)
    data = certificate_to_dict(cert)
    assert data["upper"] is None and data["lower"] is None
    json.dumps(data, allow_nan=False)


def test_inequality_result_clips():
    result = InequalityResult.from_rate(math.log(1.340640) / 100, samples=100)
    assert result.bound == pytest.approx(1.340640)
    assert result.clipped_bound == 1.0
    overflow = InequalityResult.from_rate(10.0, samples=100)
    assert overflow.bound == math.inf
    json.dumps(overflow.to_dict(), allow_nan=False)
