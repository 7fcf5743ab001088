import numpy as np
import pytest

from services.errors import PolynomialError
from services.expressions import eval_point
from services.model import CERTIFIED, BoundCertificate, DiscreteDistribution
from services.routh import (Polynomial, build_stability_problem,
                            compare_with_reference, plant_coefficients,
                            plant_margin, routh_stable, routh_table)


def certificate(upper, lower=0.0):
    return BoundCertificate(upper, lower, DiscreteDistribution(()), 0, 0, 1e-5, CERTIFIED)


# --------- Routh criterion ---------

def test_repeated_root_quartic_is_stable():
    report = routh_stable(Polynomial([1, 4, 6, 4, 1]))
    assert report.stable and not report.marginal
    assert report.first_column == pytest.approx((1.0, 4.0, 5.0, 3.2, 1.0))


def test_unstable_quartic():
    report = routh_stable(Polynomial([1, 2, 3, 4, 5]))
    assert not report.stable
    assert report.margins[2] == -12.0
    assert report.margin_min == -12.0


def test_nominal_plant_margins():
    report = routh_stable(Polynomial([1, 20, 124, 1040, 1600]))
    assert report.stable
    assert report.margins == (20.0, 1440.0, 857600.0, 1600.0)


def test_sign_is_normalized():
    assert routh_stable(Polynomial([-1, -4, -6, -4, -1])).stable


def test_cubics():
    assert routh_stable(Polynomial(np.poly([-1.0, -2.0, -3.0]))).stable
    assert not routh_stable(Polynomial([1, 1, 2, 8])).stable


def test_imaginary_axis_roots_are_marginal():
    report = routh_stable(Polynomial([1, 0, 1]))
    assert not report.stable
    assert report.marginal
    assert len(routh_table([1.0, 0.0, 1.0])) == 2


def test_zero_leading_coefficient():
    with pytest.raises(PolynomialError) as caught:
        Polynomial([0, 1, 2])
    assert caught.value.code == "ZERO_LEADING_COEFF"


def test_agrees_with_root_locations():
    rng = np.random.default_rng(4)
    for _ in range(500):
        roots = rng.uniform(-3.0, 1.0, 2) + 1j * rng.uniform(0.1, 2.0, 2)
        coeffs = np.real(np.poly(np.concatenate([roots, roots.conj()])))
        report = routh_stable(Polynomial(coeffs))
        if min(abs(m) for m in report.margins) > 1e-9:
            assert report.stable == bool(np.all(roots.real < 0.0))


# --------- Uncertain plant ---------

def test_plant_coefficients_at_nominal_point():
    assert plant_coefficients([0.0, 0.0, 0.0]) == pytest.approx((20.0, 124.0, 1040.0, 1600.0))
    assert plant_margin([0.0, 0.0, 0.0]) == pytest.approx(20.0)
    assert routh_stable(Polynomial([1.0, *plant_coefficients([0.0, 0.0, 0.0])])).margins[1] == pytest.approx(1440.0)


def test_event_expression_equals_plant_margin():
    problem = build_stability_problem()
    eta = np.random.default_rng(2).uniform(-0.16, 0.16, (10_000, 3))
    np.testing.assert_allclose(eval_point(problem.event, eta), plant_margin(eta), rtol=1e-10)


def test_plant_is_stable_across_parameter_box():
    axis = np.linspace(-0.16, 0.16, 9)
    grid = np.array(np.meshgrid(axis, axis, axis)).reshape(3, -1).T
    assert np.min(plant_margin(grid)) > 0.0


def test_stability_problem_shape():
    problem = build_stability_problem()
    assert problem.dimension == 3
    assert problem.domain.lower == (-0.16, -0.16, -0.16)
    assert problem.moment_set.upper == (0.05, 0.05, 0.05)
    assert problem.is_probability


def test_reference_comparison():
    inside = compare_with_reference(certificate(3.0e-4, 2.9e-4))
    assert inside["in_window"] and "discrepancy" not in inside
    assert inside["reference"] == 0.00031
    empty = compare_with_reference(certificate(0.0))
    assert not empty["in_window"]
    assert "empty" in empty["discrepancy"]
