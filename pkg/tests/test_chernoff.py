import math

import numpy as np
import pytest

from services.chernoff import (CumulantSpec, admissible_range,
                               asymptotic_check, bernoulli_cumulant,
                               bounded_variance_cumulant,
                               centered_coin_cumulant, chernoff_at,
                               chernoff_inf, crossing_boundary,
                               normal_cumulant, poisson_cumulant,
                               uniform_bound_bernoulli,
                               uniform_bound_bounded_variance,
                               uniform_bound_normal, uniform_bound_poisson)
from services.errors import NonConvexError, ParameterError
from services.expressions import eval_point
from services.search import central_derivative


def kl_rate(mu, theta):
    """-KL(theta || mu) for Bernoulli laws"""
    return theta * math.log(mu / theta) + (1.0 - theta) * math.log((1.0 - mu) / (1.0 - theta))


def bennett_rate(b, nu, eps):
    total = b * b + nu
    return -((nu + b * eps) / total) * math.log1p(b * eps / nu) - ((b * b - b * eps) / total) * math.log1p(-eps / b)


# --------- Generic engine ---------

def test_quadratic_cumulant():
    result = chernoff_inf(CumulantSpec.from_text("s^2/2", -10, 10), 1.0)
    assert result.zeta == pytest.approx(1.0, abs=1e-8)
    assert result.bound == pytest.approx(math.exp(-0.5), abs=1e-10)


def test_coin_cumulant_matches_closed_form():
    result = chernoff_inf(CumulantSpec.from_text("ln(0.5*exp(s) + 0.5)", -50, 50), 0.6)
    assert result.zeta == pytest.approx(math.log(1.5), abs=1e-8)
    assert result.bound == pytest.approx(math.exp(kl_rate(0.5, 0.6)), rel=1e-9)
    assert result.bound == pytest.approx(0.980064, abs=2e-5)


def test_poisson_cumulant_matches_closed_form():
    result = chernoff_inf(poisson_cumulant(1.0), 2.0)
    assert result.zeta == pytest.approx(math.log(2.0), abs=1e-8)
    assert result.bound == pytest.approx(math.exp(1.0 - 2.0 * math.log(2.0)), rel=1e-9)


@pytest.mark.parametrize("cumulant, closed", [
    (bernoulli_cumulant(0.3), lambda m: uniform_bound_bernoulli(0.3, 0.45, m)),
    (normal_cumulant(0.0, 2.0), lambda m: uniform_bound_normal(0.0, 2.0, 0.45, m)),
    (poisson_cumulant(0.2), lambda m: uniform_bound_poisson(0.2, 0.45, m)),
])
def test_engine_agrees_with_closed_forms(cumulant, closed):
    for m in (1, 5, 20):
        engine = chernoff_inf(cumulant, 0.45, m)
        exact = closed(m)
        assert engine.bound == pytest.approx(exact.bound, rel=1e-8)
        assert engine.zeta == pytest.approx(exact.zeta, abs=1e-6)


def test_bennett_cumulant_matches_closed_form():
    engine = chernoff_inf(bounded_variance_cumulant(1.0, 1.0), 0.5)
    exact = uniform_bound_bounded_variance(1.0, 1.0, 0.5, 1)
    assert engine.bound == pytest.approx(exact.bound, rel=1e-8)


def test_eps_outside_admissible_range():
    coin = bernoulli_cumulant(0.5)
    left, right = admissible_range(coin)
    assert 0.0 < left < 0.02 and 0.95 < right < 1.0
    with pytest.raises(ParameterError) as caught:
        chernoff_inf(coin, 1.5)
    assert caught.value.code == "EPS_OUT_OF_RANGE"


def test_nonconvex_phi_is_rejected():
    with pytest.raises(NonConvexError) as caught:
        chernoff_inf(CumulantSpec.from_text("-s^2", -1, 1), 0.1)
    assert caught.value.code == "NONCONVEX_PHI"


def test_cumulant_domain_must_contain_zero():
    with pytest.raises(ParameterError):
        CumulantSpec.from_text("s^2", 0.5, 1.0)


def test_fixed_s_is_never_below_infimum():
    c = poisson_cumulant(1.0)
    best = chernoff_inf(c, 2.0, 3)
    for s in (0.1, 0.5, 1.0, 2.0):
        assert chernoff_at(c, 2.0, s, 3).bound >= best.bound * (1.0 - 1e-12)


def test_boundary_slope_lies_between_mean_and_eps():
    result = chernoff_inf(bernoulli_cumulant(0.3), 0.5)
    slope = result.details["ratio_phi_zeta"]
    assert 0.3 < slope < 0.5


def test_crossing_boundary_starts_at_m_theta():
    result = uniform_bound_bernoulli(0.5, 0.6, 20)
    line = crossing_boundary(result, 0.6, 20)
    assert eval_point(line, [20.0]) == pytest.approx(12.0)
    assert eval_point(line, [21.0]) - eval_point(line, [20.0]) == pytest.approx(result.details["ratio_phi_zeta"])


# --------- Closed forms ---------

def test_bernoulli_examples():
    assert uniform_bound_bernoulli(0.5, 0.5, 7).bound == pytest.approx(1.0)
    result = uniform_bound_bernoulli(0.5, 0.6, 10)
    assert result.bound == pytest.approx(math.exp(10.0 * kl_rate(0.5, 0.6)), rel=1e-12)
    assert result.bound == pytest.approx(0.817633, abs=2e-5)
    assert result.zeta == pytest.approx(math.log(1.5), abs=1e-12)
    far = uniform_bound_bernoulli(0.5, 0.9, 1).bound
    assert far == pytest.approx(math.exp(kl_rate(0.5, 0.9)), rel=1e-12)
    assert far == pytest.approx(0.692067, abs=2e-5)


def test_bounded_variance_examples():
    result = uniform_bound_bounded_variance(1.0, 1.0, 0.5, 1)
    assert result.bound == pytest.approx(math.exp(bennett_rate(1.0, 1.0, 0.5)), rel=1e-12)
    assert result.bound == pytest.approx(0.877385, abs=2e-5)
    assert result.zeta == pytest.approx(0.5 * math.log(3.0), abs=1e-12)
    assert uniform_bound_bounded_variance(1.0, 1.0, 1e-9, 1).bound == pytest.approx(1.0, abs=1e-8)
    assert uniform_bound_bounded_variance(1.0, 1.0, 1.0 - 1e-12, 1).bound == pytest.approx(0.5, abs=1e-6)
    edge = uniform_bound_bounded_variance(1.0, 1.0, 1.0, 1)
    assert edge.bound == pytest.approx(0.5) and edge.zeta is None


def test_normal_examples():
    assert uniform_bound_normal(0.3, 1.0, 0.3, 4).bound == 1.0
    result = uniform_bound_normal(0.0, 1.0, 1.0, 1)
    assert result.bound == pytest.approx(math.exp(-0.5), rel=1e-12) and result.zeta == 1.0
    assert uniform_bound_normal(0.0, 1.0, 1.0, 4).bound == pytest.approx(math.exp(-2.0), rel=1e-12)


def test_poisson_examples():
    assert uniform_bound_poisson(1.5, 1.5, 3).bound == pytest.approx(1.0)
    result = uniform_bound_poisson(1.0, 2.0, 1)
    assert result.bound == pytest.approx(math.exp(1.0 - 2.0 * math.log(2.0)), rel=1e-12)
    assert result.bound == pytest.approx(0.679570, abs=2e-5)
    assert result.zeta == pytest.approx(math.log(2.0))
    low = uniform_bound_poisson(2.0, 1.0, 1)
    assert low.bound == pytest.approx(math.exp(math.log(2.0) - 1.0), rel=1e-12)
    assert low.zeta == pytest.approx(-math.log(2.0))


@pytest.mark.parametrize("call", [
    lambda: uniform_bound_bernoulli(0.0, 0.5, 1),
    lambda: uniform_bound_bernoulli(0.5, 1.0, 1),
    lambda: uniform_bound_bernoulli(0.5, 0.6, 0),
    lambda: uniform_bound_bounded_variance(1.0, 1.0, 1.5, 1),
    lambda: uniform_bound_normal(0.0, 0.0, 1.0, 1),
    lambda: uniform_bound_poisson(1.0, -1.0, 1),
])
def test_closed_form_parameter_errors(call):
    with pytest.raises(ParameterError):
        call()


@pytest.mark.parametrize("b, nu_m, eps", [(1.0, 1.0, 1.5), (1.0, 0.0, 0.5), (-1.0, 1.0, 0.5)])
def test_bounded_variance_rejects_parameters_with_range_code(b, nu_m, eps):
    with pytest.raises(ParameterError) as caught:
        uniform_bound_bounded_variance(b, nu_m, eps, 1)
    assert caught.value.code == "PARAM_OUT_OF_RANGE"


# --------- Small-deviation behaviour ---------

def test_gaussian_cumulant_is_exactly_quadratic():
    for report in asymptotic_check(normal_cumulant(0.0, 0.5), 0.5, 0.0, [0.1, 0.2]):
        assert report.zeta == pytest.approx(report.epsilon / 0.5, abs=1e-7)
        assert report.ratio_phi_zeta == pytest.approx(report.epsilon / 2.0, abs=1e-7)
        assert report.rate == pytest.approx(report.gaussian_rate, abs=1e-12)


def test_centered_coin_near_gaussian():
    (report,) = asymptotic_check(centered_coin_cumulant(), 0.25, 0.0, [0.05])
    assert report.zeta == pytest.approx(0.200671, abs=1e-5)
    assert report.rate == pytest.approx(-0.00500837, abs=1e-8)
    assert report.gaussian_rate == pytest.approx(-0.005)
    assert report.ratio_phi_zeta == pytest.approx(0.0250418, abs=1e-6)


def test_third_moment_correction():
    # centred Poisson(1): sigma^2 = 1, third cumulant 1
    c = CumulantSpec.from_text("exp(s) - 1 - s", -30, 30)
    (report,) = asymptotic_check(c, 1.0, 1.0, [0.1])
    assert report.corrected_rate == pytest.approx(-0.005 + 0.001 / 6.0, rel=1e-12)
    assert report.rate == pytest.approx(-(1.1 * math.log(1.1) - 0.1), abs=1e-10)
    assert abs(report.corrected_rate - report.rate) < abs(report.gaussian_rate - report.rate) / 10.0


# --------- Properties ---------

@pytest.mark.parametrize("cumulant, eps", [
    (bernoulli_cumulant(0.3), 0.6),
    (poisson_cumulant(1.5), 0.4),
    (bounded_variance_cumulant(2.0, 0.5), 1.2),
    (centered_coin_cumulant(), 0.1),
])
def test_minimizer_is_stationary(cumulant, eps):
    result = chernoff_inf(cumulant, eps)
    lo, hi = cumulant.edges
    assert central_derivative(cumulant, result.zeta, lo, hi) == pytest.approx(eps, abs=1e-6)


def _random_cells(rng):
    mu = rng.uniform(0.1, 0.8)
    yield bernoulli_cumulant(mu), rng.uniform(mu + 0.02, 0.95), lambda t, m: uniform_bound_bernoulli(mu, t, m)
    mean, var = rng.uniform(-1.0, 1.0), rng.uniform(0.2, 3.0)
    theta = mean + rng.uniform(0.05, 2.0)
    yield normal_cumulant(mean, var), theta, lambda t, m: uniform_bound_normal(mean, var, t, m)
    lam = rng.uniform(0.2, 3.0)
    yield poisson_cumulant(lam), lam * rng.uniform(1.1, 4.0), lambda t, m: uniform_bound_poisson(lam, t, m)
    b, nu = rng.uniform(0.5, 2.0), rng.uniform(0.2, 2.0)
    yield (bounded_variance_cumulant(b, nu), b * rng.uniform(0.1, 0.8),
           lambda e, m: uniform_bound_bounded_variance(b, nu, e, m))


def test_closed_forms_agree_on_random_draws():
    rng = np.random.default_rng(11)
    for _ in range(100):
        m = int(rng.integers(1, 21))
        for cumulant, eps, closed in _random_cells(rng):
            exact = closed(eps, m)
            engine = chernoff_inf(cumulant, eps, m)
            assert engine.bound == pytest.approx(exact.bound, rel=1e-8)
            assert engine.zeta == pytest.approx(exact.zeta, abs=1e-6)


def test_bounds_shrink_with_samples_and_deviation():
    by_m = [uniform_bound_bernoulli(0.3, 0.5, m).bound for m in (1, 2, 5, 10, 40)]
    by_theta = [uniform_bound_bernoulli(0.3, theta, 5).bound for theta in (0.35, 0.4, 0.5, 0.7, 0.9)]
    assert by_m == sorted(by_m, reverse=True)
    assert by_theta == sorted(by_theta, reverse=True)
    engine = [chernoff_inf(poisson_cumulant(1.0), eps, 3).bound for eps in (1.2, 1.5, 2.0, 3.0)]
    assert engine == sorted(engine, reverse=True)
