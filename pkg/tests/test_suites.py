import numpy as np
import pytest

from services.errors import ParameterError
from services.suites import (SUITES, asymptotic_suite, golden_suite,
                             lp_suite, random_quartic, routh_suite, run_suite)


def test_golden_suite_passes():
    report = golden_suite()
    assert report["suite"] == "golden"
    assert report["violations"] == []
    assert report["cells"] == len(report["details"])


def test_asymptotic_suite_passes():
    report = asymptotic_suite()
    assert report["violations"] == []
    assert all(cell["rate_contraction"] >= 6.0 for cell in report["details"])


def test_routh_suite_passes():
    report = routh_suite(reps=500, seed=3)
    assert report["violations"] == []
    assert report["cells"] == 501


def test_lp_suite_passes():
    assert lp_suite(reps=100, seed=3)["violations"] == []


def test_random_quartic_is_monic_quartic():
    coeffs, stable = random_quartic(np.random.default_rng(0))
    assert len(coeffs) == 5 and coeffs[0] == 1.0
    assert isinstance(stable, bool)


def test_unknown_suite():
    with pytest.raises(ParameterError):
        run_suite("nope")


def test_every_suite_is_registered():
    assert set(SUITES) == {"chernoff", "vector", "golden", "asymptotic", "routh", "lp", "oracle"}


def test_small_chernoff_run_reports_every_cell():
    report = run_suite("chernoff", reps=200, seed=1)
    assert report["cells"] == 80
    assert len(report["details"]) == 80
    for label in ("bernoulli", "normal", "poisson", "bounded-variance"):
        assert sum(cell["bound"] == label for cell in report["details"]) >= 20
    assert all(0.0 <= cell["p_hat"] <= 1.0 for cell in report["details"])


@pytest.mark.slow
@pytest.mark.parametrize("name", ["chernoff", "vector"])
def test_dominance_suites(name):
    report = run_suite(name, reps=20_000, seed=17, threads=2)
    assert report["violations"] == []


@pytest.mark.slow
def test_oracle_suite():
    report = run_suite("oracle", reps=20_000, seed=17)
    assert report["violations"] == []


def test_small_vector_run_covers_every_bound():
    report = run_suite("vector", reps=200, seed=1)
    assert report["cells"] == 60
    names = {cell["bound"] for cell in report["details"]}
    assert {"iid-bounded", "variance-range", "martingale", "componentwise"} <= names
    assert sum(cell["bound"] == "componentwise" for cell in report["details"]) == 20


@pytest.mark.slow
@pytest.mark.parametrize("name", ["chernoff", "vector"])
def test_worker_count_does_not_change_suite_output(name):
    single = run_suite(name, reps=2_500, seed=5, threads=1)
    pooled = run_suite(name, reps=2_500, seed=5, threads=4)
    assert single == pooled
