"""
Shared fixtures for the test suite
"""

import pytest

from services.expressions import parse
from services.model import BoxRegion, MomentProblem
from services.suites import markov_problem, square_problem
from services.worst_case import SolverSettings


@pytest.fixture
def markov():
    return markov_problem()


@pytest.fixture
def square():
    return square_problem()


@pytest.fixture
def fast_settings():
    """Small search budget; enough for one- and two-dimensional toys"""
    return SolverSettings(multistarts=8, gradient_iters=100, seed=7)


@pytest.fixture
def disk_problem():
    """sup Pr{x1^2 + x2^2 >= 1} on [-1, 1]^2 with E x = 0"""
    return MomentProblem(
        BoxRegion([-1.0, -1.0], [1.0, 1.0]),
        [parse("x1", 2), parse("x2", 2)],
        BoxRegion([0.0, 0.0], [0.0, 0.0]),
        parse("1 - x1^2 - x2^2", 2),
    )
