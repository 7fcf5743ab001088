import math

import pytest

from services.search import (golden_section, grid_scan, minimize_convex,
                             minimize_with_prescan)


def test_golden_section_brackets_minimizer():
    c, d = golden_section(lambda x: (x - 0.3) ** 2, -1.0, 2.0, tol=1e-9)
    assert d - c <= 1e-9 * 1.01
    assert c - 1e-9 <= 0.3 <= d + 1e-9


def test_minimize_convex_refines_to_stationary_point():
    x, value = minimize_convex(lambda s: math.exp(s) - 2.0 * s, -5.0, 5.0)
    assert x == pytest.approx(math.log(2.0), abs=1e-9)
    assert value == pytest.approx(2.0 - 2.0 * math.log(2.0), abs=1e-12)


def test_minimum_at_an_endpoint():
    x, value = minimize_convex(lambda s: s, 1.0, 3.0)
    assert x == 1.0 and value == 1.0


def test_grid_scan_uses_interior_points():
    xs, values = grid_scan(lambda s: s * s, 0.0, 1.0, 3)
    assert list(xs) == pytest.approx([0.25, 0.5, 0.75])
    assert list(values) == pytest.approx([0.0625, 0.25, 0.5625])


def test_prescan_finds_minimum_of_piecewise_function():
    def f(s):
        return min((s - 0.05) ** 2 - 1.0, 0.1 * (s - 0.7) ** 2 - 0.5)

    x, value = minimize_with_prescan(f, 0.0, 1.0, 64)
    assert x == pytest.approx(0.05, abs=1e-6)
    assert value == pytest.approx(-1.0, abs=1e-10)
