import math

import numpy as np
import pytest

from LAB_HELPERS.LAB_errors import EnumerationBudgetError, FitError, InputError, UnsupportedDimensionError
from MODELS.MORSE_RR.morse_rr import (
    LatticePolytope, RadialMetricSpec, case_ii_audit, count_sections, curvature_integrals,
    morse_upper_bound, rr_leading_fit,
)


def test_counts_of_standard_polytopes():
    square = LatticePolytope.unit_cube(2)
    simplex = LatticePolytope.unit_simplex(2)
    for k in (0, 1, 2, 7):
        assert count_sections(square, k) == (k + 1) ** 2
        assert count_sections(simplex, k) == (k + 1) * (k + 2) // 2
    assert count_sections(LatticePolytope.unit_simplex(3), 4) == math.comb(7, 3)
    assert count_sections(LatticePolytope([[0], [3]]), 2) == 7
    with pytest.raises(InputError):
        count_sections(square, -1)


@pytest.mark.parametrize("polytope, volume", [
    (LatticePolytope.unit_cube(2), 1.0),
    (LatticePolytope.unit_simplex(2), 0.5),
    (LatticePolytope([[0, 0], [2, 0], [0, 1], [2, 1]]), 2.0),
])
def test_leading_coefficient_is_the_volume(polytope, volume):
    fit = rr_leading_fit(polytope, 50)
    assert fit["within_tolerance"]
    assert fit["leading_coefficient"] == pytest.approx(volume, rel=1e-2)
    assert fit["simplex_normalized_volume"] == pytest.approx(polytope.normalized_volume)
    assert fit["ehrhart_difference_max"] < 1e-9
    assert [row["k"] for row in fit["rows"]] == list(range(1, 51))


def test_short_fit_is_rejected():
    with pytest.raises(FitError):
        rr_leading_fit(LatticePolytope.unit_cube(2), 4)


def test_enumeration_budget():
    with pytest.raises(EnumerationBudgetError):
        count_sections(LatticePolytope.unit_cube(3), 1000, budget=1e6)


def test_polytope_validation(tmp_path):
    with pytest.raises(InputError):
        LatticePolytope([[0, 0], [0.5, 1], [1, 0]])
    with pytest.raises(InputError):
        LatticePolytope([[0, 0], [1, 1], [2, 2]])
    with pytest.raises(UnsupportedDimensionError):
        LatticePolytope.unit_cube(4)
    path = tmp_path / "triangle.txt"
    path.write_text("# a lattice triangle\n0, 0\n2 0\n0 2  # apex\n")
    triangle = LatticePolytope.from_file(str(path))
    assert triangle.volume == pytest.approx(2.0)
    assert triangle.simplex_volume() == pytest.approx(2.0)
    assert LatticePolytope.unit_cube(3).simplex_volume() == pytest.approx(1.0)


@pytest.mark.parametrize("n", [1, 2])
def test_untwisted_metric_is_positive(n):
    spec = RadialMetricSpec(dimension=n)
    restricted, total = curvature_integrals(spec)
    assert total == pytest.approx(1.0, abs=1e-8)
    assert restricted == pytest.approx(total, abs=1e-10)
    assert bool(np.all(spec.in_X0(np.geomspace(1e-6, 1e3, 50))))


def test_twisted_metric_has_negative_band():
    spec = RadialMetricSpec(dimension=1, amplitude=0.2, width=0.1)
    assert not bool(spec.in_X0(0.0))
    restricted, total = curvature_integrals(spec)
    assert total == pytest.approx(1.0, abs=1e-6)
    assert restricted > 1.0 + 1e-3


def test_morse_bound_and_exact_count():
    report = morse_upper_bound(RadialMetricSpec(dimension=2), 10)
    assert report["exact_count"] == 66
    assert report["bound"] == pytest.approx(50.0, rel=1e-6)
    with pytest.raises(InputError):
        morse_upper_bound(RadialMetricSpec(), -1)
    with pytest.raises(InputError):
        RadialMetricSpec(width=0.0)


def test_case_ii_implied_constant():
    report = case_ii_audit(LatticePolytope.unit_cube(2), [0.8], 0.01)
    assert report["int_beta_n"] == pytest.approx(2.0, rel=1e-6)
    assert report["implied_C_lower"] == pytest.approx(2.0 / 0.66, rel=1e-4)
    assert report["within_budget"]
    assert report["passed"]


def test_case_ii_over_budget():
    report = case_ii_audit(LatticePolytope.unit_cube(2), [1.5], 0.01)
    assert not report["within_budget"]
    assert report["passed"] is None
    with pytest.raises(InputError):
        case_ii_audit(LatticePolytope.unit_cube(2), [0.5], -0.1)


def test_case_ii_morse_sandwich():
    report = case_ii_audit(LatticePolytope([[0], [1]]), [0.5], 0.01, morse_spec=RadialMetricSpec(dimension=1))
    assert report["morse_sandwich"]["consistent"]
    assert report["morse_sandwich"]["morse_leading"] == pytest.approx(1.0, abs=1e-8)


def count_by_orientation(vertices, k):
    """Lattice points of k conv(vertices) by a double loop and edge orientation; vertices counterclockwise."""
    scaled = [(k * x, k * y) for x, y in vertices]
    xs = [p[0] for p in scaled]
    ys = [p[1] for p in scaled]
    edges = list(zip(scaled, scaled[1:] + scaled[:1]))
    count = 0
    for x in range(min(xs), max(xs) + 1):
        for y in range(min(ys), max(ys) + 1):
            if all((bx - ax) * (y - ay) - (by - ay) * (x - ax) >= 0 for (ax, ay), (bx, by) in edges):
                count += 1
    return count


@pytest.mark.parametrize("vertices", [
    [(0, 0), (3, 1), (1, 2)],
    [(0, 0), (2, 0), (3, 2), (1, 3)],
])
def test_counts_match_direct_loop(vertices):
    polytope = LatticePolytope(vertices)
    for k in range(8):
        assert count_sections(polytope, k) == count_by_orientation(vertices, k)
