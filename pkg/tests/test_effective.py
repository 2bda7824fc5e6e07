import numpy as np
import pytest

from hjhomog import (CoeffField, EffectiveTable, GraphSpec, HamiltonianSpec,
                     HullExitError, PGrid, SourceTerm, TorusGrid, effective_at,
                     homogeneity_check, interpolate, lift, shift, stability_check, tabulate)
from hjhomog.corpus import eikonal_sin, harmonic_graph
from hjhomog.effective import perturb_amplitudes, point_bounds, solve_points
from hjhomog.errors import ConfigurationError

ONE = CoeffField.constant(1.0)
G128 = TorusGrid((128,))


def kink(p):
    return max(1.0, abs(p))


# -- PGrid and interpolation --------------------------------------------------

def test_pgrid_points_first_axis_fastest():
    g = PGrid(((0.0, 1.0, 2), (5.0, 7.0, 3)))
    pts = g.points()
    assert pts.shape == (6, 2)
    np.testing.assert_array_equal(pts[:3, 0], [0.0, 1.0, 0.0])
    np.testing.assert_array_equal(pts[:, 1], [5, 5, 6, 6, 7, 7])


def test_pgrid_rejects_uneven_values():
    with pytest.raises(ConfigurationError):
        PGrid.from_values([0.0, 1.0, 3.0])


def test_interpolate_exact_at_lattice_points():
    g = PGrid.uniform(1, -2.0, 2.0, 0.5)
    table = EffectiveTable.from_function(kink, g)
    for p in g.coords(0):
        assert interpolate(table, [p]) == kink(p)


def test_interpolate_midpoint_is_exact():
    table = EffectiveTable(PGrid.from_values([0.0, 1.0]), [1.0, 2.0], "t")
    assert table(0.5) == 1.5


def test_interpolate_chord_error_at_kink():
    table = EffectiveTable.from_function(kink, PGrid.uniform(1, -2.0, 2.0, 0.5))
    assert abs(table(1.25) - 1.25) <= 0.125


def test_interpolate_bilinear_reproduces_bilinear_function():
    g = PGrid(((-1.0, 1.0, 5), (0.0, 2.0, 3)))
    table = EffectiveTable.from_function(lambda a, b: 1 + 2 * a - b + a * b, g)
    a, b = np.array([0.3, -0.7]), np.array([1.1, 0.25])
    np.testing.assert_allclose(table(a, b), 1 + 2 * a - b + a * b, atol=1e-12)


def test_interpolate_outside_hull_names_slope():
    table = EffectiveTable.from_function(kink, PGrid.uniform(1, -2.0, 2.0, 0.5))
    with pytest.raises(HullExitError) as info:
        table(2.5)
    assert "2.5" in str(info.value)


def test_table_csv_row_per_point():
    g = PGrid(((0.0, 1.0, 2), (0.0, 1.0, 3)))
    table = EffectiveTable.from_function(lambda a, b: a + b, g)
    rows = list(table.csv_rows())
    assert rows[0] == ("p0", "p1", "value", "method", "residual", "flags")
    assert len(rows) == 1 + 6
    assert table.values.size == np.prod(g.shape)


# -- single point solves ------------------------------------------------------

@pytest.mark.parametrize("P, expected", [(0.0, 1.0), (2.0, 2.0)])
def test_eikonal_point_values(P, expected):
    pt = effective_at(eikonal_sin(), G128, [P])
    assert abs(pt.value - expected) <= 0.05
    assert not pt.flagged


def test_drift_vanishing_at_zero_p_y(y_drift_l0):
    grid = TorusGrid((16, 16), has_y=True)
    for px in (-1.0, 0.5):
        pt = effective_at(y_drift_l0, grid, [px, 0.0])
        assert abs(pt.value - abs(px)) <= 0.02


def test_points_need_matching_components():
    with pytest.raises(ConfigurationError):
        solve_points(eikonal_sin(), G128, [[0.0, 1.0]], longtime=False)


# -- tabulation ---------------------------------------------------------------

def test_eikonal_table_matches_kink():
    table = tabulate(eikonal_sin(), G128, PGrid.from_values([-2, -1, 0, 1, 2]))
    np.testing.assert_allclose(table.values, [2, 1, 1, 1, 2], atol=0.05)
    assert table.warnings == []


def test_pure_source_table_is_constant():
    spec = HamiltonianSpec((SourceTerm(CoeffField.cos(1.0, kx=1, kt=1)),))
    table = tabulate(spec, TorusGrid((32,)), PGrid.from_values([-1, 0, 1]), cross_check=False)
    assert np.ptp(table.values) <= 0.02


def test_harmonic_lift_table():
    spec = lift(harmonic_graph())
    grid = TorusGrid((64, 8), has_y=True)
    table = tabulate(spec, grid, PGrid.from_values([-2, -1, 0, 1, 2], [-1.0, 0.0, 1.0]),
                     cross_check=False)
    expected = np.abs(table.p_grid.coords(0))[:, None] * np.ones((1, 3))
    np.testing.assert_allclose(table.values[[0, 1, 3, 4]], expected[[0, 1, 3, 4]], atol=0.05)


def test_table_values_respect_bounds():
    spec = eikonal_sin()
    g = PGrid.from_values([-1.5, 0.0, 1.5])
    table = tabulate(spec, G128, g, cross_check=False)
    lo, hi = point_bounds(spec, G128, g.points())
    assert np.all(lo - 0.05 <= table.values.ravel()) and np.all(table.values.ravel() <= hi + 0.05)


def test_chunking_does_not_change_table():
    g = PGrid.from_values([-1.0, 0.0, 1.0, 2.0])
    a = tabulate(eikonal_sin(), TorusGrid((32,)), g, cross_check=False)
    b = tabulate(eikonal_sin(), TorusGrid((32,)), g, cross_check=False, chunk=1, workers=2)
    np.testing.assert_array_equal(a.values, b.values)


# -- structural identities ----------------------------------------------------

def test_additive_equivariance():
    spec = eikonal_sin()
    pts = [[0.0], [1.5]]
    a = solve_points(spec, G128, pts, longtime=False)
    b = solve_points(spec.with_source(0.7), G128, pts, longtime=False)
    for x, y in zip(a, b):
        assert abs(y.value - (x.value + 0.7)) <= 2e-6 + 1e-9


def test_shift_identity():
    spec = eikonal_sin()
    shifted = shift(spec, (0.5, 0.0))
    a = effective_at(shifted, G128, [0.75], longtime=False)
    b = effective_at(spec, G128, [1.25], longtime=False)
    assert abs(a.value - b.value) <= 0.02


def test_homogeneity_pure_eikonal():
    spec = lift(GraphSpec(ONE, CoeffField.constant(0.0)))
    rep = homogeneity_check(spec, TorusGrid((16, 8), has_y=True))
    assert rep.passed and rep.max_deviation <= 1e-9


def test_lifted_value_at_zero_gradient():
    spec = lift(GraphSpec(ONE, CoeffField.cos(0.2, ky=1, mean=0.3)))
    pt = effective_at(spec, TorusGrid((16, 32), has_y=True), [0.0, 0.0], longtime=False)
    assert abs(pt.value) <= 1e-6


def test_homogeneity_requires_lifted_spec():
    with pytest.raises(ConfigurationError):
        homogeneity_check(eikonal_sin(), G128)


# -- stability ----------------------------------------------------------------

def test_zero_perturbation_is_identical():
    spec = eikonal_sin()
    assert perturb_amplitudes(spec, 0.0) == spec
    a = tabulate(spec, TorusGrid((32,)), PGrid.from_values([0.0, 1.0]), cross_check=False)
    b = tabulate(perturb_amplitudes(spec, 0.0), TorusGrid((32,)), PGrid.from_values([0.0, 1.0]),
                 cross_check=False)
    np.testing.assert_array_equal(a.values, b.values)


def test_scaled_source_tracks_delta():
    for d in (0.2, 0.1):
        pt = effective_at(eikonal_sin(d), G128, [0.0], longtime=False)
        assert abs(pt.value - (1 + d)) <= 0.05


def test_stability_report_on_analytic_spec():
    rep = stability_check(eikonal_sin(), G128)
    assert rep.passed
    for entry in rep.details[1:]:
        assert abs(entry["deviation"][0] - entry["delta"]) <= 0.05
