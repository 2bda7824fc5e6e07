import math

import numpy as np
import pytest

from hjhomog import (AnalyticHamiltonian, CoeffField, CoerciveTerm, EffectiveTable,
                     GraphSpec, HamiltonianSpec, HullExitError, PGrid, ResolutionError,
                     SourceTerm, TorusGrid, convergence_study, effective_H, graph_pipeline,
                     longtime_slope, solve_fine, solve_graph, solve_homogenized, sup_distance)
from hjhomog.corpus import eikonal_sin, graph_a, harmonic_graph
from hjhomog.errors import ConfigurationError
from hjhomog.multiscale import default_p_grid, effective_H_table, required_cells
from hjhomog.scheme import SchemeConfig

ONE = CoeffField.constant(1.0)
ZERO = CoeffField.constant(0.0)
SIN = CoeffField.sin(1.0, kx=1)
KINK = AnalyticHamiltonian(lambda p: np.maximum(1.0, np.abs(p)), 1.0, "max(1,|p|)")


# -- resolution and preconditions ---------------------------------------------

def test_under_resolved_grid_names_required_cells():
    with pytest.raises(ResolutionError) as info:
        solve_fine(eikonal_sin(), 0.125, SIN, 0.1, TorusGrid((128,)))
    assert "256" in str(info.value)
    assert required_cells(TorusGrid((128,)), 0.125) == (256,)


def test_epsilon_must_divide_unity():
    with pytest.raises(ConfigurationError):
        solve_fine(eikonal_sin(), 0.3, SIN, 0.1, TorusGrid((512,)))


def test_zero_time_returns_initial_data():
    grid = TorusGrid((32,))
    out = solve_fine(eikonal_sin(), 1.0, SIN, 0.0, grid)
    np.testing.assert_array_equal(out.values, SIN(grid.split_mesh()[0]))


# -- fine and homogenized solves ----------------------------------------------

def test_no_fast_variables_matches_homogenized():
    spec = HamiltonianSpec((CoerciveTerm(ONE), SourceTerm(CoeffField.constant(0.5))))
    eff = AnalyticHamiltonian(lambda p: np.abs(p) - 0.5, 1.0)
    grid = TorusGrid((256,))
    for eps in (0.25, 0.125):
        Ue = solve_fine(spec, eps, SIN, 0.25, grid)
        U = solve_homogenized(eff, SIN, 0.25, grid)
        assert sup_distance(Ue, U) <= 1e-12


def test_constant_table_shifts_data():
    grid = TorusGrid((64,))
    table = EffectiveTable(PGrid.from_values([-8.0, 0.0, 8.0]), [0.7, 0.7, 0.7], "const")
    U = solve_homogenized(table, SIN, 0.3, grid)
    np.testing.assert_allclose(U.values, SIN(grid.split_mesh()[0]) - 0.7 * 0.3, atol=1e-12)


def test_table_matches_direct_evaluation():
    grid = TorusGrid((128,))
    table = EffectiveTable.from_function(KINK, PGrid.uniform(1, -8.0, 8.0, 0.5))
    U_tab = solve_homogenized(table, SIN, 0.25, grid)
    U_dir = solve_homogenized(KINK, SIN, 0.25, grid, SchemeConfig(dissipation=(1.1,)))
    assert sup_distance(U_tab, U_dir) <= 0.02


def test_homogenized_hull_exit():
    table = EffectiveTable.from_function(KINK, PGrid.uniform(1, -2.0, 2.0, 0.5))
    with pytest.raises(HullExitError):
        solve_homogenized(table, SIN, 0.1, TorusGrid((64,)))


def test_fine_solve_approaches_homogenized():
    grid = TorusGrid((512,))
    Ue = solve_fine(eikonal_sin(), 0.125, SIN, 0.25, grid)
    U = solve_homogenized(KINK, SIN, 0.25, grid)
    assert sup_distance(Ue, U) <= 0.15


def test_convergence_study_analytic_oracle():
    rep = convergence_study(eikonal_sin(), SIN, 0.25, effective=KINK)
    assert rep.monotone and rep.passed
    assert len(rep.errors) == 3 and all(e >= 0 for e in rep.errors)
    rows = list(rep.csv_rows())
    assert rows[0] == ("epsilon", "error", "decay_factor", "cells")


def test_convergence_study_without_fast_variables():
    spec = HamiltonianSpec((CoerciveTerm(ONE),))
    eff = AnalyticHamiltonian(np.abs, 1.0)
    rep = convergence_study(spec, SIN, 0.25, effective=eff)
    assert max(rep.errors) <= 0.02


def test_convergence_study_rejects_low_resolution():
    with pytest.raises(ResolutionError):
        convergence_study(eikonal_sin(), SIN, 0.25, effective=KINK, cells_per_period=16)


def test_default_p_grid_covers_initial_slopes():
    g = default_p_grid(SIN, 1)
    lo, hi, _ = g.axes[0]
    assert hi >= 2 * math.pi and lo <= -2 * math.pi


# -- graph equation -----------------------------------------------------------

def test_graph_without_u_dependence_is_fine_solve():
    c = CoeffField.cos(0.25, kx=1, kt=1, mean=1.0)
    grid = TorusGrid((128,))
    a = solve_graph(GraphSpec(c, ZERO), 0.25, SIN, 0.2, grid)
    b = solve_fine(HamiltonianSpec((CoerciveTerm(c),)), 0.25, SIN, 0.2, grid)
    np.testing.assert_array_equal(a.values, b.values)


def test_graph_constant_forcing_oleinik_lax():
    gamma, T = 0.3, 0.1
    grid = TorusGrid((256,))
    u = solve_graph(GraphSpec(ONE, CoeffField.constant(gamma)), 0.125, SIN, T, grid)
    x = grid.split_mesh()[0][0]
    z = np.linspace(-T, T, 2001)
    exact = np.min(np.sin(2 * np.pi * (x[:, None] + z[None, :])), axis=1) - gamma * T
    assert np.max(np.abs(u.values - exact)) <= 0.05


def test_graph_rejects_y_grid():
    with pytest.raises(ConfigurationError):
        solve_graph(graph_a(), 0.25, ZERO, 0.1, TorusGrid((128, 8), has_y=True))


def test_effective_H_harmonic_mean():
    assert abs(effective_H(harmonic_graph(), 1.0, longtime=False) - 1.0) <= 0.05


def test_effective_H_exact_corrector():
    gamma = 0.4
    graph = GraphSpec(ONE, CoeffField.constant(gamma))
    for p in (0.0, 1.5):
        assert abs(effective_H(graph, p, longtime=False) - (p + gamma)) <= 0.02


def test_effective_H_table_shape():
    table = effective_H_table(GraphSpec(ONE, ZERO), [-1.0, 0.0, 1.0], cross_check=False)
    np.testing.assert_allclose(table.values, [1.0, 0.0, 1.0], atol=0.02)


def test_longtime_slope_pure_eikonal():
    assert abs(longtime_slope(GraphSpec(ONE, ZERO), 1, cells_per_unit=32) + 1.0) <= 0.05


def test_longtime_slope_constant_forcing():
    s = longtime_slope(GraphSpec(ONE, CoeffField.constant(0.25)), 0, cells_per_unit=32)
    assert abs(s + 0.25) <= 0.02


def test_longtime_slope_matches_lift_at_zero():
    graph = graph_a()
    s = longtime_slope(graph, 0, cells_per_unit=32)
    h = effective_H(graph, 0.0, longtime=False)
    assert 0.1 - 0.05 <= h <= 0.5 + 0.05
    assert abs(h + s) <= 0.05


@pytest.mark.parametrize("p", [math.sqrt(2) / 3, 1 / 9])
def test_longtime_slope_rejects_bad_slopes(p):
    with pytest.raises(ConfigurationError):
        longtime_slope(graph_a(), p)


def test_graph_pipeline_result_records():
    res = graph_pipeline(GraphSpec(ONE, CoeffField.constant(0.2)), slopes=(0, 0.5),
                         cells_per_unit=32)
    assert [(r.p_num, r.p_den) for r in res] == [(0, 1), (1, 2)]
    assert all(r.passed for r in res)
    assert res[1].csv_row()[:2] == (1, 2)
