import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hjhomog import ConfigurationError, Field, TorusGrid, oscillation, reduce_max_over_y
from hjhomog.grid import sup_distance


def test_grid_validation():
    with pytest.raises(ConfigurationError):
        TorusGrid((4,))
    with pytest.raises(ConfigurationError):
        TorusGrid((16, 16, 16))
    with pytest.raises(ConfigurationError):
        TorusGrid((16,), periods=(0.0,))


def test_spacing_and_wrap():
    g = TorusGrid((16, 32), has_y=True, periods=(2.0, 1.0))
    assert g.spacing == (2.0 / 16, 1.0 / 32)
    assert g.space_dims == 1 and g.ndim == 2
    assert g.wrap((-1, 33)) == (15, 1)
    assert g.x_grid().cells == (16,)


def test_field_rejects_bad_values():
    g = TorusGrid((8,))
    with pytest.raises(ConfigurationError):
        Field(g, np.zeros(9))
    with pytest.raises(ConfigurationError):
        Field(g, np.full(8, np.nan))


def test_flat_layout_x_fastest():
    g = TorusGrid((8, 16), has_y=True)
    vals = np.arange(g.size, dtype=float).reshape(g.shape)
    f = Field(g, vals)
    flat = f.flat()
    assert flat[1] == vals[1, 0]
    assert flat[8] == vals[0, 1]
    assert np.array_equal(Field.from_flat(g, flat).values, vals)


def test_reduce_constant():
    g = TorusGrid((16, 16), has_y=True)
    out = reduce_max_over_y(Field.constant(g, 3.0))
    assert out.grid.cells == (16,) and np.all(out.values == 3.0)


def test_reduce_sine_hits_one():
    g = TorusGrid((8, 64), has_y=True)
    f = Field.from_function(g, lambda x, y: np.sin(2 * np.pi * y) + 0 * x)
    assert np.all(reduce_max_over_y(f).values == 1.0)


def test_reduce_brute_force():
    g = TorusGrid((16, 24), has_y=True)
    f = Field.from_function(g, lambda x, y: np.cos(2 * np.pi * x) + y * (1 - y))
    out = reduce_max_over_y(f).values
    for i in range(16):
        assert out[i] == max(f.values[i, j] for j in range(24))


def test_reduce_needs_y():
    with pytest.raises(ConfigurationError):
        reduce_max_over_y(Field.constant(TorusGrid((8,)), 1.0))


def test_oscillation_examples():
    g = TorusGrid((64,))
    assert oscillation(Field.constant(g, 5.0)) == 0.0
    assert oscillation(np.array([-1.0, 0.0, 2.0])) == 3.0
    f = Field.from_function(g, lambda x: np.sin(2 * np.pi * x))
    assert oscillation(f) == 2.0


@settings(max_examples=50, deadline=None)
@given(arrays(np.int64, 16, elements=st.integers(-1000, 1000)), st.integers(-10**6, 10**6))
def test_oscillation_translation_exact_on_integers(vals, c):
    g = TorusGrid((16,))
    f = Field(g, vals.astype(float))
    assert oscillation(f + float(c)) == oscillation(f)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, 16, elements=st.floats(-1e3, 1e3)), st.floats(-1e3, 1e3))
def test_oscillation_translation_general(vals, c):
    g = TorusGrid((16,))
    f = Field(g, vals)
    assert oscillation(f + c) == pytest.approx(oscillation(f), abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, (8, 12), elements=st.floats(-1e6, 1e6)))
def test_reduce_dominates_every_slice(vals):
    g = TorusGrid((8, 12), has_y=True)
    f = Field(g, vals)
    red = reduce_max_over_y(f).values
    for j in range(12):
        assert np.all(red >= vals[:, j])
    assert np.array_equal(red, vals[:, ::-1].max(axis=1))


def test_sup_distance_coarsest_lattice():
    a = Field.from_function(TorusGrid((16,)), lambda x: x)
    b = Field.from_function(TorusGrid((64,)), lambda x: x + 0.5)
    assert sup_distance(a, b) == pytest.approx(0.5)
    with pytest.raises(ConfigurationError):
        sup_distance(a, Field.constant(TorusGrid((16,), periods=(2.0,)), 0.0))
