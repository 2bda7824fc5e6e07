import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hjhomog import (CoeffField, CoerciveTerm, ConfigurationError, DivergenceError, DriftTerm,
                     Field, HamiltonianSpec, SchemeConfig, SourceTerm, TorusGrid,
                     comparison_probe, constant_spec, evolve, numerical_hamiltonian)
from hjhomog.scheme import BoundHamiltonian, derive_dissipation, march, stable_dt

ONE = CoeffField.constant(1.0)
EIKONAL = HamiltonianSpec((CoerciveTerm(ONE),))


def test_config_validation():
    with pytest.raises(ConfigurationError):
        SchemeConfig(cfl=1.5)
    with pytest.raises(ConfigurationError):
        SchemeConfig(residual_tol=0)
    with pytest.raises(ConfigurationError):
        SchemeConfig(dissipation=(0.0,))


def test_flux_consistency(rng):
    spec = HamiltonianSpec((CoerciveTerm(ONE), DriftTerm(CoeffField.sin(1.0, kx=1, ky=-1)),
                            SourceTerm(CoeffField.cos(1.0, kt=1))))
    x, y, t = rng.uniform(0, 1, (3, 200))
    px, py = rng.uniform(-5, 5, (2, 200))
    val = numerical_hamiltonian(spec, x, y, t, (px, py), (px, py), (1.3, 2.0))
    assert np.array_equal(val, spec.eval(x, y, t, (px,), py))


def test_flux_formula():
    assert numerical_hamiltonian(EIKONAL, 0.0, 0.0, 0.0, (0.0,), (2.0,), (1.0,)) == 0.0


def test_flux_monotone(rng):
    spec = HamiltonianSpec((CoerciveTerm(CoeffField.cos(0.5, kx=1, mean=1.0)),
                            DriftTerm(CoeffField.sin(1.0, ky=1))))
    theta = (1.1 * 1.5, 1.1)
    for _ in range(1000):
        x, y, t = rng.uniform(0, 1, 3)
        left = rng.uniform(-5, 5, 2)
        right = rng.uniform(-5, 5, 2)
        base = numerical_hamiltonian(spec, x, y, t, tuple(left), tuple(right), theta)
        k = rng.integers(2)
        d = rng.uniform(0, 1)
        r2 = right.copy()
        r2[k] += d
        l2 = left.copy()
        l2[k] -= d
        assert numerical_hamiltonian(spec, x, y, t, tuple(left), tuple(r2), theta) <= base + 1e-12
        assert numerical_hamiltonian(spec, x, y, t, tuple(l2), tuple(right), theta) <= base + 1e-12


def test_zero_hamiltonian_returns_initial():
    g = TorusGrid((64,))
    v0 = Field.from_function(g, lambda x: np.sin(2 * np.pi * x))
    out = evolve(constant_spec(0.0), v0, 0.0, 3.7)
    assert np.array_equal(out.values, v0.values)


def test_eikonal_oleinik_lax():
    g = TorusGrid((256,))
    x = g.coords(0)
    v0 = Field(g, np.sin(2 * np.pi * x))
    T = 0.25
    out = evolve(EIKONAL, v0, 0.0, T)
    assert out.values[0] == pytest.approx(-1.0, abs=0.05)
    z = np.linspace(-T, T, 2001)
    oracle = np.array([np.min(np.sin(2 * np.pi * (xi + z))) for xi in x])
    assert np.max(np.abs(out.values - oracle)) <= 0.05


def test_linear_drift_translates():
    g = TorusGrid((8, 256), has_y=True)
    spec = HamiltonianSpec((DriftTerm(CoeffField.constant(0.5), "linear"),))
    v0 = Field.from_function(g, lambda x, y: np.sin(2 * np.pi * y) + 0 * x)
    out = evolve(spec, v0, 0.0, 1.0)
    _, y = g.mesh()
    assert np.max(np.abs(out.values - np.sin(2 * np.pi * (y - 0.5)))) <= 0.1


def test_constant_state_decreases_linearly():
    g = TorusGrid((16,))
    spec = HamiltonianSpec((CoerciveTerm(ONE), SourceTerm(CoeffField.constant(-0.75))))
    theta = derive_dissipation(spec, g, SchemeConfig())
    dt = stable_dt(g, theta, 0.5)
    v = march(np.full(16, 2.0), BoundHamiltonian(spec, g), g, theta, 0.0, dt, 1)
    assert np.all(v == 2.0 - 0.75 * dt)


def test_trajectory_rows():
    g = TorusGrid((8,))
    v0 = Field.from_function(g, lambda x: np.cos(2 * np.pi * x))
    out, traj = evolve(EIKONAL, v0, 0.0, 0.1, sample_times=(0.0, 0.05, 0.1))
    assert len(traj.samples) == 3
    rows = list(traj.rows())
    assert len(rows) == 24 and rows[0][:2] == (0.0, 0)
    assert np.array_equal(traj.samples[-1][1].values, out.values)


def test_divergence_names_step():
    g = TorusGrid((32,))
    v0 = Field.from_function(g, lambda x: np.sin(2 * np.pi * x))
    with pytest.raises(DivergenceError) as exc:
        evolve(HamiltonianSpec((CoerciveTerm(ONE, beta=2.0),)), v0, 0.0, 5.0,
               SchemeConfig(cfl=1.0, dissipation=(1e-3,)))
    assert exc.value.step is not None and exc.value.step >= 1


def test_comparison_equal_and_shifted():
    g = TorusGrid((32,))
    spec = HamiltonianSpec((CoerciveTerm(ONE), SourceTerm(CoeffField.sin(1.0, kx=1))))
    v0 = Field.from_function(g, lambda x: np.sin(2 * np.pi * x))
    assert comparison_probe(spec, v0, v0, 0.5)
    assert comparison_probe(spec, v0 - 1.0, v0, 0.5)
    ham = BoundHamiltonian(spec, g)
    theta = derive_dissipation(spec, g, SchemeConfig())
    dt = stable_dt(g, theta, 0.5)
    a = march(v0.values, ham, g, theta, 0.0, dt, 50)
    b = march(v0.values - 1.0, ham, g, theta, 0.0, dt, 50)
    assert np.allclose(a - b, 1.0, atol=1e-12)


def _smooth(grid, coeffs):
    x, y = grid.split_mesh()
    val = 0.0
    for amp, kx, ky, ph in coeffs:
        val = val + amp * np.cos(2 * np.pi * (kx * x[0] + ky * y) + ph)
    return np.broadcast_to(val, grid.shape)


mode = st.tuples(st.floats(-0.5, 0.5), st.integers(-2, 2), st.integers(-2, 2),
                 st.floats(0, 2 * math.pi))


@settings(max_examples=50, deadline=None)
@given(st.lists(mode, min_size=1, max_size=3), st.lists(mode, min_size=1, max_size=3),
       st.floats(0, 0.3))
def test_comparison_random_pairs(ma, mb, gap):
    g = TorusGrid((16, 16), has_y=True)
    spec = HamiltonianSpec((CoerciveTerm(ONE), DriftTerm(CoeffField.sin(1.0, kx=1, ky=-1)),
                            SourceTerm(CoeffField.cos(1.0, kt=1))))
    a, b = _smooth(g, ma), _smooth(g, mb)
    shift = max(0.0, float(np.max(a - b))) + gap + 1e-9
    assert comparison_probe(spec, Field(g, a - shift), Field(g, b), 0.2)
