"""Monotone Lax-Friedrichs marching for ``v_t + G(x, y, t, Dv) = 0`` on the torus.

The numerical Hamiltonian is

    G(x, t, (p- + p+)/2) - sum_k theta_k (p+_k - p-_k)/2,

with one-sided differences ``p-``/``p+`` and per-axis dissipation
``theta_k >= max |dG/dp_k|``.  Forward Euler with
``dt * (sum_k theta_k/h_k + alpha) <= cfl <= 1`` keeps every update
nondecreasing in all neighbouring values.

Arrays handled here may carry leading batch axes in front of the grid axes;
all stencils act on the trailing ``grid.ndim`` axes only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DivergenceError
from .grid import Field, TorusGrid
from .hamiltonians import (CoeffEvaluator, CoerciveTerm, DriftTerm, HamiltonianSpec,
                           _as_tuple)

DISSIPATION_MARGIN = 1.1


@dataclass(frozen=True)
class SchemeConfig:
    cfl: float = 0.5
    dissipation: tuple[float, ...] | None = None
    gradient_probe_radius: float = 20.0
    residual_tol: float = 1e-6
    max_steps: int = 2_000_000

    def __post_init__(self):
        if not 0 < self.cfl <= 1:
            raise ConfigurationError(f"cfl must lie in (0, 1], got {self.cfl}")
        if self.residual_tol <= 0:
            raise ConfigurationError("residual_tol must be positive")
        if self.dissipation is not None and any(th <= 0 for th in self.dissipation):
            raise ConfigurationError("explicit dissipation coefficients must be positive")
        if self.max_steps < 1:
            raise ConfigurationError("max_steps must be positive")


class BoundHamiltonian:
    """A spec frozen onto grid coordinates, optionally with fast-scale coefficients.

    ``offsets`` adds a batch of gradient shifts: an array ``(B, n + 1)`` whose rows
    are ``(P_x..., P_y)``; evaluations then carry a leading batch axis of size B.
    """

    def __init__(self, spec: HamiltonianSpec, grid: TorusGrid, scale: float = 1.0,
                 offsets=None):
        if spec.depends_on_y and not grid.has_y:
            raise ConfigurationError("spec depends on y but the grid has no y-axis")
        n = grid.space_dims
        if spec.space_dims_hint() > n and spec.depends_on_x:
            raise ConfigurationError("spec has more x-dimensions than the grid")
        self.spec = spec
        self.grid = grid
        self.scale = float(scale)
        x, y = grid.split_mesh()
        shape = grid.shape
        self._terms = []
        for term in spec.terms:
            if isinstance(term, CoerciveTerm):
                ev = CoeffEvaluator(term.a, x, 0.0, scale)
            elif isinstance(term, DriftTerm):
                ev = CoeffEvaluator(term.b, x, y, scale)
            else:
                ev = CoeffEvaluator(term.f, x, 0.0, scale)
            self._terms.append((term, ev))
        self.depends_on_t = spec.depends_on_t
        sx = _as_tuple(spec.shift_x, n)[:n] if spec.shift_x else (0.0,) * n
        self._shift_x = tuple(float(s) for s in sx)
        self._shift_y = spec.shift_y
        self.batch = None
        if offsets is not None:
            off = np.atleast_2d(np.asarray(offsets, dtype=float))
            if off.shape[1] != n + 1:
                raise ConfigurationError(f"offsets need {n + 1} columns, got {off.shape[1]}")
            expand = (slice(None),) + (None,) * grid.ndim
            self._shift_x = tuple(s + off[:, k][expand] for k, s in enumerate(self._shift_x))
            self._shift_y = self._shift_y + off[:, n][expand]
            self.batch = off.shape[0]
        self.shape = shape

    def __call__(self, t, v, q_x, q_y):
        q_x = tuple(q + s for q, s in zip(q_x, self._shift_x))
        q_y = q_y + self._shift_y
        val = 0.0
        for term, ev in self._terms:
            c = ev(t)
            if isinstance(term, CoerciveTerm):
                norm = np.abs(q_x[0]) if len(q_x) == 1 else np.sqrt(sum(q * q for q in q_x))
                val = val + c * (norm if term.beta == 1 else norm ** term.beta)
            elif isinstance(term, DriftTerm):
                arg = q_y + term.offset
                val = val + c * (np.abs(arg) if term.shape == "absolute" else arg)
            else:
                val = val - c
        return val


def _coefficient_max(coeff, n, depends_t, samples=64):
    s = np.arange(samples) / samples
    ts = s if depends_t else np.zeros(1)
    axes = [s] * n + [s, ts]
    mesh = np.meshgrid(*axes, indexing="ij", sparse=True)
    return float(np.max(np.abs(coeff(tuple(mesh[:n]), mesh[n], mesh[n + 1]))))


def derive_dissipation(spec: HamiltonianSpec, grid: TorusGrid, cfg: SchemeConfig,
                       extra_shift: float = 0.0) -> tuple[float, ...]:
    """Per-axis dissipation: sampled ``max |dG/dp|`` over the probe box plus 10%.

    Axes on which ``G`` does not depend get ``0``.
    """
    if cfg.dissipation is not None:
        th = tuple(float(v) for v in cfg.dissipation)
        if len(th) != grid.ndim:
            raise ConfigurationError(f"need {grid.ndim} dissipation coefficients, got {len(th)}")
        return th
    n = grid.space_dims
    dep_t = spec.depends_on_t
    th_x = 0.0
    th_y = 0.0
    for term in spec.terms:
        if isinstance(term, CoerciveTerm):
            amax = _coefficient_max(term.a, n, dep_t)
            radius = cfg.gradient_probe_radius + float(np.linalg.norm(spec.shift_x)) + extra_shift
            th_x += amax * term.beta * (radius ** (term.beta - 1) if term.beta != 1 else 1.0)
        elif isinstance(term, DriftTerm):
            th_y += _coefficient_max(term.b, n, dep_t)
    th = [DISSIPATION_MARGIN * th_x] * n
    if grid.has_y:
        th.append(DISSIPATION_MARGIN * th_y)
    return tuple(th)


def stable_dt(grid: TorusGrid, theta, cfl: float, alpha: float = 0.0) -> float:
    """Largest step with ``dt * (sum theta_k / h_k + alpha) <= cfl``.

    The transport part is floored at unit speed on the finest axis so that
    degenerate (gradient-free) Hamiltonians still march with a finite step.
    """
    h = grid.spacing
    rate = sum(th / hk for th, hk in zip(theta, h))
    rate = max(rate, 1.0 / min(h))
    return cfl / (rate + alpha)


def _slopes(v, grid: TorusGrid):
    """One-sided differences along each grid axis: lists of ``(p-, p+)``."""
    out = []
    nd = grid.ndim
    for k, h in enumerate(grid.spacing):
        ax = v.ndim - nd + k
        plus = (np.roll(v, -1, axis=ax) - v) / h
        minus = np.roll(plus, 1, axis=ax)
        out.append((minus, plus))
    return out


def lf_flux(ham, t, v, grid: TorusGrid, theta):
    """Lax-Friedrichs numerical Hamiltonian at every node of ``v``."""
    sl = _slopes(v, grid)
    avg = [0.5 * (m + p) for m, p in sl]
    n = grid.space_dims
    q_x = tuple(avg[:n])
    q_y = avg[n] if grid.has_y else 0.0
    val = ham(t, v, q_x, q_y)
    for th, (m, p) in zip(theta, sl):
        if th:
            val = val - 0.5 * th * (p - m)
    return val


def numerical_hamiltonian(spec: HamiltonianSpec, x, y, t, left_slopes, right_slopes, theta):
    """Pointwise flux ``G(x,y,t,(l+r)/2) - sum theta (r-l)/2``.

    ``left_slopes``/``right_slopes``/``theta`` list the x-axes first, then y
    (if present).  Vectorized over array inputs.
    """
    left = _as_tuple(left_slopes)
    right = _as_tuple(right_slopes)
    theta = _as_tuple(theta)
    if not len(left) == len(right) == len(theta):
        raise ConfigurationError("slopes and dissipation need one entry per axis")
    avg = [0.5 * (np.asarray(a) + np.asarray(b)) for a, b in zip(left, right)]
    x = tuple(x) if isinstance(x, (tuple, list)) else (x,)
    n = len(x)
    q_y = avg[n] if len(avg) > n else 0.0
    val = spec.eval(x, y, t, tuple(avg[:n]), q_y)
    for th, a, b in zip(theta, left, right):
        val = val - 0.5 * th * (np.asarray(b) - np.asarray(a))
    return val


def march(v, ham, grid: TorusGrid, theta, t0: float, dt: float, nsteps: int,
          alpha: float = 0.0, callback=None):
    """Forward-Euler steps ``v <- v - dt (flux(v) + alpha v)``.

    ``callback(k, t, v)`` runs after each step with the new values.  Raises
    :class:`DivergenceError` on the first step producing non-finite values.
    """
    v = np.array(v, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        return _march(v, ham, grid, theta, t0, dt, nsteps, alpha, callback)


def _march(v, ham, grid, theta, t0, dt, nsteps, alpha, callback):
    for k in range(nsteps):
        t = t0 + k * dt
        rhs = lf_flux(ham, t, v, grid, theta)
        if alpha:
            rhs = rhs + alpha * v
        v = v - dt * rhs
        if not math.isfinite(float(np.sum(v))):
            raise DivergenceError(
                f"non-finite values at step {k + 1} (t={t + dt:.6g}); "
                "check CFL number and dissipation", step=k + 1)
        if callback is not None:
            callback(k + 1, t + dt, v)
    return v


@dataclass
class Trajectory:
    """Snapshots ``(t, Field)`` recorded during :func:`evolve`."""

    samples: list = field(default_factory=list)

    def rows(self):
        """CSV rows ``(t, i_0, ..., value)`` in lexicographic node order."""
        for t, f in self.samples:
            idx = np.indices(f.grid.shape).reshape(f.grid.ndim, -1, order="F")
            for col, val in zip(idx.T, f.flat()):
                yield (t, *col.tolist(), float(val))


def evolve(spec, v0: Field, t0: float, T: float, cfg: SchemeConfig | None = None, *,
           scale: float = 1.0, theta=None, sample_times=(), ham=None):
    """March ``v_t + G = 0`` from ``v0`` at ``t0`` over a horizon ``T``.

    ``scale`` evaluates coefficients at ``(x, y, t)/scale``.  When
    ``sample_times`` is non-empty a ``(Field, Trajectory)`` pair is returned.
    A ready-made ``ham(t, v, q_x, q_y)`` callable may replace ``spec``
    (then ``theta`` is required).
    """
    cfg = cfg or SchemeConfig()
    grid = v0.grid
    if ham is None:
        ham = BoundHamiltonian(spec, grid, scale)
        if theta is None:
            theta = derive_dissipation(spec, grid, cfg)
    elif theta is None:
        raise ConfigurationError("an explicit Hamiltonian callable needs theta")
    if T < 0:
        raise ConfigurationError("horizon must be nonnegative")
    traj = Trajectory()
    pending = sorted(float(s) for s in sample_times)
    if T == 0:
        for s in pending:
            traj.samples.append((t0, v0))
        return (v0, traj) if sample_times else v0
    dt_max = stable_dt(grid, theta, cfg.cfl)
    nsteps = max(1, math.ceil(T / dt_max - 1e-12))
    if nsteps > cfg.max_steps:
        raise ConfigurationError(f"{nsteps} steps needed, max_steps={cfg.max_steps}")
    dt = T / nsteps

    def record(k, t, v):
        while pending and t >= t0 + pending[0] - 1e-12:
            pending.pop(0)
            traj.samples.append((t, Field(grid, v)))

    if pending and pending[0] <= 0:
        record(0, t0, v0.values)
    v = march(v0.values, ham, grid, theta, t0, dt, nsteps,
              callback=record if pending else None)
    out = Field(grid, v)
    return (out, traj) if sample_times else out


def comparison_probe(spec, u0: Field, v0: Field, T: float, cfg: SchemeConfig | None = None,
                     *, scale: float = 1.0, theta=None, ham=None) -> bool:
    """Check that ``u0 <= v0`` stays ordered at every step of the marching."""
    if not np.all(u0.values <= v0.values):
        raise ConfigurationError("comparison_probe needs u0 <= v0 nodewise")
    cfg = cfg or SchemeConfig()
    grid = u0.grid
    if ham is None:
        ham = BoundHamiltonian(spec, grid, scale)
        theta = theta or derive_dissipation(spec, grid, cfg)
    dt_max = stable_dt(grid, theta, cfg.cfl)
    nsteps = max(1, math.ceil(T / dt_max - 1e-12))
    dt = T / nsteps
    ordered = True

    def check(k, t, w):
        nonlocal ordered
        if ordered and not np.all(w[0] <= w[1]):
            ordered = False

    march(np.stack([u0.values, v0.values]), ham, grid, theta, 0.0, dt, nsteps, callback=check)
    return ordered
