"""Fine-scale versus homogenized solves, and the graph-equation pipeline.

Two experiments live here.  The first compares ``U^eps`` (coefficients
evaluated at ``(x, y, t)/eps``) against ``U`` driven by a tabulated or
closed-form effective Hamiltonian.  The second checks that the effective
Hamiltonian of a lifted graph spec, read at ``(p, -1)``, matches minus the
long-time slope of the graph equation started from linear data ``p . x``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .effective import EffectiveTable, PGrid, effective_at, tabulate
from .errors import ConfigurationError, ResolutionError
from .grid import Field, TorusGrid, sup_distance
from .hamiltonians import CoeffField, CoerciveTerm, GraphSpec, HamiltonianSpec, lift
from .scheme import (DISSIPATION_MARGIN, BoundHamiltonian, SchemeConfig, derive_dissipation,
                     march, stable_dt)

CELLS_PER_PERIOD = 32
DEFAULT_EPSILONS = (0.25, 0.125, 0.0625)
MAX_DENOMINATOR = 8


# ---------------------------------------------------------------------------
# helpers

def _check_epsilon(eps: float) -> int:
    if eps <= 0:
        raise ConfigurationError(f"epsilon must be positive, got {eps}")
    inv = round(1.0 / eps)
    if abs(inv * eps - 1.0) > 1e-9:
        raise ConfigurationError(f"1/epsilon must be an integer, got epsilon={eps}")
    return inv


def required_cells(grid: TorusGrid, eps: float) -> tuple[int, ...]:
    """Cells per axis needed to put ``CELLS_PER_PERIOD`` nodes in each fast period."""
    return tuple(math.ceil(CELLS_PER_PERIOD * p / eps - 1e-9) for p in grid.periods)


def check_resolution(grid: TorusGrid, eps: float) -> None:
    need = required_cells(grid, eps)
    if any(c < r for c, r in zip(grid.cells, need)):
        raise ResolutionError(
            f"grid {grid.cells} under-resolves epsilon={eps}: need at least {need} cells",
            required_cells=need)


def sample_initial(u0, grid: TorusGrid) -> Field:
    """Initial data from a :class:`CoeffField` (y-slot used for the y-axis), a Field or a callable."""
    if isinstance(u0, Field):
        if u0.grid != grid:
            raise ConfigurationError("initial field lives on a different grid")
        return u0
    if isinstance(u0, CoeffField):
        x, y = grid.split_mesh()
        return Field(grid, np.broadcast_to(u0(x, y, 0.0), grid.shape))
    return Field.from_function(grid, u0)


def _slope_bound(u0: CoeffField) -> tuple[list[float], float]:
    """Closed-form bounds on ``|d u0/dx_k|`` and ``|d u0/dy|``."""
    n = max(u0.x_dims, 1)
    bx = [0.0] * n
    by = 0.0
    for m in u0.modes:
        for k, kk in enumerate(m.kx):
            bx[k] += abs(m.amplitude) * 2 * math.pi * abs(kk)
        by += abs(m.amplitude) * 2 * math.pi * abs(m.ky)
    return bx, by


def _steps(T: float, dt_max: float, cfg: SchemeConfig) -> tuple[int, float]:
    nsteps = max(1, math.ceil(T / dt_max - 1e-12))
    if nsteps > cfg.max_steps:
        raise ConfigurationError(f"{nsteps} steps needed, max_steps={cfg.max_steps}")
    return nsteps, T / nsteps


# ---------------------------------------------------------------------------
# experiment A

def solve_fine(spec: HamiltonianSpec, eps: float, u0, T: float, grid: TorusGrid | None = None,
               cfg: SchemeConfig | None = None) -> Field:
    """``U^eps`` at time ``T`` with coefficients evaluated at ``(x, y, t)/eps``.

    ``u0`` may be a Field (its grid is used) or a CoeffField sampled on ``grid``.
    Raises :class:`ResolutionError` when fewer than 32 nodes fall in a fast period.
    """
    cfg = cfg or SchemeConfig()
    _check_epsilon(eps)
    if grid is None:
        if not isinstance(u0, Field):
            raise ConfigurationError("solve_fine needs a grid when u0 is not a Field")
        grid = u0.grid
    check_resolution(grid, eps)
    v0 = sample_initial(u0, grid)
    if T == 0:
        return v0
    ham = BoundHamiltonian(spec, grid, scale=eps)
    theta = derive_dissipation(spec, grid, cfg)
    nsteps, dt = _steps(T, stable_dt(grid, theta, cfg.cfl), cfg)
    return Field(grid, march(v0.values, ham, grid, theta, 0.0, dt, nsteps))


class AnalyticHamiltonian:
    """Closed-form effective Hamiltonian with a declared Lipschitz bound per axis."""

    def __init__(self, func, lipschitz, name: str = "analytic"):
        self.func = func
        self.lipschitz = tuple(np.atleast_1d(np.asarray(lipschitz, dtype=float)).tolist())
        self.name = name

    def __call__(self, *P):
        return self.func(*P)


def _homogenized_theta(effective, grid: TorusGrid, cfg: SchemeConfig):
    if cfg.dissipation is not None:
        return tuple(cfg.dissipation)
    lip = getattr(effective, "lipschitz", None)
    if lip is None:
        raise ConfigurationError("effective Hamiltonian needs a 'lipschitz' attribute")
    lip = tuple(np.atleast_1d(lip).tolist())
    if len(lip) == 1 and grid.ndim > 1:
        lip = lip * grid.ndim
    if len(lip) != grid.ndim:
        raise ConfigurationError(f"need {grid.ndim} Lipschitz bounds, got {len(lip)}")
    return tuple(DISSIPATION_MARGIN * float(l) for l in lip)


def solve_homogenized(effective, u0, T: float, grid: TorusGrid | None = None,
                      cfg: SchemeConfig | None = None) -> Field:
    """``U_t + Fbar(DU) = 0`` with ``Fbar`` an :class:`EffectiveTable` or an analytic callable.

    Table evaluation raises :class:`~hjhomog.errors.HullExitError` as soon as a
    slope leaves the tabulated box.
    """
    cfg = cfg or SchemeConfig()
    if grid is None:
        if not isinstance(u0, Field):
            raise ConfigurationError("solve_homogenized needs a grid when u0 is not a Field")
        grid = u0.grid
    v0 = sample_initial(u0, grid)
    if T == 0:
        return v0
    theta = _homogenized_theta(effective, grid, cfg)

    def ham(t, v, q_x, q_y):
        args = tuple(q_x) + ((q_y,) if grid.has_y else ())
        return effective(*args)

    nsteps, dt = _steps(T, stable_dt(grid, theta, cfg.cfl), cfg)
    return Field(grid, march(v0.values, ham, grid, theta, 0.0, dt, nsteps))


@dataclass
class ConvergenceReport:
    epsilons: list
    errors: list
    decay_factors: list
    horizon: float
    cells: list
    reference_cells: tuple
    cells_per_period: int = CELLS_PER_PERIOD
    min_decay: float = 1.3
    meta: dict = field(default_factory=dict)

    @property
    def monotone(self) -> bool:
        return all(b < a for a, b in zip(self.errors, self.errors[1:]))

    @property
    def passed(self) -> bool:
        return self.monotone and all(d >= self.min_decay for d in self.decay_factors)

    def to_dict(self) -> dict:
        return {"epsilons": self.epsilons, "errors": self.errors,
                "decay_factors": self.decay_factors, "horizon": self.horizon,
                "cells": [list(c) for c in self.cells],
                "reference_cells": list(self.reference_cells),
                "cells_per_period": self.cells_per_period, "min_decay": self.min_decay,
                "monotone": self.monotone, "passed": self.passed, **self.meta}

    def csv_rows(self):
        yield ("epsilon", "error", "decay_factor", "cells")
        for i, (e, err) in enumerate(zip(self.epsilons, self.errors)):
            dec = self.decay_factors[i - 1] if i > 0 else ""
            yield (e, err, dec, "x".join(str(c) for c in self.cells[i]))


def _grid_for(template: TorusGrid, eps: float, per: int = CELLS_PER_PERIOD) -> TorusGrid:
    cells = tuple(math.ceil(per * p / eps - 1e-9) for p in template.periods)
    return TorusGrid(cells, template.has_y, template.periods)


def default_p_grid(u0: CoeffField, dims: int, step: float = 0.25) -> PGrid:
    """Symmetric table box covering the initial slopes plus one step of margin."""
    bx, by = _slope_bound(u0)
    bounds = (bx + [0.0] * dims)[:dims - 1] + [by] if dims > 1 else bx[:1]
    axes = []
    for b in bounds:
        r = step * (math.ceil(b / step + 1e-9) + 1)
        cnt = int(round(2 * r / step)) + 1
        axes.append((-r, r, cnt))
    return PGrid(tuple(axes))


def convergence_study(spec: HamiltonianSpec, u0: CoeffField, T: float = 0.25,
                      epsilons=DEFAULT_EPSILONS, *, effective=None, has_y: bool | None = None,
                      table_cells: int = CELLS_PER_PERIOD, p_grid: PGrid | None = None,
                      cfg: SchemeConfig | None = None, min_decay: float = 1.3,
                      cells_per_period: int = CELLS_PER_PERIOD,
                      table_kwargs: dict | None = None) -> ConvergenceReport:
    """``||U^eps - U||_inf`` at time ``T`` for decreasing ``epsilons``.

    Each fine grid follows the resolution rule; ``U`` is solved once on the
    finest of them and errors are taken on the coarsest common lattice.
    ``cells_per_period`` below the resolution rule makes the fine solves fail
    with :class:`ResolutionError`.  When
    ``effective`` is omitted the effective Hamiltonian is tabulated on a cell
    grid with ``table_cells`` nodes per axis, which matches the per-period
    resolution of the fine solves.
    """
    cfg = cfg or SchemeConfig()
    eps = [float(e) for e in epsilons]
    if len(eps) < 2 or any(b >= a for a, b in zip(eps, eps[1:])):
        raise ConfigurationError("epsilons must be a strictly decreasing sequence of length >= 2")
    for e in eps:
        _check_epsilon(e)
    if has_y is None:
        has_y = spec.uses_py or spec.depends_on_y
    n = max(spec.space_dims_hint(), u0.x_dims, 1)
    unit = TorusGrid((CELLS_PER_PERIOD,) * (n + int(has_y)), has_y)
    grids = [_grid_for(unit, e, cells_per_period) for e in eps]
    for e, g in zip(eps, grids):
        check_resolution(g, e)
    meta = {}
    if effective is None:
        cell_grid = TorusGrid((table_cells,) * (n + int(has_y)), has_y)
        p_grid = p_grid or default_p_grid(u0, n + int(has_y))
        effective = tabulate(spec, cell_grid, p_grid, cfg, **(table_kwargs or {}))
        meta["table"] = effective.header()
    elif isinstance(effective, EffectiveTable):
        meta["table"] = effective.header()
    else:
        meta["effective"] = getattr(effective, "name", "analytic")
    ref_grid = grids[-1]
    U = solve_homogenized(effective, u0, T, ref_grid, cfg)
    errors = []
    for e, g in zip(eps, grids):
        Ue = solve_fine(spec, e, u0, T, g, cfg)
        errors.append(sup_distance(Ue, U))
    decay = [a / b if b > 0 else math.inf for a, b in zip(errors, errors[1:])]
    return ConvergenceReport(eps, errors, decay, float(T), [g.cells for g in grids],
                             ref_grid.cells, cells_per_period, min_decay, meta)


# ---------------------------------------------------------------------------
# experiment B: graph equation

def _u_lipschitz(g: CoeffField) -> float:
    """Bound on ``|dg/du|`` from the Fourier modes."""
    if g.reciprocal:
        raise ConfigurationError("reciprocal forcing g is not supported")
    return sum(abs(m.amplitude) * 2 * math.pi * abs(m.ky) for m in g.modes)


class _GraphHamiltonian:
    """``c(x/eps, t/eps)|q + p| + g((v + p.x)/eps, t/eps)`` on grid nodes."""

    def __init__(self, graph: GraphSpec, grid: TorusGrid, eps: float = 1.0, p=None):
        self.base = BoundHamiltonian(HamiltonianSpec((CoerciveTerm(graph.c),)), grid, eps)
        self.g = graph.g
        self.eps = eps
        x, _ = grid.split_mesh()
        self.p = None if p is None else tuple(float(pk) for pk in p)
        self.px = 0.0 if p is None else sum(pk * xk for pk, xk in zip(self.p, x))
        self.varying = self.g.depends_on_y or self.g.depends_on_t
        self.const = self.g.mean if not self.varying else None

    def __call__(self, t, v, q_x, q_y):
        if self.p is not None:
            q_x = tuple(q + pk for q, pk in zip(q_x, self.p))
        val = self.base(t, v, q_x, 0.0)
        if not self.varying:
            return val + self.const if self.const else val
        u = (v + self.px) / self.eps
        return val + self.g((), u, t / self.eps)


def _graph_theta(graph: GraphSpec, grid: TorusGrid, cfg: SchemeConfig):
    spec = HamiltonianSpec((CoerciveTerm(graph.c),))
    return derive_dissipation(spec, grid, cfg)


def solve_graph(graph: GraphSpec, eps: float, u0, T: float, grid: TorusGrid | None = None,
                cfg: SchemeConfig | None = None) -> Field:
    """``u_t + H(x/eps, u/eps, t/eps, Du) = 0`` marched directly on the x-torus.

    ``u/eps`` is taken from the field at the start of each step.  The step is
    additionally limited by ``max|dg/du|/eps`` so the update stays monotone in
    the nodal value itself.  With a constant ``g`` the code path coincides with
    :func:`solve_fine` on ``c|p_x| + g``.
    """
    cfg = cfg or SchemeConfig()
    _check_epsilon(eps)
    if grid is None:
        if not isinstance(u0, Field):
            raise ConfigurationError("solve_graph needs a grid when u0 is not a Field")
        grid = u0.grid
    if grid.has_y:
        raise ConfigurationError("the graph equation lives on an x-only grid")
    check_resolution(grid, eps)
    v0 = sample_initial(u0, grid)
    if T == 0:
        return v0
    ham = _GraphHamiltonian(graph, grid, eps)
    theta = _graph_theta(graph, grid, cfg)
    lip_u = _u_lipschitz(graph.g) / eps
    nsteps, dt = _steps(T, stable_dt(grid, theta, cfg.cfl, lip_u), cfg)
    return Field(grid, march(v0.values, ham, grid, theta, 0.0, dt, nsteps))


def _lift_grid(graph: GraphSpec, cells_x: int | None = None, cells_y: int | None = None):
    cx = cells_x or 32
    cy = cells_y or (64 if graph.g.depends_on_y else 8)
    n = max(graph.c.x_dims, 1)
    return TorusGrid((cx,) * n + (cy,), has_y=True)


def effective_H(graph: GraphSpec, p, cfg: SchemeConfig | None = None,
                grid: TorusGrid | None = None, **kw) -> float:
    """``Hbar(p) = Fbar(p, -1)`` for the lift of ``graph``."""
    grid = grid or _lift_grid(graph)
    P = tuple(np.ravel(p)) + (-1.0,)
    return effective_at(lift(graph), grid, P, cfg, **kw).value


def effective_H_table(graph: GraphSpec, p_values, cfg: SchemeConfig | None = None,
                      grid: TorusGrid | None = None, **kw) -> EffectiveTable:
    """``Hbar`` on evenly spaced 1D slopes, as a table usable by :func:`solve_homogenized`."""
    grid = grid or _lift_grid(graph)
    if grid.space_dims != 1:
        raise ConfigurationError("effective_H_table supports one x-dimension")
    full = tabulate(lift(graph), grid, PGrid.from_values(p_values, [-1.0]), cfg, **kw)
    vals = full.values[:, 0]
    return EffectiveTable(PGrid.from_values(p_values), vals, full.spec_digest, full.points,
                          list(full.warnings), {**full.meta, "lifted": True, "p_y": -1.0})


def _rational(p) -> tuple[Fraction, ...]:
    out = []
    for pk in np.atleast_1d(p):
        if isinstance(pk, Fraction):
            fr = pk
        else:
            fr = Fraction(float(pk)).limit_denominator(MAX_DENOMINATOR)
            if abs(float(fr) - float(pk)) > 1e-12:
                raise ConfigurationError(
                    f"slope {pk} is not rational with denominator <= {MAX_DENOMINATOR}")
        if fr.denominator > MAX_DENOMINATOR:
            raise ConfigurationError(f"slope {fr} has denominator above {MAX_DENOMINATOR}")
        out.append(fr)
    return tuple(out)


def longtime_slope(graph: GraphSpec, p, w0: CoeffField | None = None, T: float = 50.0,
                   cfg: SchemeConfig | None = None, cells_per_unit: int = 128) -> float:
    """Differenced slope of ``w = p.x + w_hat`` on the ``q``-fold torus.

    ``w_hat`` solves ``w_t + H(x, p.x + w, t, p + Dw) = 0`` with ``w(., 0) = w0``
    on a torus of period ``q`` (the common denominator of ``p``).  The return
    value ``(mean w(T) - mean w(T/2)) / (T/2)`` estimates ``-Hbar(p)``.
    """
    cfg = cfg or SchemeConfig()
    if T < 10:
        raise ConfigurationError(f"long-time horizon must be >= 10, got {T}")
    fr = _rational(p)
    q = math.lcm(*(f.denominator for f in fr))
    n = len(fr)
    grid = TorusGrid((cells_per_unit * q,) * n, periods=(float(q),) * n)
    ham = _GraphHamiltonian(graph, grid, 1.0, p=[float(f) for f in fr])
    theta = _graph_theta(graph, grid, cfg)
    dt_max = stable_dt(grid, theta, cfg.cfl, _u_lipschitz(graph.g))
    N = max(1, math.ceil(1.0 / dt_max - 1e-12))
    dt = 1.0 / N
    n_half = math.ceil(T / 2 * N - 1e-9)
    v = sample_initial(w0, grid).values if w0 is not None else np.zeros(grid.shape)
    vh = march(v, ham, grid, theta, 0.0, dt, n_half)
    vT = march(vh, ham, grid, theta, n_half * dt, dt, n_half)
    return float((vT.mean() - vh.mean()) / (n_half * dt))


@dataclass
class GraphResult:
    p_num: int
    p_den: int
    H_bar_lifted: float
    slope_longtime: float
    tolerance: float = 0.05
    note: str = "rational slope periodized on a q-fold torus"

    @property
    def p(self) -> float:
        return self.p_num / self.p_den

    @property
    def discrepancy(self) -> float:
        return abs(self.H_bar_lifted + self.slope_longtime)

    @property
    def passed(self) -> bool:
        return self.discrepancy <= self.tolerance

    def to_dict(self) -> dict:
        return {"p_num": self.p_num, "p_den": self.p_den, "p": self.p,
                "H_bar_lifted": self.H_bar_lifted, "slope_longtime": self.slope_longtime,
                "discrepancy": self.discrepancy, "passed": self.passed, "note": self.note}

    CSV_HEADER = ("p_num", "p_den", "H_bar_lifted", "slope_longtime", "discrepancy")

    def csv_row(self):
        return (self.p_num, self.p_den, self.H_bar_lifted, self.slope_longtime, self.discrepancy)


def graph_pipeline(graph: GraphSpec, slopes=(0, 0.5, -0.5, 1, -1), cfg: SchemeConfig | None = None,
                   *, grid: TorusGrid | None = None, T: float = 50.0,
                   cells_per_unit: int = 128, tolerance: float = 0.05) -> list[GraphResult]:
    """``Hbar(p)`` from the lifted cell problem against the graph long-time slope."""
    from .effective import solve_points

    grid = grid or _lift_grid(graph)
    fr = [_rational(p)[0] for p in slopes]
    pts = [(float(f), -1.0) for f in fr]
    lifted = solve_points(lift(graph), grid, pts, cfg, longtime=False)
    out = []
    for f, pt in zip(fr, lifted):
        s = longtime_slope(graph, f, None, T, cfg, cells_per_unit)
        out.append(GraphResult(f.numerator, f.denominator, pt.value, s, tolerance))
    return out
