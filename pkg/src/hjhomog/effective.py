"""Effective Hamiltonians: F-bar(P) as the ergodic constant of the P-shifted spec.

Every lattice point is an independent ergodic solve.  Tabulation batches the
points along a leading array axis so one marching loop serves the whole table;
results do not depend on the batch composition.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigurationError, HullExitError
from .ergodic import DEFAULT_ALPHAS, _check_alphas, _discounted_core, _extrapolate, _longtime_core
from .grid import TorusGrid
from .hamiltonians import CoeffField, HamiltonianSpec
from .scheme import DISSIPATION_MARGIN, BoundHamiltonian, SchemeConfig, derive_dissipation

CROSS_TOL = 0.02
BOUNDS_SLACK = 0.05
JUMP_SLACK = 0.05


@dataclass(frozen=True)
class PGrid:
    """Rectangular lattice in gradient space, one ``(min, max, count)`` per component.

    Components are the x-gradient components followed by ``p_y`` (when the cell
    grid has a y-axis).
    """

    axes: tuple[tuple[float, float, int], ...]

    def __post_init__(self):
        axes = tuple((float(a), float(b), int(c)) for a, b, c in self.axes)
        if not axes:
            raise ConfigurationError("p_grid needs at least one axis")
        for lo, hi, cnt in axes:
            if cnt < 1 or (cnt > 1 and hi <= lo) or (cnt == 1 and hi != lo):
                raise ConfigurationError(f"bad p_grid axis {(lo, hi, cnt)}")
        object.__setattr__(self, "axes", axes)

    @classmethod
    def uniform(cls, dims: int, lo=-2.5, hi=2.5, step=0.5) -> "PGrid":
        cnt = int(round((hi - lo) / step)) + 1
        return cls(((lo, hi, cnt),) * dims)

    @classmethod
    def from_values(cls, *values) -> "PGrid":
        """Axis from explicit, evenly spaced values (a single value is allowed)."""
        axes = []
        for v in values:
            v = np.atleast_1d(np.asarray(v, dtype=float))
            if v.size > 1 and not np.allclose(np.diff(v), v[1] - v[0]):
                raise ConfigurationError("p_grid values must be evenly spaced")
            axes.append((float(v[0]), float(v[-1]), int(v.size)))
        return cls(tuple(axes))

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(c for _, _, c in self.axes)

    def coords(self, k: int) -> np.ndarray:
        lo, hi, cnt = self.axes[k]
        return np.linspace(lo, hi, cnt) if cnt > 1 else np.array([lo])

    def points(self) -> np.ndarray:
        """All lattice points, ``(count, dims)``, first axis fastest."""
        mesh = np.meshgrid(*(self.coords(k) for k in range(len(self.axes))), indexing="ij")
        return np.stack([m.ravel(order="F") for m in mesh], axis=1)


@dataclass
class EffectivePoint:
    P: tuple
    value: float
    discount: float
    longtime: float
    residual: float
    flags: list = field(default_factory=list)

    @property
    def flagged(self) -> bool:
        return bool(self.flags)


@dataclass
class EffectiveTable:
    """Tabulated effective Hamiltonian with multilinear interpolation."""

    p_grid: PGrid
    values: np.ndarray
    spec_digest: str
    points: list = field(default_factory=list, repr=False)
    warnings: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(self.p_grid.shape, order="F")

    def __call__(self, *P):
        return interpolate(self, P)

    @property
    def lipschitz(self) -> tuple[float, ...]:
        """Largest difference quotient of the table along each axis."""
        out = []
        for k in range(self.values.ndim):
            if self.values.shape[k] < 2:
                out.append(0.0)
                continue
            step = np.diff(self.p_grid.coords(k))[0]
            out.append(float(np.max(np.abs(np.diff(self.values, axis=k))) / step))
        return tuple(out)

    # serialization ----------------------------------------------------------
    def header(self) -> dict:
        return {"p_grid": [list(a) for a in self.p_grid.axes], "spec_digest": self.spec_digest,
                "warnings": list(self.warnings), **self.meta}

    def csv_rows(self):
        dims = len(self.p_grid.axes)
        head = tuple(f"p{k}" for k in range(dims)) + ("value", "method", "residual", "flags")
        yield head
        pts = self.p_grid.points()
        flat = self.values.ravel(order="F")
        for i, P in enumerate(pts):
            info = self.points[i] if i < len(self.points) else None
            method = "discount" if info is not None else "given"
            res = info.residual if info is not None else 0.0
            flags = ";".join(info.flags) if info is not None else ""
            yield tuple(float(p) for p in P) + (float(flat[i]), method, res, flags)

    @classmethod
    def from_function(cls, func, p_grid: PGrid, digest: str = "analytic") -> "EffectiveTable":
        """Sample a closed-form effective Hamiltonian on ``p_grid``."""
        pts = p_grid.points()
        vals = np.array([func(*P) for P in pts])
        return cls(p_grid, vals, digest, meta={"method": "analytic"})


def interpolate(table: EffectiveTable, P):
    """Multilinear interpolation, exact at lattice points.

    ``P`` components may be arrays (broadcast together).  Raises
    :class:`HullExitError` outside the tabulated box.
    """
    P = [np.asarray(p, dtype=float) for p in P]
    dims = len(table.p_grid.axes)
    if len(P) != dims:
        raise ConfigurationError(f"expected {dims} gradient components, got {len(P)}")
    P = np.broadcast_arrays(*P)
    idx, wts = [], []
    for k, p in enumerate(P):
        lo, hi, cnt = table.p_grid.axes[k]
        tol = 1e-12 * max(1.0, abs(lo), abs(hi))
        if np.any(p < lo - tol) or np.any(p > hi + tol):
            bad = p[(p < lo - tol) | (p > hi + tol)].ravel()[0]
            raise HullExitError(
                f"slope component {k} = {bad:.6g} outside table range [{lo}, {hi}]", slope=bad)
        if cnt == 1:
            idx.append(np.zeros(p.shape, dtype=int))
            wts.append(np.zeros(p.shape))
            continue
        step = (hi - lo) / (cnt - 1)
        s = np.clip((p - lo) / step, 0.0, cnt - 1)
        i = np.minimum(np.floor(s).astype(int), cnt - 2)
        idx.append(i)
        wts.append(s - i)
    out = 0.0
    V = table.values
    for corner in itertools.product((0, 1), repeat=dims):
        w = 1.0
        sel = []
        for k, c in enumerate(corner):
            if table.p_grid.axes[k][2] == 1:
                if c:
                    w = 0.0
                sel.append(idx[k])
                continue
            w = w * (wts[k] if c else 1.0 - wts[k])
            sel.append(idx[k] + c)
        if np.all(np.asarray(w) == 0):
            continue
        out = out + w * V[tuple(sel)]
    return out if np.ndim(out) else float(out)


# ---------------------------------------------------------------------------
# solves

def _offsets(points: np.ndarray, grid: TorusGrid) -> np.ndarray:
    """Gradient points -> ``(B, n+1)`` offsets (``p_y = 0`` when the grid has no y)."""
    n = grid.space_dims
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] == n:
        pts = np.hstack([pts, np.zeros((pts.shape[0], 1))])
    if pts.shape[1] != n + 1:
        raise ConfigurationError(f"gradient points need {n} or {n + 1} components")
    if not grid.has_y and np.any(pts[:, n] != 0):
        raise ConfigurationError("p_y offsets need a grid with a y-axis")
    return pts


def _radius(off: np.ndarray, grid: TorusGrid) -> float:
    return float(np.max(np.linalg.norm(off[:, :grid.space_dims], axis=1)))


def solve_points(spec: HamiltonianSpec, grid: TorusGrid, points, cfg: SchemeConfig | None = None,
                 *, alphas=DEFAULT_ALPHAS, horizon: float = 50.0, cross_tol: float = CROSS_TOL,
                 longtime: bool = True, radius: float | None = None) -> list[EffectivePoint]:
    """Ergodic constants of ``shift(spec, P)`` for a batch of points ``P``.

    ``radius`` bounds the x-gradient offsets used for the dissipation and time
    step; by default it is the largest offset in the batch.  Passing the same
    radius to every batch makes results independent of how points are grouped.
    """
    cfg = cfg or SchemeConfig()
    alphas = _check_alphas(alphas)
    off = _offsets(points, grid)
    B = off.shape[0]
    ham = BoundHamiltonian(spec, grid, offsets=off)
    if radius is None:
        radius = _radius(off, grid)
    theta = derive_dissipation(spec, grid, cfg, extra_shift=float(radius))
    periodic = spec.depends_on_t
    z = None
    est = []
    residual = None
    for a in alphas:
        w0, pmean, _, _, residual, _, _ = _discounted_core(
            ham, grid, theta, a, cfg, periodic, z0=z, batch=B, keep_period=False)
        axes = tuple(range(1, 1 + grid.ndim))
        est.append(-a * pmean.mean(axis=axes))
        z = w0
    est = np.array(est)
    disc = _extrapolate(alphas, list(est))
    if longtime:
        lt = _longtime_core(ham, grid, theta, horizon, cfg, batch=B)[0]
    else:
        lt = np.full(B, np.nan)
    out = []
    for i in range(B):
        flags = []
        if longtime and abs(disc[i] - lt[i]) > cross_tol:
            flags.append(f"cross-check |discount-longtime|={abs(disc[i] - lt[i]):.3g}")
        out.append(EffectivePoint(tuple(float(v) for v in off[i]), float(disc[i]), float(disc[i]),
                                  float(lt[i]), float(residual[i]), flags))
    return out


def effective_at(spec: HamiltonianSpec, grid: TorusGrid, P, cfg: SchemeConfig | None = None,
                 **kw) -> EffectivePoint:
    """F-bar at one gradient ``P = (p_x..., [p_y])``, cross-checked by the long-time slope."""
    return solve_points(spec, grid, [np.ravel(P)], cfg, **kw)[0]


def point_bounds(spec: HamiltonianSpec, grid: TorusGrid, points, time_samples: int = 32):
    """``(min, max)`` over nodes and times of ``F(x,y,t,P)`` for each point."""
    off = _offsets(points, grid)
    ham = BoundHamiltonian(spec, grid, offsets=off)
    zero = np.zeros(grid.shape)
    times = np.arange(time_samples) / time_samples if spec.depends_on_t else [0.0]
    lo = np.full(off.shape[0], np.inf)
    hi = np.full(off.shape[0], -np.inf)
    axes = tuple(range(1, 1 + grid.ndim))
    for t in times:
        v = np.broadcast_to(ham(t, zero, (zero,) * grid.space_dims, zero),
                            (off.shape[0],) + grid.shape)
        lo = np.minimum(lo, v.min(axis=axes))
        hi = np.maximum(hi, v.max(axis=axes))
    return lo, hi


def _p_lipschitz(spec, grid, cfg, radius):
    th = derive_dissipation(spec, grid, replace(cfg, dissipation=None), extra_shift=radius)
    return np.array(th) / DISSIPATION_MARGIN


def tabulate(spec: HamiltonianSpec, grid: TorusGrid, p_grid: PGrid | None = None,
             cfg: SchemeConfig | None = None, *, alphas=DEFAULT_ALPHAS, horizon: float = 50.0,
             chunk: int | None = None, workers: int = 1,
             cross_check: bool = True) -> EffectiveTable:
    """Effective Hamiltonian on every point of ``p_grid``.

    The bounds ``min F(.,P) <= F-bar(P) <= max F(.,P)`` and an adjacent-jump
    continuity bound are checked; violations and cross-check flags are
    collected in ``table.warnings``.  ``cross_check=False`` skips the
    long-time estimate at every point.
    """
    cfg = cfg or SchemeConfig()
    dims = grid.space_dims + int(grid.has_y)
    p_grid = p_grid or PGrid.uniform(dims)
    if len(p_grid.axes) != dims:
        raise ConfigurationError(f"p_grid needs {dims} axes for this cell grid")
    pts = p_grid.points()
    chunk = chunk or len(pts)
    batches = [pts[i:i + chunk] for i in range(0, len(pts), chunk)]

    radius = _radius(_offsets(pts, grid), grid)

    def run(b):
        return solve_points(spec, grid, b, cfg, alphas=alphas, horizon=horizon,
                            longtime=cross_check, radius=radius)

    if workers > 1 and len(batches) > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(run, batches))
    else:
        parts = [run(b) for b in batches]
    info = [p for part in parts for p in part]
    vals = np.array([p.value for p in info])
    table = EffectiveTable(p_grid, vals, spec.digest(), info,
                           meta={"method": "discount+longtime", "alphas": list(alphas),
                                 "horizon": horizon, "cells": list(grid.cells)})

    lo, hi = point_bounds(spec, grid, pts)
    for i, p in enumerate(info):
        if not lo[i] - BOUNDS_SLACK <= p.value <= hi[i] + BOUNDS_SLACK:
            p.flags.append(f"bounds [{lo[i]:.4g}, {hi[i]:.4g}] violated")
    L = _p_lipschitz(spec, grid, cfg, float(np.max(np.abs(pts))) if pts.size else 0.0)
    V = table.values
    for k in range(V.ndim):
        if V.shape[k] < 2:
            continue
        step = np.diff(p_grid.coords(k))[0]
        jumps = np.abs(np.diff(V, axis=k))
        if np.any(jumps > L[k] * step + JUMP_SLACK):
            table.warnings.append(f"adjacent jump along axis {k} exceeds Lipschitz bound")
    for i, p in enumerate(info):
        if p.flags:
            table.warnings.append(f"P={tuple(round(c, 6) for c in pts[i])}: " + "; ".join(p.flags))
    return table


# ---------------------------------------------------------------------------
# structural checks

@dataclass
class CheckReport:
    max_deviation: float
    passed: bool
    details: list = field(default_factory=list)
    constant: float | None = None

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def homogeneity_check(spec: HamiltonianSpec, grid: TorusGrid, points=None, scales=(0.5, 2.0),
                      cfg: SchemeConfig | None = None, tol: float = 0.02, **kw) -> CheckReport:
    """Degree-1 homogeneity of F-bar for a lifted graph spec.

    Deviation is ``|F(sP) - s F(P)| / max(1, s|F(P)|)`` maximized over the
    sampled points and scales.
    """
    if spec.graph_inner is None:
        raise ConfigurationError("homogeneity_check needs a lifted graph spec")
    if points is None:
        points = [(1.0, -1.0), (-0.5, -1.0), (0.5, 0.5), (0.0, 0.0)]
    points = np.atleast_2d(np.asarray(points, dtype=float))
    batch = [points] + [s * points for s in scales]
    res = solve_points(spec, grid, np.vstack(batch), cfg, longtime=False, **kw)
    vals = np.array([r.value for r in res]).reshape(len(batch), len(points))
    base = vals[0]
    details = []
    worst = 0.0
    for s, row in zip(scales, vals[1:]):
        dev = np.abs(row - s * base) / np.maximum(1.0, s * np.abs(base))
        worst = max(worst, float(dev.max()))
        details.append({"scale": s, "deviation": dev.tolist()})
    return CheckReport(worst, worst <= tol, details)


def perturb_amplitudes(spec: HamiltonianSpec, delta: float) -> HamiltonianSpec:
    """Scale every Fourier amplitude of every coefficient by ``1 + delta``."""

    def bump(c: CoeffField) -> CoeffField:
        return CoeffField(c.mean, tuple(replace(m, amplitude=m.amplitude * (1 + delta))
                                        for m in c.modes), c.reciprocal)

    terms = []
    for t in spec.terms:
        if hasattr(t, "a"):
            terms.append(replace(t, a=bump(t.a)))
        elif hasattr(t, "b"):
            terms.append(replace(t, b=bump(t.b)))
        else:
            terms.append(replace(t, f=bump(t.f)))
    return replace(spec, terms=tuple(terms))


def stability_check(spec: HamiltonianSpec, grid: TorusGrid, deltas=(0.2, 0.1, 0.05), points=None,
                    cfg: SchemeConfig | None = None, slack: float = 0.01, **kw) -> CheckReport:
    """F-bar of amplitude-perturbed specs against F-bar of ``spec``.

    ``passed`` requires the sup deviations to shrink along the (decreasing)
    ``deltas`` up to ``slack``; ``constant`` is the observed ratio
    ``max deviation / delta``.
    """
    dims = grid.space_dims + int(grid.has_y)
    if points is None:
        points = [(0.0,) * dims]
    points = np.atleast_2d(np.asarray(points, dtype=float))
    base = np.array([r.value for r in solve_points(spec, grid, points, cfg, longtime=False, **kw)])
    devs = []
    per = []
    for d in deltas:
        vals = np.array([r.value for r in solve_points(perturb_amplitudes(spec, d), grid, points,
                                                       cfg, longtime=False, **kw)])
        dev = np.abs(vals - base)
        per.append({"delta": d, "values": vals.tolist(), "deviation": dev.tolist()})
        devs.append(float(dev.max()))
    order = np.argsort(deltas)[::-1]
    seq = [devs[i] for i in order]
    monotone = all(b <= a + slack for a, b in zip(seq, seq[1:]))
    ratios = [dv / d for dv, d in zip(devs, deltas) if d > 0]
    C = max(ratios) if ratios else 0.0
    within = all(dv <= C * d + 0.02 for dv, d in zip(devs, deltas))
    return CheckReport(max(devs) if devs else 0.0, monotone and within,
                       [{"base": base.tolist()}] + per, constant=C)
