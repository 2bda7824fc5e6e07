"""Built-in test corpus: named specs and the acceptance checks run over them.

Every check returns a :class:`CriterionResult` holding a pass flag, a detail
record for the JSON report and CSV rows.  The CSV rows contain only computed
numbers (no timings), so repeated runs can be compared byte for byte.
Runtime limits are checked against the CPU time of the thread doing the work,
so running checks side by side on a thread pool does not change a verdict.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .effective import PGrid, homogeneity_check, solve_points, stability_check, tabulate
from .ergodic import DEFAULT_ALPHAS, diagnostics, ergodic_discount, ergodic_longtime
from .errors import HJHomogError
from .grid import Field, TorusGrid
from .hamiltonians import (CoeffField, CoerciveTerm, DriftTerm, GraphSpec, HamiltonianSpec,
                           Mode, SourceTerm, constant_spec, estimate_constants, lift, shift)
from .multiscale import (CELLS_PER_PERIOD, AnalyticHamiltonian, convergence_study,
                         graph_pipeline)
from .scheme import SchemeConfig, comparison_probe, derive_dissipation, numerical_hamiltonian

ONE = CoeffField.constant(1.0)
SEED = 20240607


# ---------------------------------------------------------------------------
# named specs

def eikonal_sin(delta: float = 0.0) -> HamiltonianSpec:
    """``|p_x| - (1 + delta) sin(2 pi x)``."""
    return HamiltonianSpec((CoerciveTerm(ONE), SourceTerm(CoeffField.sin(1.0 + delta, kx=1))))


def sin_drift_model() -> HamiltonianSpec:
    """``|p_x| + sin(2 pi y)|p_y| - 2``."""
    return HamiltonianSpec((CoerciveTerm(ONE), DriftTerm(CoeffField.sin(1.0, ky=1)),
                            SourceTerm(CoeffField.constant(2.0))))


def y_drift() -> HamiltonianSpec:
    """``|p_x| + 0.5 sin(2 pi y)|p_y| - sin(2 pi x)`` (``l = 0``)."""
    return HamiltonianSpec((CoerciveTerm(ONE), DriftTerm(CoeffField.sin(0.5, ky=1)),
                            SourceTerm(CoeffField.sin(1.0, kx=1))))


def y_drift_negative_l() -> HamiltonianSpec:
    """``|p_x| + (1 + 0.5 cos(2 pi y))|p_y - 1|`` (``l = -1``)."""
    return HamiltonianSpec((CoerciveTerm(ONE),
                            DriftTerm(CoeffField.cos(0.5, ky=1, mean=1.0), offset=-1.0)),
                           l_declared=-1.0)


def noncoercive(l: float = 0.0) -> HamiltonianSpec:
    """``|p_x| + sin(2 pi (x - y))|p_y + l| - cos(2 pi t)``."""
    return HamiltonianSpec((CoerciveTerm(ONE),
                            DriftTerm(CoeffField.sin(1.0, kx=1, ky=-1), offset=l),
                            SourceTerm(CoeffField.cos(1.0, kt=1))), l_declared=l)


def harmonic_graph() -> GraphSpec:
    """``c = 1/(1 + 0.5 sin(2 pi x))``, ``g = 0``."""
    return GraphSpec(CoeffField(1.0, (Mode(0.5, -0.5 * math.pi, (1,)),), reciprocal=True),
                     CoeffField.constant(0.0))


def graph_a() -> GraphSpec:
    """``c = 1``, ``g = 0.3 + 0.2 cos(2 pi u)``."""
    return GraphSpec(ONE, CoeffField.cos(0.2, ky=1, mean=0.3))


def graph_b() -> GraphSpec:
    """``c = 1 + 0.25 cos(2 pi x)``, ``g = 0.1 + 0.4 sin(2 pi u)`` (sign-changing)."""
    return GraphSpec(CoeffField.cos(0.25, kx=1, mean=1.0), CoeffField.sin(0.4, ky=1, mean=0.1))


def smooth_u0_2d() -> CoeffField:
    """``0.15 sin(2 pi x) + 0.15 cos(2 pi y)``: small slopes keep the table box small."""
    return CoeffField(0.0, (Mode(0.15, -0.5 * math.pi, (1,)), Mode(0.15, 0.0, (), 1)))


#: name -> (spec factory, cell grid used for the ergodic checks)
ERGODIC_CORPUS = {
    "constant_2": (lambda: constant_spec(2.0), TorusGrid((16,))),
    "eikonal_sin": (eikonal_sin, TorusGrid((256,))),
    "y_drift": (y_drift, TorusGrid((64, 32), has_y=True)),
    "y_drift_negative_l": (y_drift_negative_l, TorusGrid((16, 64), has_y=True)),
    "noncoercive": (noncoercive, TorusGrid((32, 32), has_y=True)),
    "noncoercive_l_minus_1": (lambda: noncoercive(-1.0), TorusGrid((32, 32), has_y=True)),
}

GRAPH_CORPUS = {"graph_a": graph_a, "graph_b": graph_b}


# ---------------------------------------------------------------------------
# results

@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)
    header: tuple = ()
    rows: list = field(default_factory=list)
    seconds: float = 0.0

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] criterion {self.number}: {self.name}"

    def to_dict(self) -> dict:
        return {"number": self.number, "name": self.name, "passed": self.passed,
                "seconds": round(self.seconds, 3), "detail": self.detail}


@dataclass(frozen=True)
class CorpusSettings:
    scheme: SchemeConfig = SchemeConfig()
    cells_scale: float = 1.0
    horizon: float = 50.0
    alphas: tuple = DEFAULT_ALPHAS

    def grid(self, g: TorusGrid) -> TorusGrid:
        if self.cells_scale == 1.0:
            return g
        return TorusGrid(tuple(max(8, int(round(c * self.cells_scale))) for c in g.cells),
                         g.has_y, g.periods)


def _timed(fn):
    def wrapper(settings: CorpusSettings):
        t0 = time.perf_counter()
        out = fn(settings)
        for r in (out if isinstance(out, list) else [out]):
            r.seconds = time.perf_counter() - t0
        return out
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


# ---------------------------------------------------------------------------
# checks

@_timed
def check_eikonal_table(s: CorpusSettings) -> CriterionResult:
    """Tabulated F-bar of ``|p_x| - sin(2 pi x)`` against ``max(1, |p|)``."""
    grid = s.grid(TorusGrid((256,)))
    t0, c0 = time.perf_counter(), time.thread_time()
    table = tabulate(eikonal_sin(), grid, PGrid.from_values(np.arange(-2.0, 2.01, 0.5)),
                     s.scheme, alphas=s.alphas, horizon=s.horizon)
    elapsed = time.thread_time() - c0
    wall = time.perf_counter() - t0
    rows = []
    worst = 0.0
    for P in (-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0):
        val = float(table(P))
        err = abs(val - max(1.0, abs(P)))
        worst = max(worst, err)
        rows.append((P, val, max(1.0, abs(P)), err))
    ok = worst <= 0.05 and elapsed <= 60.0
    return CriterionResult(1, "eikonal effective Hamiltonian", ok,
                           {"max_error": worst, "runtime_s": elapsed, "wall_s": wall,
                            "cells": list(grid.cells),
                            "warnings": table.warnings},
                           ("p", "value", "oracle", "error"), rows)


@_timed
def check_harmonic_lift(s: CorpusSettings) -> CriterionResult:
    """``Hbar(p) = |p|`` for ``c = 1/(1 + 0.5 sin)``, ``g = 0``."""
    grid = s.grid(TorusGrid((128, 8), has_y=True))
    ps = (-2.0, -1.0, -0.5, 0.5, 1.0, 2.0)
    pts = solve_points(lift(harmonic_graph()), grid, [(p, -1.0) for p in ps], s.scheme,
                       alphas=s.alphas, longtime=False)
    rows = [(p, r.value, abs(p), abs(r.value - abs(p))) for p, r in zip(ps, pts)]
    worst = max(r[3] for r in rows)
    return CriterionResult(2, "harmonic-mean lift", worst <= 0.05, {"max_error": worst},
                           ("p", "H_bar", "oracle", "error"), rows)


@_timed
def check_ergodic(s: CorpusSettings) -> list[CriterionResult]:
    """Discount/long-time agreement and the discounted-solution structure suite."""
    tol = s.scheme.residual_tol
    agree_rows, struct_rows = [], []
    agree_ok = struct_ok = True
    t0, c0 = time.perf_counter(), time.thread_time()
    for name, (factory, grid) in ERGODIC_CORPUS.items():
        spec = factory()
        grid = s.grid(grid)
        disc = ergodic_discount(spec, grid, s.alphas, s.scheme)
        lt = ergodic_longtime(spec, grid, s.horizon, s.scheme)
        gap = abs(disc.lam - lt.lam)
        agree_ok &= gap <= 0.02
        agree_rows.append((name, disc.lam, lt.lam, gap))
        report = estimate_constants(spec)
        for sol in disc.solutions:
            d = diagnostics(spec, sol, report)
            window = d.window_violation <= 10 * tol
            osc = d.osc_full <= d.K + 0.05
            yind = spec.l_effective != 0 or d.y_variation <= 10 * tol
            ymono = spec.l_effective == 0 or d.y_monotone_violation <= 10 * tol
            struct_ok &= window and osc and yind and ymono
            struct_rows.append((name, sol.alpha, d.window_violation, d.osc_full, d.K,
                                d.y_variation, d.y_monotone_violation))
    elapsed = time.thread_time() - c0
    wall = time.perf_counter() - t0
    agree_ok &= elapsed <= 300.0
    return [
        CriterionResult(3, "ergodic method agreement", bool(agree_ok),
                        {"max_gap": max(r[3] for r in agree_rows), "runtime_s": elapsed,
                         "wall_s": wall},
                        ("spec", "lambda_discount", "lambda_longtime", "gap"), agree_rows),
        CriterionResult(4, "discounted-solution structure", bool(struct_ok),
                        {"residual_tol": tol},
                        ("spec", "alpha", "window_violation", "osc", "K", "y_variation",
                         "y_monotone_violation"), struct_rows),
    ]


@_timed
def check_convergence(s: CorpusSettings) -> CriterionResult:
    """``||U^eps - U||`` decay over ``eps = 1/4, 1/8, 1/16`` at ``T = 0.25``."""
    per = max(1, int(round(CELLS_PER_PERIOD * s.cells_scale)))
    rows = []
    ok = True
    detail = {}
    analytic = AnalyticHamiltonian(lambda p: np.maximum(1.0, np.abs(p)), 1.0, "max(1,|p|)")
    runs = [("eikonal_sin", eikonal_sin(), CoeffField.sin(1.0, kx=1), analytic),
            ("noncoercive", noncoercive(), smooth_u0_2d(), None)]
    for name, spec, u0, eff in runs:
        try:
            rep = convergence_study(spec, u0, 0.25, effective=eff, cfg=s.scheme,
                                    cells_per_period=per,
                                    table_kwargs={"alphas": s.alphas, "cross_check": False})
        except HJHomogError as exc:
            ok = False
            detail[name] = {"error": f"{type(exc).__name__}: {exc}"}
            continue
        ok &= rep.passed
        detail[name] = {"decay_factors": rep.decay_factors, "passed": rep.passed}
        for e, err, cells in zip(rep.epsilons, rep.errors, rep.cells):
            rows.append((name, e, err, "x".join(map(str, cells))))
    return CriterionResult(5, "homogenization convergence", bool(ok), detail,
                           ("spec", "epsilon", "error", "cells"), rows)


@_timed
def check_graph(s: CorpusSettings) -> CriterionResult:
    """``|Fbar(p,-1) + longtime_slope(p)|`` on the corpus graph specs."""
    rows = []
    ok = True
    for name, factory in GRAPH_CORPUS.items():
        for r in graph_pipeline(factory(), cfg=s.scheme, T=s.horizon):
            ok &= r.passed
            rows.append((name, r.p_num, r.p_den, r.H_bar_lifted, r.slope_longtime,
                         r.discrepancy))
    return CriterionResult(6, "graph pipeline", bool(ok),
                           {"max_discrepancy": max(r[5] for r in rows)},
                           ("spec", "p_num", "p_den", "H_bar_lifted", "slope_longtime",
                            "discrepancy"), rows)


def _random_pairs(grid: TorusGrid, count: int, rng):
    """Smooth periodic ``u0 <= v0`` pairs from a few random Fourier modes."""
    x, y = grid.split_mesh()
    pairs = []
    for _ in range(count):
        fields = []
        for _ in range(2):
            val = 0.0
            for _ in range(3):
                kx, ky = rng.integers(-2, 3, size=2)
                amp, ph = rng.normal(0, 0.3), rng.uniform(0, 2 * math.pi)
                val = val + amp * np.cos(2 * math.pi * (kx * x[0] + ky * y) + ph)
            fields.append(np.broadcast_to(val, grid.shape))
        a, b = fields
        gap = max(0.0, float(np.max(a - b))) + rng.uniform(0.0, 0.2) + 1e-9
        pairs.append((Field(grid, a - gap), Field(grid, b)))
    return pairs


@_timed
def check_properties(s: CorpusSettings) -> CriterionResult:
    """Comparison, consistency, equivariance, shift identity, homogeneity, bounds."""
    rng = np.random.default_rng(SEED)
    rows = []
    cfg = s.scheme
    spec = noncoercive()
    grid = s.grid(TorusGrid((32, 32), has_y=True))

    pairs = _random_pairs(grid, 50, rng)
    ordered = sum(comparison_probe(spec, u, v, 0.2, cfg) for u, v in pairs)
    rows.append(("comparison_pairs_ordered", float(ordered), 50.0))

    xs = rng.uniform(0, 1, 200)
    ys = rng.uniform(0, 1, 200)
    ts = rng.uniform(0, 1, 200)
    px = rng.uniform(-5, 5, 200)
    py = rng.uniform(-5, 5, 200)
    theta = derive_dissipation(spec, grid, cfg)
    num = numerical_hamiltonian(spec, xs, ys, ts, (px, py), (px, py), theta)
    exact = spec.eval(xs, ys, ts, px, py)
    consistency = float(np.max(np.abs(num - exact)))
    rows.append(("flux_consistency", consistency, 0.0))

    c = 0.7
    base = ergodic_discount(spec, grid, s.alphas, cfg)
    plus = ergodic_discount(spec.with_source(c), grid, s.alphas, cfg)
    lam_shift = abs(plus.lam - base.lam - c)
    rows.append(("lambda_constant_shift", lam_shift, cfg.residual_tol))

    P = np.array([(0.5, 0.5), (-1.0, 0.5), (0.0, -1.0)])
    Q = (0.25, -0.5)
    fb = [p.value for p in solve_points(spec, grid, P + Q, cfg, alphas=s.alphas,
                                        longtime=False)]
    fs = [p.value for p in solve_points(shift(spec, ((Q[0],), Q[1])), grid, P, cfg,
                                        alphas=s.alphas, longtime=False)]
    fc = [p.value for p in solve_points(spec.with_source(c), grid, P + Q, cfg,
                                        alphas=s.alphas, longtime=False)]
    shift_id = float(np.max(np.abs(np.subtract(fb, fs))))
    additive = float(np.max(np.abs(np.subtract(fc, fb) - c)))
    rows.append(("fbar_shift_identity", shift_id, 0.02))
    rows.append(("fbar_additive", additive, 0.02))

    hom = homogeneity_check(lift(graph_b()), s.grid(TorusGrid((32, 64), has_y=True)), cfg=cfg,
                            alphas=s.alphas)
    rows.append(("lifted_homogeneity", hom.max_deviation, 0.02))

    table = tabulate(spec, grid, PGrid(((-1.0, 1.0, 3), (-1.0, 1.0, 3))), cfg,
                     alphas=s.alphas, horizon=s.horizon)
    bound_flags = sum(any("bounds" in f for f in p.flags) for p in table.points)
    rows.append(("fbar_bounds_violations", float(bound_flags), 0.0))

    ok = (ordered == 50 and consistency == 0.0 and lam_shift <= cfg.residual_tol
          and shift_id <= 0.02 and additive <= 0.02 and hom.max_deviation <= 0.02
          and bound_flags == 0)
    return CriterionResult(7, "scheme property suite", bool(ok), {"seed": SEED},
                           ("property", "measured", "limit"), rows)


@_timed
def check_stability(s: CorpusSettings) -> CriterionResult:
    """F-bar under amplitude perturbations ``delta = 0.2, 0.1, 0.05``."""
    deltas = (0.2, 0.1, 0.05)
    rows = []
    grid1 = s.grid(TorusGrid((256,)))
    rep1 = stability_check(eikonal_sin(), grid1, deltas, cfg=s.scheme, alphas=s.alphas)
    track = 0.0
    for d, info in zip(deltas, rep1.details[1:]):
        val = info["values"][0]
        track = max(track, abs(val - (1 + d)))
        rows.append(("eikonal_sin", d, val, info["deviation"][0]))
    grid2 = s.grid(TorusGrid((32, 32), has_y=True))
    rep2 = stability_check(noncoercive(), grid2, deltas, points=[(0.5, 0.5)], cfg=s.scheme,
                           alphas=s.alphas)
    for d, info in zip(deltas, rep2.details[1:]):
        rows.append(("noncoercive", d, info["values"][0], info["deviation"][0]))
    ok = rep1.passed and rep2.passed and track <= 0.05
    return CriterionResult(8, "effective Hamiltonian stability", bool(ok),
                           {"analytic_tracking_error": track, "C_eikonal": rep1.constant,
                            "C_noncoercive": rep2.constant},
                           ("spec", "delta", "value", "deviation"), rows)


CHECKS = {
    1: check_eikonal_table,
    2: check_harmonic_lift,
    3: check_ergodic,
    5: check_convergence,
    6: check_graph,
    7: check_properties,
    8: check_stability,
}


def run_checks(settings: CorpusSettings | None = None, only=None, workers: int = 1):
    """Run the acceptance checks; returns results ordered by criterion number.

    ``only`` restricts to a subset of criterion numbers (criterion 4 is produced
    together with 3).  Checks are independent, so ``workers > 1`` runs them on a
    thread pool without changing any computed value.
    """
    settings = settings or CorpusSettings()
    wanted = set(only) if only else None
    keys = [k for k in CHECKS if wanted is None or k in wanted or (k == 3 and 4 in wanted)]
    if workers > 1 and len(keys) > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(workers) as ex:
            outs = list(ex.map(lambda k: CHECKS[k](settings), keys))
    else:
        outs = [CHECKS[k](settings) for k in keys]
    flat = []
    for o in outs:
        flat.extend(o if isinstance(o, list) else [o])
    if wanted is not None:
        flat = [r for r in flat if r.number in wanted]
    return sorted(flat, key=lambda r: r.number)
