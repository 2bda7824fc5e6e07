"""Ergodic constants by discounted approximation and by long-time averaging.

Both estimators run the Lax-Friedrichs scheme on the unit cell.  The
discounted solve uses relative value iteration: the discrete step commutes
with constants (``T(w + c) = T(w) + rho c``), so the slowly contracting
constant mode is split off and summed in closed form while the mean-free
part is iterated to a fixed point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, NonConvergenceError
from .grid import Field, TorusGrid, oscillation
from .hamiltonians import AssumptionReport, HamiltonianSpec, oscillation_bound_K
from .scheme import (BoundHamiltonian, SchemeConfig, derive_dissipation, lf_flux, march,
                     stable_dt)

DEFAULT_ALPHAS = (0.2, 0.1, 0.05)


@dataclass
class DiscountedSolution:
    """Discounted solution ``w^alpha`` and its samples over one time period.

    ``period_values`` has shape ``(nt, *grid.shape)`` (``nt = 1`` for
    time-independent specs); ``w`` is the ``t = 0`` slice.
    """

    w: Field
    alpha: float
    residual: float
    iterations: int
    residual_history: list
    period_values: np.ndarray = field(repr=False)
    period_times: np.ndarray = field(repr=False)

    @property
    def estimate(self) -> float:
        """Space-time mean of ``-alpha w^alpha``."""
        return float(-self.alpha * self.period_values.mean())


@dataclass
class ErgodicResult:
    lam: float
    method: str
    parameter: float
    oscillation: float
    residual: float
    history: list
    solutions: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {"lambda": self.lam, "method": self.method, "parameter": self.parameter,
                "oscillation": self.oscillation, "residual": self.residual,
                "history": [list(h) for h in self.history]}

    def history_rows(self):
        return [("parameter", "estimate")] + [tuple(h) for h in self.history]


def _grid_mean(a, grid):
    axes = tuple(range(a.ndim - grid.ndim, a.ndim))
    return a.mean(axis=axes, keepdims=True)


def _grid_sup(a, grid):
    axes = tuple(range(a.ndim - grid.ndim, a.ndim))
    return np.abs(a).max(axis=axes)


def _steps_per_period(grid, theta, cfg, alpha=0.0):
    return max(1, math.ceil(1.0 / stable_dt(grid, theta, cfg.cfl, alpha) - 1e-12))


def _freeze_step(Tz, z, m, done, grid, tol):
    """One relative-value update that leaves already converged batch members untouched.

    Freezing members individually makes each result independent of which
    other points share its batch.
    """
    m_new = _grid_mean(Tz, grid)
    z_new = Tz - m_new
    r = _grid_sup(z_new - z, grid).reshape(done.shape)
    active = ~done
    z = np.where(active, z_new, z)
    m = np.where(active, m_new, m)
    res = float(np.max(np.where(active, r, 0.0)))
    return z, m, done | (r <= tol), res


def _discounted_core(ham, grid: TorusGrid, theta, alpha: float, cfg: SchemeConfig,
                     periodic: bool, z0=None, batch=None, max_periods=None, keep_period=True):
    """Batched discounted solve.

    Returns ``(w0, period_mean, period_values, times, residual, iterations, history)``;
    ``period_values`` is ``None`` unless ``keep_period``.
    """
    shape = ((batch,) if batch else ()) + grid.shape
    z = np.zeros(shape) if z0 is None else np.array(np.broadcast_to(z0, shape), dtype=float)
    z = z - _grid_mean(z, grid)
    tol = cfg.residual_tol
    hist = []
    m = np.zeros(shape[:len(shape) - grid.ndim] + (1,) * grid.ndim)
    done = np.zeros(m.shape, dtype=bool)
    if periodic:
        N = _steps_per_period(grid, theta, cfg, alpha)
        dt = 1.0 / N
        rho = (1.0 - alpha * dt) ** N
        cap = max_periods or math.ceil(20.0 / alpha) + 20
        for it in range(1, cap + 1):
            Tz = march(z, ham, grid, theta, 0.0, dt, N, alpha=alpha)
            z, m, done, res = _freeze_step(Tz, z, m, done, grid, tol)
            hist.append(res)
            if done.all():
                break
        else:
            raise NonConvergenceError(
                f"discounted period map did not converge in {cap} periods "
                f"(alpha={alpha}, residual={hist[-1]:.3g})", hist)
        w0 = z + m / (1.0 - rho)
        acc = {"sum": np.zeros_like(w0), "samples": [w0] if keep_period else None, "last": w0}

        def collect(k, t, v):
            if k < N:
                acc["sum"] += v
                if keep_period:
                    acc["samples"].append(v.copy())
            acc["last"] = v

        acc["sum"] += w0
        march(w0, ham, grid, theta, 0.0, dt, N, alpha=alpha, callback=collect)
        residual = _grid_sup(acc["last"] - w0, grid)
        period = np.stack(acc["samples"], axis=-grid.ndim - 1) if keep_period else None
        return w0, acc["sum"] / N, period, np.arange(N) * dt, residual, it, hist

    dt = stable_dt(grid, theta, cfg.cfl, alpha)
    rho = 1.0 - alpha * dt
    for it in range(1, cfg.max_steps + 1):
        rhs = lf_flux(ham, 0.0, z, grid, theta) + alpha * z
        Tz = z - dt * rhs
        z, m, done, res = _freeze_step(Tz, z, m, done, grid, tol * dt)
        res /= dt
        if it % 100 == 0 or done.all():
            hist.append(res)
        if done.all():
            break
    else:
        if it % 100:
            hist.append(res)
        raise NonConvergenceError(
            f"discounted iteration did not converge in {cfg.max_steps} steps "
            f"(alpha={alpha}, residual={hist[-1]:.3g})", hist)
    w0 = z + m / (1.0 - rho)
    residual = _grid_sup(lf_flux(ham, 0.0, w0, grid, theta) + alpha * w0, grid)
    period = np.expand_dims(w0, axis=-grid.ndim - 1) if keep_period else None
    return w0, w0, period, np.zeros(1), residual, it, hist


def _prepare(spec: HamiltonianSpec, grid: TorusGrid, cfg: SchemeConfig):
    ham = BoundHamiltonian(spec, grid)
    theta = derive_dissipation(spec, grid, cfg)
    return ham, theta


def solve_discounted(spec: HamiltonianSpec, grid: TorusGrid, alpha: float,
                     cfg: SchemeConfig | None = None, *, w_init: Field | None = None
                     ) -> DiscountedSolution:
    """Space-time periodic solution of ``w_t + G(x,y,t,Dw) + alpha w = 0``.

    Raises :class:`NonConvergenceError` (carrying the residual history) when
    the iteration cap is reached first.
    """
    if alpha <= 0:
        raise ConfigurationError(f"alpha must be positive, got {alpha}")
    cfg = cfg or SchemeConfig()
    ham, theta = _prepare(spec, grid, cfg)
    z0 = None if w_init is None else w_init.values
    w0, _, period, times, residual, it, hist = _discounted_core(
        ham, grid, theta, alpha, cfg, spec.depends_on_t, z0)
    return DiscountedSolution(Field(grid, w0), alpha, float(residual), it, hist, period, times)


def _extrapolate(alphas, estimates):
    if len(estimates) == 1:
        return estimates[0]
    a1, a2 = alphas[-2], alphas[-1]
    e1, e2 = estimates[-2], estimates[-1]
    slope = (e1 - e2) / (a1 - a2)
    return e2 - slope * a2


def _check_alphas(alphas):
    alphas = tuple(float(a) for a in alphas)
    if not alphas or any(a <= 0 for a in alphas):
        raise ConfigurationError("alphas must be positive")
    if any(b >= a for a, b in zip(alphas, alphas[1:])):
        raise ConfigurationError("alphas must be strictly decreasing")
    return alphas


def ergodic_discount(spec: HamiltonianSpec, grid: TorusGrid, alphas=DEFAULT_ALPHAS,
                     cfg: SchemeConfig | None = None) -> ErgodicResult:
    """Ergodic constant as the alpha -> 0 limit of ``mean(-alpha w^alpha)``.

    The returned value extrapolates the last two estimates linearly to
    ``alpha = 0``; every raw estimate is kept in ``history``.
    """
    alphas = _check_alphas(alphas)
    cfg = cfg or SchemeConfig()
    sols = []
    z = None
    for a in alphas:
        sol = solve_discounted(spec, grid, a, cfg, w_init=z)
        sols.append(sol)
        z = sol.w
    est = [s.estimate for s in sols]
    final = sols[-1]
    return ErgodicResult(
        lam=float(_extrapolate(alphas, est)), method="discount", parameter=alphas[-1],
        oscillation=oscillation(final.period_values), residual=final.residual,
        history=list(zip(alphas, est)), solutions=sols)


def _longtime_core(ham, grid, theta, T, cfg, batch=None):
    N = _steps_per_period(grid, theta, cfg)
    dt = 1.0 / N
    half = T / 2.0
    n_half = round(half * N)
    if abs(n_half * dt - half) > 1e-9:
        n_half = math.ceil(half * N)
    shape = ((batch,) if batch else ()) + grid.shape
    # keep the early window aligned with whole periods when possible
    n_q = (n_half // (2 * N)) * N or n_half // 2
    v = np.zeros(shape)
    v_q = march(v, ham, grid, theta, 0.0, dt, n_q)
    v_h = march(v_q, ham, grid, theta, n_q * dt, dt, n_half - n_q)
    v_T = march(v_h, ham, grid, theta, n_half * dt, dt, n_half)
    span = n_half * dt
    m_q, m_h, m_T = (_grid_mean(a, grid) for a in (v_q, v_h, v_T))
    lam = -(m_T - m_h) / span
    lam_early = -(m_h - m_q) / ((n_half - n_q) * dt)
    osc = (np.max(v_T - m_T, axis=tuple(range(v.ndim - grid.ndim, v.ndim)))
           - np.min(v_T - m_T, axis=tuple(range(v.ndim - grid.ndim, v.ndim))))
    residual = np.abs(lam - lam_early)
    sq = lambda a: np.reshape(a, a.shape[:a.ndim - grid.ndim])
    return sq(lam), sq(lam_early), osc, sq(residual), 2 * span, v_T


def ergodic_longtime(spec: HamiltonianSpec, grid: TorusGrid, T: float = 50.0,
                     cfg: SchemeConfig | None = None) -> ErgodicResult:
    """Ergodic constant from the differenced slope ``-(mean v(T) - mean v(T/2))/(T/2)``.

    ``v`` starts from zero.  ``residual`` is the change between the slopes on
    ``[T/4, T/2]`` and ``[T/2, T]``.
    """
    if T < 10:
        raise ConfigurationError(f"long-time horizon must be >= 10, got {T}")
    cfg = cfg or SchemeConfig()
    ham, theta = _prepare(spec, grid, cfg)
    lam, lam_early, osc, res, horizon, _ = _longtime_core(ham, grid, theta, T, cfg)
    return ErgodicResult(
        lam=float(lam), method="longtime", parameter=float(horizon),
        oscillation=float(osc), residual=float(res),
        history=[(horizon / 2, float(lam_early)), (horizon, float(lam))])


@dataclass
class Diagnostics:
    osc_full: float
    osc_xbar: float
    K: float
    y_variation: float
    y_monotone_violation: float
    window_low: float
    window_high: float
    alpha_w_min: float
    alpha_w_max: float

    @property
    def window_violation(self) -> float:
        return max(0.0, self.window_low - self.alpha_w_min, self.alpha_w_max - self.window_high)

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["window_violation"] = self.window_violation
        return d


def zero_gradient_values(spec: HamiltonianSpec, grid: TorusGrid, times) -> np.ndarray:
    """``-G(x, y, t, 0, 0)`` at every node and time (shape ``(nt, *grid.shape)``)."""
    ham = BoundHamiltonian(spec, grid)
    zero = np.zeros(grid.shape)
    q_x = (zero,) * grid.space_dims
    return np.stack([-np.broadcast_to(ham(t, zero, q_x, zero), grid.shape) for t in times])


def diagnostics(spec: HamiltonianSpec, solution: DiscountedSolution,
                report: AssumptionReport | None = None) -> Diagnostics:
    """Structural checks on a discounted solution.

    Oscillation against the bound ``K``, oscillation of the y-maximum, the
    y-independence (``l = 0``) or y-monotonicity (``l != 0``) of
    ``w + l y``, and the window ``min(-G(.,0,0)) <= alpha w <= max(-G(.,0,0))``.
    """
    grid = solution.w.grid
    W = solution.period_values
    osc_full = oscillation(W)
    K = math.inf
    if report is not None and report.coercive_ok:
        K = oscillation_bound_K(report, grid.space_dims)
    y_var = 0.0
    viol = 0.0
    if grid.has_y:
        wbar = W.max(axis=-1)
        osc_xbar = float(wbar.max() - wbar.min())
        y_var = float(np.max(W.max(axis=-1) - W.min(axis=-1)))
        l = spec.l_effective
        if l != 0:
            inc = np.roll(W, -1, axis=-1) - W + l * grid.spacing[-1]
            viol = float(np.max(np.maximum(inc if l < 0 else -inc, 0.0)))
        else:
            viol = y_var
    else:
        osc_xbar = osc_full
    neg_g = zero_gradient_values(spec, grid, solution.period_times)
    aw = solution.alpha * W
    return Diagnostics(
        osc_full=osc_full, osc_xbar=osc_xbar, K=K, y_variation=y_var,
        y_monotone_violation=viol, window_low=float(neg_g.min()), window_high=float(neg_g.max()),
        alpha_w_min=float(aw.min()), alpha_w_max=float(aw.max()))
