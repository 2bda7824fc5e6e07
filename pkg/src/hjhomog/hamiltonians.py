"""Hamiltonians as a closed term algebra with periodic Fourier coefficients.

A :class:`HamiltonianSpec` evaluates

    G(x, y, t, p_x, p_y) = a(x,t) |q_x|^beta + sum_b b(x,y,t) S(q_y + l) - f(x,t),
    (q_x, q_y) = (p_x, p_y) + shift,

with ``S`` either ``|.|`` or the identity.  Graph Hamiltonians
``H(x,u,t,p) = c(x,t)|p| + g(u,t)`` are carried by :class:`GraphSpec` and
mapped to the level-set form by :func:`lift`.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, replace
from typing import Literal, Sequence, Union

import numpy as np

from .errors import ConfigurationError, SpecRejected

TWO_PI = 2.0 * math.pi


def _as_tuple(v, n=None):
    if np.ndim(v) == 0 and not isinstance(v, (tuple, list)):
        v = (v,)
    v = tuple(v)
    if n is not None and len(v) < n:
        v = v + (0,) * (n - len(v))
    return v


@dataclass(frozen=True)
class Mode:
    """One Fourier mode ``amplitude * cos(2 pi (kx.x + ky y + kt t) + phase)``."""

    amplitude: float
    phase: float = 0.0
    kx: tuple[int, ...] = ()
    ky: int = 0
    kt: int = 0

    def __post_init__(self):
        kx = tuple(int(k) for k in _as_tuple(self.kx))
        while kx and kx[-1] == 0:
            kx = kx[:-1]
        object.__setattr__(self, "kx", kx)
        object.__setattr__(self, "ky", int(self.ky))
        object.__setattr__(self, "kt", int(self.kt))
        object.__setattr__(self, "amplitude", float(self.amplitude))
        object.__setattr__(self, "phase", float(self.phase))
        if len(kx) > 2:
            raise ConfigurationError("at most two x wavenumbers are supported")

    def to_dict(self) -> dict:
        return {"amp": self.amplitude, "phase": self.phase, "kx": list(self.kx),
                "ky": self.ky, "kt": self.kt}


@dataclass(frozen=True)
class CoeffField:
    """Periodic coefficient ``mean + sum(modes)``.

    With ``reciprocal=True`` the field is ``1 / (mean + sum(modes))`` instead,
    which keeps harmonic-mean test coefficients such as ``1/(1 + 0.5 sin)`` in
    closed form.
    """

    mean: float = 0.0
    modes: tuple[Mode, ...] = ()
    reciprocal: bool = False

    def __post_init__(self):
        object.__setattr__(self, "mean", float(self.mean))
        object.__setattr__(self, "modes", tuple(self.modes))
        if self.reciprocal:
            lo = self.mean - sum(abs(m.amplitude) for m in self.modes)
            hi = self.mean + sum(abs(m.amplitude) for m in self.modes)
            if lo <= 0 <= hi:
                raise ConfigurationError("reciprocal coefficient would vanish somewhere")

    # -- constructors -------------------------------------------------------
    @classmethod
    def constant(cls, value: float) -> "CoeffField":
        return cls(mean=value)

    @classmethod
    def cos(cls, amplitude=1.0, kx=(), ky=0, kt=0, mean=0.0, phase=0.0) -> "CoeffField":
        return cls(mean, (Mode(amplitude, phase, kx, ky, kt),))

    @classmethod
    def sin(cls, amplitude=1.0, kx=(), ky=0, kt=0, mean=0.0) -> "CoeffField":
        return cls(mean, (Mode(amplitude, -0.5 * math.pi, kx, ky, kt),))

    def __add__(self, other: "CoeffField") -> "CoeffField":
        if self.reciprocal or other.reciprocal:
            raise ConfigurationError("cannot add reciprocal coefficient fields")
        return CoeffField(self.mean + other.mean, self.modes + other.modes)

    def scaled(self, s: float) -> "CoeffField":
        """Multiply by ``s`` (for reciprocal fields, divides the denominator)."""
        if self.reciprocal:
            return CoeffField(self.mean / s, tuple(replace(m, amplitude=m.amplitude / s)
                                                   for m in self.modes), True)
        return CoeffField(self.mean * s,
                          tuple(replace(m, amplitude=m.amplitude * s) for m in self.modes))

    # -- structure ----------------------------------------------------------
    @property
    def depends_on_t(self) -> bool:
        return any(m.kt != 0 and m.amplitude != 0 for m in self.modes)

    @property
    def depends_on_y(self) -> bool:
        return any(m.ky != 0 and m.amplitude != 0 for m in self.modes)

    @property
    def depends_on_x(self) -> bool:
        return any(m.kx and m.amplitude != 0 for m in self.modes)

    @property
    def x_dims(self) -> int:
        return max((len(m.kx) for m in self.modes), default=0)

    def bounds(self) -> tuple[float, float]:
        """Crude closed-form bounds from the triangle inequality."""
        spread = sum(abs(m.amplitude) for m in self.modes)
        lo, hi = self.mean - spread, self.mean + spread
        if self.reciprocal:
            return (1.0 / hi, 1.0 / lo) if lo > 0 else (1.0 / hi, 1.0 / lo)
        return lo, hi

    # -- evaluation ---------------------------------------------------------
    def phase_arrays(self, x: Sequence, y=0.0, scale: float = 1.0):
        """Spatial phases ``2 pi (kx.x + ky y)/scale + phase`` of every mode."""
        out = []
        for m in self.modes:
            ph = m.phase
            for k, xi in zip(m.kx, x):
                if k:
                    ph = ph + (TWO_PI * k / scale) * xi
            if m.ky:
                ph = ph + (TWO_PI * m.ky / scale) * y
            out.append(ph)
        return out

    def __call__(self, x, y=0.0, t=0.0):
        x = tuple(x) if isinstance(x, (tuple, list)) else (x,)
        val = self.mean
        for m, ph in zip(self.modes, self.phase_arrays(x, y)):
            val = val + m.amplitude * np.cos(ph + TWO_PI * m.kt * t)
        if self.reciprocal:
            return 1.0 / val
        return val

    # -- serialization ------------------------------------------------------
    def to_dict(self) -> dict:
        d = {"mean": self.mean, "modes": [m.to_dict() for m in self.modes]}
        if self.reciprocal:
            d["reciprocal"] = True
        return d

    @classmethod
    def from_dict(cls, d) -> "CoeffField":
        if isinstance(d, (int, float)):
            return cls.constant(d)
        _check_keys(d, {"mean", "modes", "reciprocal"}, "coefficient")
        modes = []
        for md in d.get("modes", []):
            _check_keys(md, {"amp", "phase", "kx", "ky", "kt"}, "mode")
            if "amp" not in md:
                raise ConfigurationError("mode needs 'amp'")
            modes.append(Mode(md["amp"], md.get("phase", 0.0), md.get("kx", ()),
                              md.get("ky", 0), md.get("kt", 0)))
        return cls(d.get("mean", 0.0), tuple(modes), bool(d.get("reciprocal", False)))


class CoeffEvaluator:
    """A coefficient bound to fixed node coordinates, cheap to re-evaluate in time.

    ``scale`` evaluates the field at ``(x/scale, y/scale, t/scale)``.
    """

    def __init__(self, coeff: CoeffField, x, y=0.0, scale: float = 1.0, shape=None):
        self.coeff = coeff
        self.scale = float(scale)
        static = coeff.mean
        self._timed = []
        for m, ph in zip(coeff.modes, coeff.phase_arrays(x, y, self.scale)):
            if m.kt == 0:
                static = static + m.amplitude * np.cos(ph)
            else:
                self._timed.append((m.amplitude, ph, TWO_PI * m.kt / self.scale))
        if shape is not None:
            static = np.broadcast_to(static, shape).copy()
        self._static = static
        self._cache = None
        if not self._timed:
            self._cache = (None, 1.0 / static if coeff.reciprocal else static)

    def __call__(self, t: float = 0.0):
        if not self._timed:
            return self._cache[1]
        if self._cache is not None and self._cache[0] == t:
            return self._cache[1]
        val = self._static
        for amp, ph, w in self._timed:
            val = val + amp * np.cos(ph + w * t)
        if self.coeff.reciprocal:
            val = 1.0 / val
        self._cache = (t, val)
        return val


# ---------------------------------------------------------------------------
# terms and specs

@dataclass(frozen=True)
class CoerciveTerm:
    """``a(x,t) |q_x|^beta`` with ``a >= eta > 0``."""

    a: CoeffField
    beta: float = 1.0
    kind = "coercive"

    def __post_init__(self):
        if self.beta < 1:
            raise ConfigurationError(f"coercive exponent must be >= 1, got {self.beta}")
        if self.a.depends_on_y:
            raise ConfigurationError("coercive coefficient a(x,t) may not depend on y")


@dataclass(frozen=True)
class DriftTerm:
    """``b(x,y,t) |q_y + l|`` (absolute) or ``b(x,y,t) (q_y + l)`` (linear)."""

    b: CoeffField
    shape: Literal["absolute", "linear"] = "absolute"
    offset: float = 0.0
    kind = "drift"

    def __post_init__(self):
        if self.shape not in ("absolute", "linear"):
            raise ConfigurationError(f"unknown drift shape {self.shape!r}")


@dataclass(frozen=True)
class SourceTerm:
    """``-f(x,t)``."""

    f: CoeffField
    kind = "source"

    def __post_init__(self):
        if self.f.depends_on_y:
            raise ConfigurationError("source f(x,t) may not depend on y")


Term = Union[CoerciveTerm, DriftTerm, SourceTerm]


@dataclass(frozen=True)
class GraphSpec:
    """Graph Hamiltonian ``H(x,u,t,p) = c(x,t)|p| + g(u,t)``.

    ``g`` uses the y-slot of :class:`Mode` (``ky``) for its u-dependence.
    """

    c: CoeffField
    g: CoeffField

    def __post_init__(self):
        if self.c.depends_on_y:
            raise ConfigurationError("graph speed c(x,t) may not depend on u")
        if self.g.depends_on_x:
            raise ConfigurationError("graph forcing g(u,t) may not depend on x")

    def eval(self, x, u, t, p):
        """Vectorized ``H(x, u, t, p)``; ``p`` is a sequence of gradient components."""
        p = tuple(p) if isinstance(p, (tuple, list)) else (p,)
        norm = np.sqrt(sum(np.square(pi) for pi in p)) if len(p) > 1 else np.abs(p[0])
        return self.c(x, 0.0, t) * norm + self.g((), u, t)

    def to_dict(self) -> dict:
        return {"c": self.c.to_dict(), "g": self.g.to_dict()}

    @classmethod
    def from_dict(cls, d) -> "GraphSpec":
        _check_keys(d, {"c", "g"}, "graph")
        return cls(CoeffField.from_dict(d["c"]), CoeffField.from_dict(d.get("g", 0.0)))


@dataclass(frozen=True)
class HamiltonianSpec:
    """Sum of primitive terms, optionally shifted in gradient space.

    ``shift_x``/``shift_y`` hold the accumulated gradient offset ``P`` so that the
    spec evaluates ``F(x, y, t, p + P)``.
    """

    terms: tuple[Term, ...] = ()
    l_declared: float = 0.0
    graph_inner: GraphSpec | None = None
    shift_x: tuple[float, ...] = ()
    shift_y: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        object.__setattr__(self, "shift_x", tuple(float(s) for s in self.shift_x))
        object.__setattr__(self, "shift_y", float(self.shift_y))
        object.__setattr__(self, "l_declared", float(self.l_declared))
        n_coercive = sum(isinstance(t, CoerciveTerm) for t in self.terms)
        if n_coercive > 1:
            raise ConfigurationError(f"at most one coercive term allowed, got {n_coercive}")
        for t in self.terms:
            if isinstance(t, DriftTerm) and t.offset != self.l_declared:
                raise ConfigurationError(
                    f"drift offset {t.offset} differs from declared l={self.l_declared}"
                )

    # -- structure ----------------------------------------------------------
    @property
    def coercive(self) -> CoerciveTerm | None:
        for t in self.terms:
            if isinstance(t, CoerciveTerm):
                return t
        return None

    @property
    def drifts(self) -> tuple[DriftTerm, ...]:
        return tuple(t for t in self.terms if isinstance(t, DriftTerm))

    @property
    def sources(self) -> tuple[SourceTerm, ...]:
        return tuple(t for t in self.terms if isinstance(t, SourceTerm))

    def _coeffs(self):
        for t in self.terms:
            yield getattr(t, "a", None) or getattr(t, "b", None) or t.f

    @property
    def depends_on_t(self) -> bool:
        return any(c.depends_on_t for c in self._coeffs())

    @property
    def depends_on_y(self) -> bool:
        return any(c.depends_on_y for c in self._coeffs())

    @property
    def depends_on_x(self) -> bool:
        return any(c.depends_on_x for c in self._coeffs())

    @property
    def uses_py(self) -> bool:
        return bool(self.drifts)

    @property
    def l_effective(self) -> float:
        """Drift offset of the shifted spec: ``l + P_y``."""
        return self.l_declared + self.shift_y

    def space_dims_hint(self) -> int:
        n = max((c.x_dims for c in self._coeffs()), default=0)
        return max(n, len(self.shift_x), 1)

    # -- evaluation ---------------------------------------------------------
    def eval(self, x, y, t, p_x, p_y):
        """Vectorized evaluation; ``x`` and ``p_x`` are sequences (or scalars in 1D)."""
        x = tuple(x) if isinstance(x, (tuple, list)) else (x,)
        p_x = tuple(p_x) if isinstance(p_x, (tuple, list)) else (p_x,)
        n = max(len(p_x), len(self.shift_x))
        sx = _as_tuple(self.shift_x, n)
        q_x = tuple(pi + si for pi, si in zip(_as_tuple(p_x, n), sx))
        q_y = p_y + self.shift_y
        return self._eval_q(x, y, t, q_x, q_y)

    def _eval_q(self, x, y, t, q_x, q_y):
        val = 0.0
        for term in self.terms:
            if isinstance(term, CoerciveTerm):
                if len(q_x) == 1:
                    norm = np.abs(q_x[0])
                else:
                    norm = np.sqrt(sum(np.square(q) for q in q_x))
                mag = norm if term.beta == 1 else norm ** term.beta
                val = val + term.a(x, 0.0, t) * mag
            elif isinstance(term, DriftTerm):
                arg = q_y + term.offset
                val = val + term.b(x, y, t) * (np.abs(arg) if term.shape == "absolute" else arg)
            else:
                val = val - term.f(x, 0.0, t)
        return val

    __call__ = eval

    def with_source(self, c: float) -> "HamiltonianSpec":
        """Spec for ``G + c`` (adds a constant source term ``-(-c)``)."""
        return replace(self, terms=self.terms + (SourceTerm(CoeffField.constant(-c)),))

    # -- serialization ------------------------------------------------------
    def to_dict(self) -> dict:
        terms = []
        for t in self.terms:
            if isinstance(t, CoerciveTerm):
                terms.append({"kind": "coercive", "a": t.a.to_dict(), "beta": t.beta})
            elif isinstance(t, DriftTerm):
                terms.append({"kind": "drift", "b": t.b.to_dict(), "shape": t.shape,
                              "offset": t.offset})
            else:
                terms.append({"kind": "source", "f": t.f.to_dict()})
        d = {"terms": terms, "l": self.l_declared}
        if self.graph_inner is not None:
            d["graph"] = self.graph_inner.to_dict()
        if self.shift_x or self.shift_y:
            d["shift"] = {"p_x": list(self.shift_x), "p_y": self.shift_y}
        return d

    @classmethod
    def from_dict(cls, d) -> "HamiltonianSpec":
        _check_keys(d, {"terms", "l", "graph", "shift"}, "spec")
        if "graph" in d and "terms" not in d:
            spec = lift(GraphSpec.from_dict(d["graph"]))
        else:
            l = float(d.get("l", 0.0))
            terms = []
            for td in d.get("terms", []):
                kind = td.get("kind")
                if kind == "coercive":
                    _check_keys(td, {"kind", "a", "beta"}, "coercive term")
                    terms.append(CoerciveTerm(CoeffField.from_dict(td.get("a", 1.0)),
                                              float(td.get("beta", 1.0))))
                elif kind == "drift":
                    _check_keys(td, {"kind", "b", "shape", "offset"}, "drift term")
                    terms.append(DriftTerm(CoeffField.from_dict(td.get("b", 1.0)),
                                           td.get("shape", "absolute"),
                                           float(td.get("offset", l))))
                elif kind == "source":
                    _check_keys(td, {"kind", "f"}, "source term")
                    terms.append(SourceTerm(CoeffField.from_dict(td.get("f", 0.0))))
                else:
                    raise ConfigurationError(f"unknown term kind {kind!r}")
            graph = GraphSpec.from_dict(d["graph"]) if "graph" in d else None
            spec = cls(tuple(terms), l, graph)
        if "shift" in d:
            _check_keys(d["shift"], {"p_x", "p_y"}, "shift")
            spec = shift(spec, (tuple(d["shift"].get("p_x", ())), d["shift"].get("p_y", 0.0)))
        return spec

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _check_keys(d, allowed, what):
    if not isinstance(d, dict):
        raise ConfigurationError(f"{what} must be a mapping, got {type(d).__name__}")
    extra = set(d) - set(allowed)
    if extra:
        raise ConfigurationError(f"unknown key(s) in {what}: {sorted(extra)}")


# ---------------------------------------------------------------------------
# operations

def lift(graph: GraphSpec) -> HamiltonianSpec:
    """Level-set lift ``F(x,y,t,p_x,p_y) = |p_y| H(x,y,t,p_x/|p_y|)``.

    For ``H = c|p| + g`` this is ``c(x,t)|p_x| + g(y,t)|p_y|``, which also covers the
    ``p_y = 0`` branch ``c|p_x|`` continuously.
    """
    lo, _ = graph.c.bounds()
    if lo <= 0:
        # bounds are conservative; check on a sample lattice before rejecting
        s = np.arange(64) / 64.0
        vals = graph.c((s[:, None], s[None, :]), 0.0, s[:, None, None]) \
            if graph.c.x_dims > 1 else graph.c(s[:, None], 0.0, s[None, :])
        if np.min(vals) <= 0:
            raise SpecRejected("graph speed c must be positive for the lift to be coercive")
    return HamiltonianSpec(
        (CoerciveTerm(graph.c, 1.0), DriftTerm(graph.g, "absolute", 0.0)),
        l_declared=0.0,
        graph_inner=graph,
    )


def shift(spec: HamiltonianSpec, P) -> HamiltonianSpec:
    """Spec evaluating ``F(x, y, t, q + P)``; offsets accumulate by composition."""
    p_x, p_y = P
    p_x = _as_tuple(p_x)
    n = max(len(p_x), len(spec.shift_x))
    new_x = tuple(a + b for a, b in zip(_as_tuple(spec.shift_x, n), _as_tuple(p_x, n)))
    while new_x and new_x[-1] == 0:
        new_x = new_x[:-1]
    return replace(spec, shift_x=new_x, shift_y=spec.shift_y + float(p_y))


# ---------------------------------------------------------------------------
# sampled structure constants

@dataclass(frozen=True)
class ProbeConfig:
    """Deterministic sample lattice for :func:`estimate_constants`."""

    samples_per_axis: int = 32
    time_samples: int = 16
    p_max: float = 20.0
    radii: int = 41
    directions: int = 16
    fd_step: float = 1e-5
    ratio_cap: float = 1e3
    space_dims: int | None = None


@dataclass(frozen=True)
class AssumptionReport:
    """Sampled structure constants of a Hamiltonian.

    These come from finite samples and difference quotients; they are an
    admission heuristic, not a certificate.
    """

    C0: float
    C1: float
    C2: float
    C3: float
    C4: float
    C5: float
    l: float
    eta: float
    coercive_ok: bool
    lipschitz_ok: bool
    graph_h6_ok: bool | None
    h6_constant: float | None
    samples_used: int
    space_dims: int
    heuristic: bool = True

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def _sample_lattice(spec: HamiltonianSpec, cfg: ProbeConfig, n: int):
    s = np.arange(cfg.samples_per_axis) / cfg.samples_per_axis
    nt = cfg.time_samples if spec.depends_on_t else 1
    ts = np.arange(nt) / nt
    ys = s if spec.depends_on_y else np.zeros(1)
    # axes: (x1, [x2], y, t)
    axes = [s] * n + [ys, ts]
    mesh = np.meshgrid(*axes, indexing="ij", sparse=True)
    x = tuple(mesh[:n])
    y, t = mesh[n], mesh[n + 1]
    return x, y, t


def _directions(n: int, count: int):
    if n == 1:
        return [(1.0,), (-1.0,)]
    ang = 2 * np.pi * np.arange(count) / count
    return [(math.cos(a), math.sin(a)) for a in ang]


def estimate_constants(spec: HamiltonianSpec, probe: ProbeConfig | None = None) -> AssumptionReport:
    """Sample the structure constants C0..C5 of ``spec`` on a fixed lattice.

    Raises :class:`SpecRejected` when a sampled Lipschitz ratio exceeds
    ``probe.ratio_cap``.
    """
    cfg = probe or ProbeConfig()
    n = cfg.space_dims or spec.space_dims_hint()
    x, y, t = _sample_lattice(spec, cfg, n)
    count = 0

    def G(px, py, yy=y, tt=t):
        nonlocal count
        v = np.broadcast_to(spec.eval(x, yy, tt, px, py),
                            np.broadcast_shapes(*(np.shape(a) for a in x), np.shape(yy), np.shape(tt)))
        count += v.size
        return v

    zero = (0.0,) * n
    C0 = float(np.max(np.abs(G(zero, 0.0))))

    coeff = spec.coercive
    eta = 0.0
    if coeff is not None:
        eta = float(np.min(coeff.a(x, 0.0, t)))

    # affine minorant of r -> min G(., r e, 0)
    radii = np.linspace(0.0, cfg.p_max, cfg.radii)
    dirs = _directions(n, cfg.directions)
    m = np.array([min(float(np.min(G(tuple(r * d for d in e), 0.0))) for e in dirs)
                  for r in radii])
    upper = radii >= 0.5 * cfg.p_max
    slopes = np.diff(m)[upper[1:] & upper[:-1]] / np.diff(radii)[0]
    slope = float(np.min(slopes)) if slopes.size else 0.0
    C1 = 0.5 * slope if slope > 0 and eta > 0 else 0.0
    C2 = max(0.0, float(np.max(C1 * radii - m)))
    coercive_ok = C1 > 0

    # Lipschitz quotients
    l_eff = spec.l_effective
    h = cfg.fd_step
    offs = np.array([-5.0, -2.0, -1.0, -0.5, 0.5, 1.0, 2.0, 5.0])
    q_ys = offs - l_eff
    q_rs = [0.0, 1.0, 5.0]
    C3 = C4 = C5 = 0.0
    cap = cfg.ratio_cap
    lipschitz_ok = True
    for r in q_rs:
        for e in dirs[: max(1, len(dirs) // 4)] if n > 1 else dirs[:1]:
            px = tuple(r * d for d in e)
            if spec.depends_on_y:
                for qy in q_ys:
                    dy = (G(px, qy, y + h) - G(px, qy, y - h)) / (2 * h)
                    C3 = max(C3, float(np.max(np.abs(dy))) / abs(qy + l_eff))
                d0 = (G(px, -l_eff, y + h) - G(px, -l_eff, y - h)) / (2 * h)
                if np.max(np.abs(d0)) > 1e-6 * (1 + C0):
                    C3 = math.inf
            if spec.depends_on_t:
                for qy in np.concatenate([q_ys, [0.0]]):
                    g0 = G(px, qy)
                    dt = (G(px, qy, y, t + h) - G(px, qy, y, t - h)) / (2 * h)
                    ratio = np.abs(dt) / (1 + abs(qy) + np.abs(g0))
                    C4 = max(C4, float(np.max(ratio)))
            if spec.uses_py:
                for qy in np.concatenate([q_ys, [-l_eff, 0.0]]):
                    g0 = G(px, qy)
                    fwd = (G(px, qy + h) - g0) / h
                    bwd = (g0 - G(px, qy - h)) / h
                    C5 = max(C5, float(np.max(np.abs(fwd))), float(np.max(np.abs(bwd))))
    worst = max(C3, C4, C5)
    if not np.isfinite(worst) or worst > cap:
        raise SpecRejected(
            f"sampled Lipschitz ratio {worst:.3g} exceeds cap {cap:g}: spec outside the admissible class"
        )

    graph_ok = None
    h6 = None
    if spec.graph_inner is not None:
        gr = spec.graph_inner
        u = y if spec.depends_on_y else np.zeros(1)
        h6 = 0.0
        for r in q_rs[1:] + [cfg.p_max]:
            for e in dirs:
                p = tuple(r * d for d in e)
                up = gr.eval(x, u, t, tuple((1 + h) * c for c in p))
                dn = gr.eval(x, u, t, tuple((1 - h) * c for c in p))
                dpp = (up - dn) / (2 * h)
                h6 = max(h6, float(np.max(np.abs(dpp - gr.eval(x, u, t, p)))))
                count += np.size(up) * 3
        graph_ok = bool(h6 <= cap)

    return AssumptionReport(
        C0=C0, C1=C1, C2=C2, C3=C3, C4=C4, C5=C5, l=l_eff, eta=eta,
        coercive_ok=coercive_ok, lipschitz_ok=lipschitz_ok, graph_h6_ok=graph_ok,
        h6_constant=h6, samples_used=int(count), space_dims=n,
    )


def oscillation_bound_K(report: AssumptionReport, space_dims: int | None = None) -> float:
    """Oscillation bound ``(C0 + C2) S + |l|`` with ``S = 1 + sqrt(n)/(2 C1)``.

    ``S`` is the smallest horizon for which the backward cone of slope ``C1``
    covers a full space-time period.
    """
    if report.C1 <= 0:
        raise ConfigurationError("oscillation bound needs C1 > 0 (coercive spec)")
    n = space_dims if space_dims is not None else report.space_dims
    S = 1.0 + math.sqrt(n) / (2.0 * report.C1)
    return (report.C0 + report.C2) * S + abs(report.l)


def constant_spec(c: float) -> HamiltonianSpec:
    """``G = c`` everywhere (no gradient dependence)."""
    return HamiltonianSpec((SourceTerm(CoeffField.constant(-c)),))
