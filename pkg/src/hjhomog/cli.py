"""Command-line experiment runner.

Usage::

    hjhomog <verify|ergodic|effective|homogenize|graph> --config cfg.json \\
            [--set section.key=value ...] [--out DIR]
    hjhomog corpus [--out DIR] [--only 1,3] [--set scheme.residual_tol=1e-5]

Exit status is 0 on success, 1 when the configuration is rejected (nothing is
written) and 2 on numerical failure (a report with diagnostics is written).
The thread count comes from ``HJHOMOG_THREADS`` (default: all CPUs).
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import math
import os
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from . import __version__
from .corpus import CorpusSettings, run_checks
from .effective import PGrid, tabulate
from .ergodic import DEFAULT_ALPHAS, diagnostics, ergodic_discount, ergodic_longtime
from .errors import ConfigurationError, NumericalError
from .grid import TorusGrid
from .hamiltonians import (CoeffField, GraphSpec, HamiltonianSpec, ProbeConfig,
                           estimate_constants, _check_keys)
from .multiscale import (DEFAULT_EPSILONS, convergence_study, effective_H_table, graph_pipeline,
                         solve_graph, solve_homogenized)
from .scheme import SchemeConfig

THREADS_ENV = "HJHOMOG_THREADS"
EXPERIMENTS = ("verify", "ergodic", "effective", "homogenize", "graph")

EXPERIMENT_KEYS = {
    "verify": {"kind", "probe"},
    "ergodic": {"kind", "alphas", "horizon", "methods"},
    "effective": {"kind", "p_grid", "alphas", "horizon", "cross_check"},
    "homogenize": {"kind", "epsilons", "horizon", "u0", "p_grid", "table_cells"},
    "graph": {"kind", "slopes", "horizon", "cells_per_unit", "epsilon", "u0", "fine_horizon",
              "fine_cells", "p_values"},
}
PROBE_KEYS = {"samples_per_axis", "time_samples", "p_max", "radii", "directions", "fd_step",
              "ratio_cap"}
SCHEME_KEYS = {"cfl", "dissipation", "gradient_probe_radius", "residual_tol", "max_steps"}


def thread_count() -> int:
    raw = os.environ.get(THREADS_ENV, "")
    if not raw:
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError:
        raise ConfigurationError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    if n < 1:
        raise ConfigurationError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return n


# ---------------------------------------------------------------------------
# config handling

def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(config: dict, overrides) -> dict:
    """Apply ``section.key=value`` overrides (values parsed as JSON when possible)."""
    out = copy.deepcopy(config)
    for item in overrides or ():
        if "=" not in item:
            raise ConfigurationError(f"override {item!r} is not of the form key=value")
        key, val = item.split("=", 1)
        parts = [p for p in key.strip().split(".") if p]
        if not parts:
            raise ConfigurationError(f"override {item!r} has an empty key")
        node = out
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigurationError(f"override {item!r} descends into a non-section")
        node[parts[-1]] = _parse_value(val)
    return out


def _positive(name, v, integer=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v) or v <= 0:
        raise ConfigurationError(f"{name} must be a positive number, got {v!r}")
    if integer and int(v) != v:
        raise ConfigurationError(f"{name} must be an integer, got {v!r}")
    return int(v) if integer else float(v)


def parse_grid(d) -> TorusGrid:
    _check_keys(d, {"cells", "has_y", "periods"}, "grid")
    if "cells" not in d:
        raise ConfigurationError("grid needs 'cells'")
    cells = tuple(_positive("grid.cells", c, integer=True) for c in d["cells"])
    periods = d.get("periods")
    if periods is not None:
        periods = tuple(_positive("grid.periods", p) for p in periods)
    return TorusGrid(cells, bool(d.get("has_y", False)), periods)


def parse_scheme(d) -> SchemeConfig:
    d = d or {}
    _check_keys(d, SCHEME_KEYS, "scheme")
    kw = dict(d)
    if "dissipation" in kw and kw["dissipation"] is not None:
        kw["dissipation"] = tuple(float(v) for v in kw["dissipation"])
    if "max_steps" in kw:
        kw["max_steps"] = _positive("scheme.max_steps", kw["max_steps"], integer=True)
    return SchemeConfig(**kw)


def _alphas(v):
    if not isinstance(v, list) or not v:
        raise ConfigurationError("alphas must be a non-empty list")
    vals = tuple(_positive("alpha", a) for a in v)
    if any(b >= a for a, b in zip(vals, vals[1:])):
        raise ConfigurationError("alphas must be strictly decreasing")
    return vals


def _p_grid(v):
    if not isinstance(v, list) or not v:
        raise ConfigurationError("p_grid must be a list of [min, max, count] axes")
    for ax in v:
        if not isinstance(ax, list) or len(ax) != 3:
            raise ConfigurationError("each p_grid axis is [min, max, count]")
        _positive("p_grid count", ax[2], integer=True)
    return PGrid(tuple(tuple(ax) for ax in v))


def load_config(kind: str, raw: dict) -> dict:
    """Validate a raw config for experiment ``kind``; returns parsed objects."""
    _check_keys(raw, {"spec", "graph", "grid", "scheme", "experiment", "output"}, "config")
    exp = raw.get("experiment", {}) or {}
    _check_keys(exp, EXPERIMENT_KEYS[kind], f"{kind} experiment")
    if exp.get("kind", kind) != kind:
        raise ConfigurationError(f"config is for experiment {exp['kind']!r}, not {kind!r}")
    out = raw.get("output", {}) or {}
    _check_keys(out, {"dir", "formats"}, "output")
    formats = out.get("formats", ["json", "csv"])
    if not set(formats) <= {"json", "csv"}:
        raise ConfigurationError(f"unknown output formats {formats}")
    parsed = {"kind": kind, "experiment": exp, "scheme": parse_scheme(raw.get("scheme")),
              "formats": formats, "out_dir": out.get("dir")}
    if kind == "graph":
        if "graph" not in raw:
            raise ConfigurationError("graph experiment needs a 'graph' section")
        parsed["graph"] = GraphSpec.from_dict(raw["graph"])
    else:
        if "spec" not in raw:
            raise ConfigurationError(f"{kind} experiment needs a 'spec' section")
        parsed["spec"] = HamiltonianSpec.from_dict(raw["spec"])
    if kind in ("ergodic", "effective") or (kind == "graph" and "grid" in raw):
        if "grid" not in raw:
            raise ConfigurationError(f"{kind} experiment needs a 'grid' section")
        parsed["grid"] = parse_grid(raw["grid"])
    if "alphas" in exp:
        parsed["alphas"] = _alphas(exp["alphas"])
    for key in ("horizon", "fine_horizon"):
        if key in exp:
            _positive(f"experiment.{key}", exp[key])
    if kind in ("ergodic", "effective") and exp.get("horizon", 50.0) < 10:
        raise ConfigurationError("long-time horizon must be >= 10")
    if "p_grid" in exp:
        parsed["p_grid"] = _p_grid(exp["p_grid"])
    if "epsilons" in exp:
        for e in exp["epsilons"]:
            _positive("epsilon", e)
    if "u0" in exp:
        parsed["u0"] = CoeffField.from_dict(exp["u0"])
    if kind == "verify" and "probe" in exp:
        _check_keys(exp["probe"], PROBE_KEYS, "probe")
        parsed["probe"] = ProbeConfig(**exp["probe"])
    methods = exp.get("methods", ["discount", "longtime"])
    if not set(methods) <= {"discount", "longtime"} or not methods:
        raise ConfigurationError(f"unknown ergodic methods {methods}")
    parsed["methods"] = methods
    return parsed


# ---------------------------------------------------------------------------
# output

def csv_text(rows) -> str:
    """CSV with '.' decimals, shortest round-trip floats and '\\n' line ends."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_outputs(out_dir: Path, report: dict, tables: dict, formats) -> list[Path]:
    written = []
    if "csv" in formats:
        for name, rows in tables.items():
            p = out_dir / f"{name}.csv"
            write_atomic(p, csv_text(rows))
            written.append(p)
    if "json" in formats:
        p = out_dir / "report.json"
        write_atomic(p, json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n")
        written.append(p)
    return written


# ---------------------------------------------------------------------------
# experiments: each returns (results dict, {table name: rows})

def run_verify(cfg):
    rep = estimate_constants(cfg["spec"], cfg.get("probe"))
    d = rep.to_dict()
    rows = [("constant", "value")] + [(k, d[k]) for k in ("C0", "C1", "C2", "C3", "C4", "C5",
                                                           "l", "eta")]
    return {"assumptions": d}, {"assumptions": rows}


def run_ergodic(cfg):
    spec, grid, sch = cfg["spec"], cfg["grid"], cfg["scheme"]
    exp = cfg["experiment"]
    res, tables = {}, {}
    if "discount" in cfg["methods"]:
        r = ergodic_discount(spec, grid, cfg.get("alphas", DEFAULT_ALPHAS), sch)
        res["discount"] = r.to_dict()
        tables["discount_history"] = r.history_rows()
        report = estimate_constants(spec)
        res["diagnostics"] = [dict(alpha=s.alpha, **diagnostics(spec, s, report).to_dict())
                              for s in r.solutions]
    if "longtime" in cfg["methods"]:
        r = ergodic_longtime(spec, grid, float(exp.get("horizon", 50.0)), sch)
        res["longtime"] = r.to_dict()
        tables["longtime_history"] = r.history_rows()
    if len(res.get("discount", {})) and "longtime" in res:
        res["agreement"] = abs(res["discount"]["lambda"] - res["longtime"]["lambda"])
    return res, tables


def run_effective(cfg):
    spec, grid = cfg["spec"], cfg["grid"]
    exp = cfg["experiment"]
    dims = grid.space_dims + int(grid.has_y)
    table = tabulate(spec, grid, cfg.get("p_grid") or PGrid.uniform(dims), cfg["scheme"],
                     alphas=cfg.get("alphas", DEFAULT_ALPHAS),
                     horizon=float(exp.get("horizon", 50.0)),
                     cross_check=bool(exp.get("cross_check", True)))
    return {"table": table.header()}, {"effective_table": list(table.csv_rows())}


def run_homogenize(cfg):
    exp = cfg["experiment"]
    if "u0" not in cfg:
        raise ConfigurationError("homogenize experiment needs 'u0'")
    rep = convergence_study(cfg["spec"], cfg["u0"], float(exp.get("horizon", 0.25)),
                            tuple(exp.get("epsilons", DEFAULT_EPSILONS)),
                            p_grid=cfg.get("p_grid"),
                            table_cells=int(exp.get("table_cells", 32)), cfg=cfg["scheme"],
                            table_kwargs={"cross_check": False})
    return {"convergence": rep.to_dict()}, {"convergence": list(rep.csv_rows())}


def run_graph(cfg):
    graph, sch = cfg["graph"], cfg["scheme"]
    exp = cfg["experiment"]
    results = graph_pipeline(graph, tuple(exp.get("slopes", (0, 0.5, -0.5, 1, -1))), sch,
                             grid=cfg.get("grid"), T=float(exp.get("horizon", 50.0)),
                             cells_per_unit=int(exp.get("cells_per_unit", 128)))
    res = {"pipeline": [r.to_dict() for r in results]}
    tables = {"graph_pipeline": [results[0].CSV_HEADER] + [r.csv_row() for r in results]}
    if "epsilon" in exp:
        if "u0" not in cfg:
            raise ConfigurationError("graph fine comparison needs 'u0'")
        eps = float(exp["epsilon"])
        T = float(exp.get("fine_horizon", 0.25))
        cells = int(exp.get("fine_cells", math.ceil(32 / eps)))
        pv = exp.get("p_values", [-1.5, 1.5, 13])
        tab = effective_H_table(graph, np.linspace(*pv[:2], int(pv[2])), sch, cfg.get("grid"),
                                cross_check=False)
        g = TorusGrid((cells,) * max(graph.c.x_dims, 1))
        ue = solve_graph(graph, eps, cfg["u0"], T, g, sch)
        U = solve_homogenized(tab, cfg["u0"], T, g, sch)
        dist = float(np.max(np.abs(ue.values - U.values)))
        res["fine_comparison"] = {"epsilon": eps, "horizon": T, "cells": cells,
                                  "sup_distance": dist}
    return res, tables


RUNNERS = {"verify": run_verify, "ergodic": run_ergodic, "effective": run_effective,
           "homogenize": run_homogenize, "graph": run_graph}


def run_experiment(kind: str, config_path: str, overrides=(), out: str | None = None,
                   stream=None) -> int:
    stream = stream or sys.stdout
    try:
        with open(config_path, encoding="utf-8") as fh:
            raw = json.load(fh)
        raw = apply_overrides(raw, overrides)
        cfg = load_config(kind, raw)
        thread_count()
    except (OSError, json.JSONDecodeError, ConfigurationError, TypeError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    out_dir = Path(out or cfg["out_dir"] or f"hjhomog-{kind}")
    header = {"tool": "hjhomog", "version": __version__, "experiment": kind, "config": raw}
    t0 = time.perf_counter()
    try:
        results, tables = RUNNERS[kind](cfg)
    except ConfigurationError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        report = dict(header, status="numerical-failure",
                      error=f"{type(exc).__name__}: {exc}",
                      residual_history=getattr(exc, "residual_history", None),
                      step=getattr(exc, "step", None), slope=getattr(exc, "slope", None))
        write_outputs(out_dir, report, {}, ["json"])
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    report = dict(header, status="ok", results=results,
                  runtime_s=round(time.perf_counter() - t0, 3))
    paths = write_outputs(out_dir, report, tables, cfg["formats"])
    for p in paths:
        print(f"wrote {p}", file=stream)
    return 0


def corpus_settings(overrides) -> CorpusSettings:
    raw = apply_overrides({}, overrides)
    _check_keys(raw, {"scheme", "corpus"}, "corpus overrides")
    sch = parse_scheme(raw.get("scheme"))
    extra = raw.get("corpus", {}) or {}
    _check_keys(extra, {"cells_scale", "horizon", "alphas"}, "corpus")
    kw = {}
    if "cells_scale" in extra:
        kw["cells_scale"] = _positive("corpus.cells_scale", extra["cells_scale"])
    if "horizon" in extra:
        kw["horizon"] = _positive("corpus.horizon", extra["horizon"])
    if "alphas" in extra:
        kw["alphas"] = _alphas(extra["alphas"])
    return CorpusSettings(scheme=sch, **kw)


def run_corpus(overrides=(), out: str | None = None, only=None, stream=None) -> int:
    stream = stream or sys.stdout
    try:
        settings = corpus_settings(overrides)
        workers = thread_count()
        if only:
            only = sorted({int(c) for c in str(only).split(",")})
            bad = [c for c in only if c not in range(1, 10)]
            if bad:
                raise ConfigurationError(f"unknown criteria {bad}")
    except (ConfigurationError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    out_dir = Path(out or "hjhomog-corpus")
    results = run_checks(settings, only, workers)
    tables = {f"criterion_{r.number}": [r.header] + r.rows for r in results}
    summary = [("criterion", "name", "passed")] + [(r.number, r.name, int(r.passed))
                                                  for r in results]
    tables["summary"] = summary
    report = {"tool": "hjhomog", "version": __version__, "experiment": "corpus",
              "config": {"overrides": list(overrides or ()), "only": only,
                         "threads": workers},
              "criteria": [r.to_dict() for r in results]}
    write_outputs(out_dir, report, tables, ["json", "csv"])
    for r in results:
        print(r.line(), file=stream)
    failed = [r for r in results if not r.passed]
    if failed:
        names = ", ".join(f"{r.number} ({r.name})" for r in failed)
        print(f"failed criteria: {names}", file=sys.stderr)
        return 3
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hjhomog",
                                 description="Ergodic constants and effective Hamiltonians "
                                             "for periodic Hamilton-Jacobi equations.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for kind in EXPERIMENTS:
        p = sub.add_parser(kind, help=f"run a {kind} experiment from a JSON config")
        p.add_argument("--config", required=True, help="path to the JSON config")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config scalar, e.g. scheme.cfl=0.4")
        p.add_argument("--out", help="output directory (overrides output.dir)")
    p = sub.add_parser("corpus", help="run the built-in acceptance corpus")
    p.add_argument("--out", help="output directory (default ./hjhomog-corpus)")
    p.add_argument("--only", help="comma-separated criterion numbers")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="scheme.* or corpus.cells_scale/horizon/alphas overrides")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "corpus":
        return run_corpus(args.set, args.out, args.only)
    return run_experiment(args.command, args.config, args.set, args.out)


if __name__ == "__main__":
    sys.exit(main())
