"""Acceptance suite: the built-in corpus run through the CLI.

The corpus runs twice, once on a single thread and once on a four-thread pool.
Criteria 1 to 8 are read from the single-thread run and must also pass in the
threaded one; criterion 9 compares every CSV file of the two runs byte for byte.
One PASS/FAIL line per criterion is printed (also collected for the pytest
terminal summary).  Run ``python tests/test_acceptance.py`` for the lines alone.
"""

import json
import os
import sys
from pathlib import Path

import pytest

from hjhomog import cli

LINES = []
NAMES = {
    1: "eikonal effective Hamiltonian within 0.05, runtime <= 60 s",
    2: "harmonic-mean lift within 0.05",
    3: "discount vs long-time gap <= 0.02 on every corpus spec, runtime <= 300 s",
    4: "discounted-solution structure suite",
    5: "convergence decay factor >= 1.3 per halving",
    6: "graph pipeline discrepancy <= 0.05",
    7: "scheme property suite",
    8: "effective Hamiltonian stability",
    9: "bit-identical CSVs across runs and thread counts",
}


def run_corpus(out: Path, threads: int) -> dict:
    old = os.environ.get(cli.THREADS_ENV)
    os.environ[cli.THREADS_ENV] = str(threads)
    try:
        code = cli.main(["corpus", "--out", str(out)])
    finally:
        if old is None:
            os.environ.pop(cli.THREADS_ENV, None)
        else:
            os.environ[cli.THREADS_ENV] = old
    report = json.loads((out / "report.json").read_text(encoding="utf-8"))
    return {"code": code, "criteria": {c["number"]: c for c in report["criteria"]}, "dir": out}


def csv_files(out: Path) -> dict:
    return {p.name: p.read_bytes() for p in sorted(out.glob("*.csv"))}


def record(number: int, passed: bool, note: str = "") -> str:
    line = f"{'PASS' if passed else 'FAIL'} criterion {number}: {NAMES[number]}"
    if note:
        line += f" [{note}]"
    LINES.append(line)
    print(line)
    return line


def _note(crit: dict) -> str:
    d = crit["detail"]
    for key in ("max_error", "max_gap", "max_discrepancy", "max_deviation"):
        if key in d:
            return f"{key}={d[key]:.3g}"
    return ""


@pytest.fixture(scope="module")
def runs(tmp_path_factory):
    base = tmp_path_factory.mktemp("acceptance")
    return run_corpus(base / "threads1", 1), run_corpus(base / "threads4", 4)


@pytest.mark.slow
@pytest.mark.parametrize("number", range(1, 9))
def test_criterion(runs, number):
    single, pooled = runs
    crit = single["criteria"][number]
    ok = bool(crit["passed"]) and bool(pooled["criteria"][number]["passed"])
    record(number, ok, _note(crit))
    assert ok, crit["detail"]


@pytest.mark.slow
def test_criterion_9_determinism(runs):
    single, pooled = runs
    a, b = csv_files(single["dir"]), csv_files(pooled["dir"])
    differing = sorted(k for k in set(a) | set(b) if a.get(k) != b.get(k))
    ok = bool(a) and not differing
    record(9, ok, f"{len(a)} files compared" if ok else "differ: " + ", ".join(differing))
    assert ok


@pytest.mark.slow
def test_corpus_exit_status(runs):
    assert [r["code"] for r in runs] == [0, 0]


if __name__ == "__main__":
    import tempfile

    with tempfile.TemporaryDirectory() as tmp:
        r1 = run_corpus(Path(tmp) / "threads1", 1)
        r4 = run_corpus(Path(tmp) / "threads4", 4)
        status = 0
        for n in range(1, 9):
            ok = r1["criteria"][n]["passed"] and r4["criteria"][n]["passed"]
            record(n, ok, _note(r1["criteria"][n]))
            status |= not ok
        a, b = csv_files(r1["dir"]), csv_files(r4["dir"])
        ok = bool(a) and a == b
        record(9, ok)
        status |= not ok
    sys.exit(status)
