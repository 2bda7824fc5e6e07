import numpy as np
import pytest

from hjhomog import CoeffField, CoerciveTerm, DriftTerm, HamiltonianSpec, SourceTerm

ONE = CoeffField.constant(1.0)


@pytest.fixture
def eikonal_sin():
    """|p_x| - sin(2 pi x)."""
    return HamiltonianSpec((CoerciveTerm(ONE), SourceTerm(CoeffField.sin(1.0, kx=1))))


@pytest.fixture
def y_drift_l0():
    """|p_x| + sin(2 pi y)|p_y|."""
    return HamiltonianSpec((CoerciveTerm(ONE), DriftTerm(CoeffField.sin(1.0, ky=1))))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance") or \
        __import__("sys").modules.get("tests.test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
