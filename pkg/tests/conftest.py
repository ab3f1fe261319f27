import numpy as np
import pytest

from nilgeo.algebra import load_fixture


@pytest.fixture(scope="session")
def sl2r():
    return load_fixture("sl2R")


@pytest.fixture(scope="session")
def su21():
    return load_fixture("su21")


@pytest.fixture(scope="session")
def sl3r():
    return load_fixture("sl3R")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def quat_matrix(q):
    """2x2 complex matrix of a quaternion (independent multiplication oracle)."""
    a, b, c, d = q
    return np.array([[a + 1j * b, c + 1j * d], [-c + 1j * d, a - 1j * b]])


def commutator(x, y):
    return x @ y - y @ x


_CRITERIA: dict[str, str] = {}


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line per acceptance criterion; printed at the end of the run."""

    def record(number: int, title: str, passed: bool, detail: str = "") -> bool:
        line = f"{'PASS' if passed else 'FAIL'} criterion {number:2d}: {title}"
        if detail:
            line += f" ({detail})"
        _CRITERIA[f"{number:02d}"] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for key in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[key])
