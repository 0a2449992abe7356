import numpy as np
import pytest

from hadamard_flow.geodesic import EuclideanSpace
from hadamard_flow.model_spaces import TripodSpace

_ACCEPTANCE = []


@pytest.fixture
def criterion():
    """Record one acceptance line: ``criterion(number, title, ok, detail)``."""

    def record(number, title, ok, detail=""):
        line = f"CRITERION {number:>2} [{'PASS' if ok else 'FAIL'}] {title}: {detail}"
        _ACCEPTANCE.append((number, line))
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_ACCEPTANCE):
        terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def plane():
    return EuclideanSpace(2)


@pytest.fixture
def tripod():
    return TripodSpace()
