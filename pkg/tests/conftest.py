import numpy as np
import pytest

from viscoflux import lpx
from viscoflux.grid import FrequencyGrid
from viscoflux.model import FluidParams


@pytest.fixture(scope="session")
def grid32():
    return FrequencyGrid(2, 32)


@pytest.fixture(scope="session")
def grid64():
    return FrequencyGrid(2, 64)


@pytest.fixture(scope="session")
def part64(grid64):
    return lpx.build_partition(grid64, 2.0)


@pytest.fixture(scope="session")
def part32(grid32):
    return lpx.build_partition(grid32, 2.0)


@pytest.fixture
def params():
    return FluidParams()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance(request):
    """``acceptance(ok, detail)`` prints a PASS/FAIL line for the current
    criterion, keeps it for the terminal summary, then asserts ``ok``."""

    def record(ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} {request.node.name}: {detail}"
        print(line)
        _ACCEPTANCE_LINES.append(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
