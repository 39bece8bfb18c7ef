import numpy as np
import pytest

from pgdiverge import FunctionHandle, Interval

TWO_PI = 2 * np.pi


@pytest.fixture
def unit():
    return Interval(0.0, 1.0)


@pytest.fixture
def circle():
    return Interval(0.0, TWO_PI)


@pytest.fixture
def half_circle():
    return Interval(0.0, np.pi)


def fn(f, d, label=""):
    return FunctionHandle(f, d, label=label)


# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES = {}


def record_acceptance(criterion, ok, detail):
    line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'} - {detail}"
    ACCEPTANCE_LINES[criterion] = line
    print(line)
    return ok


@pytest.fixture
def acceptance():
    return record_acceptance


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
