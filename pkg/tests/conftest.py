import numpy as np
import pytest

from mfewave import build_grid, cosine_modulation


@pytest.fixture
def small_grid():
    return build_grid(40)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def mod():
    return cosine_modulation(0.1, 0.2)


ACCEPTANCE_LINES = []


def report(criterion, passed, detail):
    """Record one acceptance line; printed in the terminal summary."""
    ACCEPTANCE_LINES.append(f"[{'PASS' if passed else 'FAIL'}] {criterion}: {detail}")
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
