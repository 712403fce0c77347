import numpy as np
import pytest

from hetgames import generate_random_zssg, matrix_game_from_zero_sum

# acceptance tests register one line per criterion; printed after the run
# so they stay visible whatever capture mode is active
_criterion_lines: list = []


def record_criterion(line: str) -> None:
    _criterion_lines.append(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _criterion_lines:
        terminalreporter.section("acceptance criteria")
        for line in _criterion_lines:
            terminalreporter.line(line)


@pytest.fixture
def pennies():
    return matrix_game_from_zero_sum([[1.0, -1.0], [-1.0, 1.0]])


@pytest.fixture
def small_sg():
    """2-state 2-action zero-sum stochastic game, mildly discounted."""
    return generate_random_zssg(2, 2, ((0.0, 1.0), (0.0, 0.2)), 0.3, 8128)


@pytest.fixture
def rng():
    return np.random.default_rng(20260822)
