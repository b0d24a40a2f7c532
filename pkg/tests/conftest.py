from fractions import Fraction

import pytest

from maxwell_selfsim.grid import LogGrid, exp_power
from maxwell_selfsim.model import make_elastic, make_inelastic, make_thermostat
from maxwell_selfsim.selfsim import solve_profile

SEED = 20240611


@pytest.fixture(scope="session")
def grid():
    return LogGrid()


@pytest.fixture(scope="session")
def model_a():
    return make_elastic(3)


@pytest.fixture(scope="session")
def model_b():
    # m = 1 gives beta = 1; theta = 4/3 lies below the threshold 2
    return make_thermostat(3, None, 1, Fraction(4, 3))


@pytest.fixture(scope="session")
def model_c():
    return make_inelastic(3, Fraction(1, 2))


@pytest.fixture(scope="session")
def presets(model_a, model_b, model_c):
    return {"A": model_a, "B": model_b, "C": model_c}


@pytest.fixture(scope="session")
def maxwellian(grid):
    return exp_power(grid)


@pytest.fixture(scope="session")
def profile_c(model_c):
    return solve_profile(model_c, p=1.0, tol=1e-10)


# one line per acceptance criterion, shown in the terminal summary
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
