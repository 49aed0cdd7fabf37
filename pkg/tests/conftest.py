import numpy as np
import pytest
from hypothesis import settings

from ssfplsim.functional import Grid, build_bspline_basis

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

# lines reported by tests/test_acceptance.py, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def grid100():
    return Grid.uniform(0.0, 1.0, 100)


@pytest.fixture(scope="session")
def basis33(grid100):
    return build_bspline_basis(3, 3, grid100)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
