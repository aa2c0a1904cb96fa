import numpy as np
import pytest

from sera.quadrature import A_SERO, solve_weights
from sera.synthesis import gen_sample_points


@pytest.fixture(scope="session")
def qm_q1_n3():
    """Moment-exact weights on the standard jittered lattice, q=1, n=3."""
    return solve_weights(gen_sample_points(1, A_SERO, 3.0, seed=0))


@pytest.fixture(scope="session")
def qm_q1_n8():
    """Weights on a level-8 box, used for level-4 recovery with rho=2."""
    return solve_weights(gen_sample_points(1, A_SERO, 8.0, seed=0), check_mesh=False)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def qm_q2_n4():
    """q=2 weights on a level-4 box with a coarser lattice to bound memory."""
    return solve_weights(gen_sample_points(2, A_SERO, 4.0, beta=0.5, seed=0), check_mesh=False)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
