import numpy as np
import pytest

from sofdma.codebook import Codebook
from sofdma.params import derive_simulation_params

# acceptance lines collected by test_acceptance and echoed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def small_params():
    """K=4 operating point: B=24, M=5, C2=60, unit noise."""
    return derive_simulation_params(4, 2 ** 16, 5, 1.0, 1.0, 4.0, C2=60)


@pytest.fixture(scope="session")
def small_codebook(small_params):
    return Codebook(small_params, public_seed=7)
