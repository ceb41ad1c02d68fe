import numpy as np
import pytest

from driftwatch import OuCentered, SimConfig, simulate_path

# criterion lines collected by test_acceptance.py, printed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def exact_euler_path():
    """OU(theta=1, sigma=1), n=3000, one Euler step per observation (shocks recorded)."""
    return simulate_path(OuCentered(), [1.0], 1.0, SimConfig(n=3000, substeps=1, seed=20240601))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
