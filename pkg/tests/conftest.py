import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from nkpclearn.domain import SCENARIO_A_AUX, SCENARIO_A_THETA, SCENARIO_B_AUX, SCENARIO_B_THETA
from nkpclearn.simulator import SimConfig, simulate

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def path_a2000():
    return simulate(SimConfig(SCENARIO_A_THETA, SCENARIO_A_AUX, 2000, seed=7))


@pytest.fixture(scope="session")
def path_a1000():
    return simulate(SimConfig(SCENARIO_A_THETA, SCENARIO_A_AUX, 1000, seed=11))


@pytest.fixture(scope="session")
def path_b2000():
    return simulate(SimConfig(SCENARIO_B_THETA, SCENARIO_B_AUX, 2000, seed=5))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.LINES:
        terminalreporter.write_line(line)
