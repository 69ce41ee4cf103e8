import math
from dataclasses import replace

import pytest

from vibromanip import scenario as scn
from vibromanip.controller import ControllerParams
from vibromanip.simulator import SimConfig


@pytest.fixture(scope="session")
def disk():
    return scn.load("disk")


@pytest.fixture(scope="session")
def plant(disk):
    return disk.plant


@pytest.fixture
def quiet():
    """Noise-free, perturbation-free simulation config."""
    return SimConfig(sensor_pos_noise_std=0.0, sensor_ang_noise_std=0.0, perturbation_torque_std=0.0)


@pytest.fixture(scope="session")
def quiet_disk(disk):
    return replace(disk, sim=replace(disk.sim, sensor_pos_noise_std=0.0, sensor_ang_noise_std=0.0,
                                     perturbation_torque_std=0.0))


@pytest.fixture
def params():
    return ControllerParams()


HZ = 2 * math.pi


ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
