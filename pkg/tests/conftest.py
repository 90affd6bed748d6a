import numpy as np
import pytest

from edsym.models import builtin, prolong


@pytest.fixture(scope="session")
def ship():
    return builtin("ship3dof")


@pytest.fixture(scope="session")
def hsm():
    return builtin("hsm")


@pytest.fixture(scope="session")
def mr():
    return builtin("martin-rouchon")


@pytest.fixture(scope="session")
def ship_pr4(ship):
    return prolong(ship, "u2", 4)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
