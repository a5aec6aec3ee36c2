import numpy as np
import pytest

from bukhgeim.grid import make_grid, zero_potential
from bukhgeim.potentials import make_potential


@pytest.fixture(scope="module")
def grid32():
    return make_grid(1.5, 32, 1.0)


@pytest.fixture(scope="module")
def grid64():
    return make_grid(1.5, 64, 1.0)


@pytest.fixture(scope="module")
def bump64(grid64):
    return make_potential(grid64, "bump", radius=0.9, amplitude=0.2, label="bump")


@pytest.fixture(scope="module")
def zero64(grid64):
    return zero_potential(grid64)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
