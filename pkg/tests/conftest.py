import math

import numpy as np
import pytest

from fracmass.grid import make_grid
from fracmass.problem import gaussian_bumps


@pytest.fixture(scope="session")
def grid1d():
    return make_grid(1, 1024, 40.0)


@pytest.fixture(scope="session")
def grid2d():
    return make_grid(2, 128, 20.0)


@pytest.fixture
def unit_bump(grid1d):
    """Gaussian with sup 1 and integral 1."""
    return gaussian_bumps(grid1d, [(1.0, 0.0, 1.0 / math.sqrt(2.0 * math.pi))])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
