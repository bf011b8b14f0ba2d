import numpy as np
import pytest

from conefix import Grid, ones
from conefix.cones import ConeVector
from conefix.gallery import SCALAR_GRID, scalar_vector


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


@pytest.fixture
def small_grid():
    return Grid.line(0.0, 1.0, 5)


def vec(grid, *values):
    return ConeVector(grid, list(values))
