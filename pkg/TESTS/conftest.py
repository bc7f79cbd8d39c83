import numpy as np
import pytest

from Hyperparameters import default_hyperparameters
from MODELS.CALCULUS.complex_calculus import Form11, FormClassSpec, PeriodicGrid


@pytest.fixture
def grid1():
    return PeriodicGrid(1, 64)


@pytest.fixture
def grid2():
    return PeriodicGrid(2, 16)


@pytest.fixture
def spectral2():
    return PeriodicGrid(2, 16, 'spectral')


@pytest.fixture
def args1():
    return default_hyperparameters(1)


@pytest.fixture
def kahler_unit():
    """beta = omega = the flat metric, for any grid."""
    def build(grid):
        n = grid.complex_dim
        return FormClassSpec(np.eye(n)), Form11.constant(grid, np.eye(n))
    return build
