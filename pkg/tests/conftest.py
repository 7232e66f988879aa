"""Shared fixtures: grids and kernel matrices are expensive, build them once."""

import numpy as np
import pytest

from hartreelab.scales import grid_for
from hartreelab.hartree_potential import kernel_matrix


@pytest.fixture(scope="session")
def grid_mini():
    return grid_for("mini")


@pytest.fixture(scope="session")
def grid_fast():
    return grid_for("fast")


@pytest.fixture(scope="session")
def grid_standard():
    return grid_for("standard")


@pytest.fixture(scope="session")
def grid_production():
    return grid_for("production")


@pytest.fixture(scope="session")
def kern_mini(grid_mini):
    return kernel_matrix(grid_mini)


@pytest.fixture(scope="session")
def kern_fast(grid_fast):
    return kernel_matrix(grid_fast)


@pytest.fixture(scope="session")
def kern_standard(grid_standard):
    return kernel_matrix(grid_standard)


@pytest.fixture(scope="session")
def kern_production(grid_production):
    return kernel_matrix(grid_production)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240816)
