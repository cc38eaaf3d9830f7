import numpy as np
import pytest

from bandfwi.helmholtz import RadialLayers
from bandfwi.model import VoxelGrid, radial_partition, wavespeed_from_model


@pytest.fixture(scope="session")
def two_layer():
    """The radial 2-layer reference medium (r1 = 0.5, b = 1.5)."""
    return RadialLayers(radii=(0.5,), speeds=(1.5,))


@pytest.fixture(scope="session")
def free_medium():
    return RadialLayers(radii=(), speeds=())


@pytest.fixture(scope="session")
def small_grid():
    return VoxelGrid(n=24, half_side=1.5)


@pytest.fixture(scope="session")
def small_wavespeed(small_grid):
    part = radial_partition([0.5], grid=small_grid)
    return wavespeed_from_model([1.5], part)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
