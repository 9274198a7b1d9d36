import numpy as np
import pytest

from scatter_workbench.ForwardSolver import Discretization, MediumSpec, ScattererConfig
from scatter_workbench.Geometry import discretize_boundary, make_curve


@pytest.fixture
def unit_circle():
    return make_curve("circle", (1.0,))


@pytest.fixture
def kite():
    return make_curve("kite")


@pytest.fixture
def circle_mesh(unit_circle):
    return discretize_boundary(unit_circle, 64)


@pytest.fixture
def kite_mesh(kite):
    return discretize_boundary(kite, 128)


@pytest.fixture
def coarse_disc():
    return Discretization(n_boundary=64, h_volume=0.1, dense_limit=6000)


@pytest.fixture
def coupled_config():
    """Sound-soft disc of radius 0.5 inside a disc medium of radius 1.2."""
    return ScattererConfig(
        obstacle=make_curve("circle", (0.5,)),
        bc="soft",
        medium=make_curve("circle", (1.2,)),
        contrast=MediumSpec(0.5),
        R=3.0,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
