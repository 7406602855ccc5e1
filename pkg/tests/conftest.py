import numpy as np
import pytest

from lib_spacetime_dg.settings import update_study_settings
from lib_spacetime_dg.slab import make_temporal_mesh, partition_into_slabs
from lib_spacetime_dg.spatial_fe import QLagrangeElement, SpatialDoFHandler, make_hypercube_mesh
from lib_spacetime_dg.temporal_fe import TemporalBasis

SUPPORT_TYPES = ("lobatto", "legendre", "radau-left", "radau-right")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: convergence studies that take minutes")


@pytest.fixture(autouse=True)
def reset_settings():
    update_study_settings()
    yield
    update_study_settings()


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def make_triangulation(dim=2, level=1, s=1, r=1, support_type="lobatto", end_time=1.0, n_intervals=2, n_max=0):
    dof_handler = SpatialDoFHandler(make_hypercube_mesh(dim, level), QLagrangeElement(s, dim))
    basis = TemporalBasis(r, support_type)
    return partition_into_slabs(make_temporal_mesh(end_time, n_intervals), n_max, dof_handler, basis)


@pytest.fixture
def small_triangulation():
    return make_triangulation()
