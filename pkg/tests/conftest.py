import numpy as np
import pytest

from config.settings import settings
from core.camera import Camera
from core.mesh import Mesh, icosphere
from core.shapes import box_mesh


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def template_mesh():
    """Coarse sphere that fits comfortably inside the default frame"""
    return icosphere(1, settings.TEMPLATE_RADIUS)


@pytest.fixture
def small_camera():
    return Camera(azimuth=20.0, elevation=10.0, width=8, height=8)


@pytest.fixture
def unit_cube():
    return box_mesh((1.0, 1.0, 1.0))


@pytest.fixture
def two_triangles():
    """Two triangles sharing the edge (0, 2)"""
    vertices = np.array([
        [0.0, 0.0, 0.0],
        [1.0, 0.0, 0.0],
        [1.0, 1.0, 0.0],
        [0.0, 1.0, 0.0],
    ])
    return Mesh(vertices, np.array([[0, 1, 2], [0, 2, 3]]))


@pytest.fixture
def empty_mesh():
    return Mesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64))


