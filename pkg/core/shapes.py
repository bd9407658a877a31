"""Built-in template and target shapes."""

from typing import Callable, Dict, Sequence

import numpy as np

from config.settings import settings
from core.errors import MeshValidationError
from core.mesh import Mesh, icosphere

# Full extents of the reference ellipsoid and of the flat-topped box target
ELLIPSOID_EXTENTS = (1.0, 0.7, 0.5)
FLAT_BOX_EXTENTS = (0.8, 0.3, 0.8)

_BOX_CORNERS = np.array([
    [-1, -1, -1], [1, -1, -1], [1, 1, -1], [-1, 1, -1],
    [-1, -1, 1], [1, -1, 1], [1, 1, 1], [-1, 1, 1],
], dtype=np.float64)

# Outward counterclockwise winding
_BOX_FACES = np.array([
    [0, 3, 2], [0, 2, 1],  # -z
    [4, 5, 6], [4, 6, 7],  # +z
    [0, 1, 5], [0, 5, 4],  # -y
    [3, 7, 6], [3, 6, 2],  # +y
    [0, 4, 7], [0, 7, 3],  # -x
    [1, 2, 6], [1, 6, 5],  # +x
], dtype=np.int64)


def template_sphere(subdivisions: int = None, radius: float = None) -> Mesh:
    """The deformation template: 642 vertices at the default subdivision level"""
    if subdivisions is None:
        subdivisions = settings.TEMPLATE_SUBDIVISIONS
    if radius is None:
        radius = settings.TEMPLATE_RADIUS
    return icosphere(subdivisions, radius)


def ellipsoid(extents: Sequence[float] = ELLIPSOID_EXTENTS, subdivisions: int = 3) -> Mesh:
    """Axis-aligned ellipsoid with the given full extents, centered at the origin"""
    semi_axes = np.asarray(extents, dtype=np.float64) / 2.0
    if semi_axes.shape != (3,) or not np.all(semi_axes > 0):
        raise MeshValidationError(f"ellipsoid extents must be three positive values, got {extents}")
    sphere = icosphere(subdivisions, 1.0)
    return sphere.with_vertices(sphere.vertices * semi_axes)


def box_mesh(extents: Sequence[float] = (1.0, 1.0, 1.0), center: Sequence[float] = (0.0, 0.0, 0.0)) -> Mesh:
    """Closed axis-aligned box of 8 vertices and 12 triangles"""
    half = np.asarray(extents, dtype=np.float64) / 2.0
    if half.shape != (3,) or not np.all(half > 0):
        raise MeshValidationError(f"box extents must be three positive values, got {extents}")
    return Mesh(_BOX_CORNERS * half + np.asarray(center, dtype=np.float64), _BOX_FACES)


def flat_box() -> Mesh:
    """Box with a large horizontal top face"""
    return box_mesh(FLAT_BOX_EXTENTS)


BUILTIN_SHAPES: Dict[str, Callable[[], Mesh]] = {
    "sphere642": template_sphere,
    "ellipsoid": ellipsoid,
    "box": flat_box,
}


def builtin_mesh(name: str) -> Mesh:
    """Look up a built-in shape by name"""
    if name not in BUILTIN_SHAPES:
        raise KeyError(f"unknown built-in shape '{name}'; choose from {sorted(BUILTIN_SHAPES)}")
    return BUILTIN_SHAPES[name]()
