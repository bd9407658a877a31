"""Look-at cameras on a view sphere and perspective projection to normalized screen space."""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from config.settings import settings
from core.errors import ProjectionError
from core.mesh import Mesh

logger = logging.getLogger(__name__)

_WORLD_UP = np.array([0.0, 1.0, 0.0])
_POLE_UP = np.array([0.0, 0.0, -1.0])


class Camera(BaseModel):
    """Camera on a sphere around the origin, looking at the origin with +y up"""

    model_config = ConfigDict(frozen=True)

    azimuth: float = 0.0
    elevation: float = 0.0
    distance: float = Field(default_factory=lambda: settings.CAMERA_DISTANCE, gt=0)
    fov_y: float = Field(default_factory=lambda: settings.FOV_Y, gt=0, lt=180)
    width: int = Field(default_factory=lambda: settings.IMAGE_SIZE, ge=1)
    height: int = Field(default_factory=lambda: settings.IMAGE_SIZE, ge=1)

    @property
    def image_shape(self) -> Tuple[int, int]:
        return self.height, self.width


@dataclass(frozen=True)
class ProjectedMesh:
    """Per-vertex normalized screen coordinates (x right, y up) and depth along the view axis"""

    screen_xy: np.ndarray
    cam_z: np.ndarray


class ViewSetName(str, Enum):
    """Named camera layouts"""
    RING24 = "ring24"
    GRID120 = "grid120"


RING_AZIMUTHS = tuple(float(a) for a in range(0, 360, 15))
RING_ELEVATION = 30.0
GRID_ELEVATIONS = (-30.0, -15.0, 0.0, 15.0, 30.0)


def camera_position(camera: Camera) -> np.ndarray:
    """Eye position: distance * (cos e sin a, sin e, cos e cos a)"""
    a = math.radians(camera.azimuth)
    e = math.radians(camera.elevation)
    return camera.distance * np.array([
        math.cos(e) * math.sin(a),
        math.sin(e),
        math.cos(e) * math.cos(a),
    ])


def camera_basis(camera: Camera) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Eye position and orthonormal (right, up, forward) frame looking at the origin"""
    eye = camera_position(camera)
    forward = -eye / np.linalg.norm(eye)
    right = np.cross(forward, _WORLD_UP)
    if np.linalg.norm(right) < 1e-9:
        # Looking straight along the y axis
        right = np.cross(forward, _POLE_UP)
    right = right / np.linalg.norm(right)
    up = np.cross(right, forward)
    return eye, right, up, forward


def _focal_scales(camera: Camera) -> Tuple[float, float]:
    tan_half = math.tan(math.radians(camera.fov_y) / 2.0)
    aspect = camera.width / camera.height
    return 1.0 / (tan_half * aspect), 1.0 / tan_half


def _camera_coordinates(vertices: np.ndarray, camera: Camera) -> Tuple[np.ndarray, Tuple[np.ndarray, ...]]:
    eye, right, up, forward = camera_basis(camera)
    relative = np.asarray(vertices, dtype=np.float64).reshape(-1, 3) - eye
    coords = np.stack([relative @ right, relative @ up, relative @ forward], axis=1)
    return coords, (right, up, forward)


def _check_near_plane(cam_z: np.ndarray) -> None:
    behind = cam_z <= settings.NEAR_PLANE
    if behind.any():
        index = int(np.argmax(behind))
        raise ProjectionError(
            f"vertex {index} is behind the near plane (depth {cam_z[index]:.6g} <= {settings.NEAR_PLANE})",
            vertex_index=index,
        )


def project_vertices(vertices: np.ndarray, camera: Camera) -> ProjectedMesh:
    """Perspective projection of raw vertex positions"""
    coords, _ = _camera_coordinates(vertices, camera)
    cam_z = coords[:, 2]
    _check_near_plane(cam_z)

    scale_x, scale_y = _focal_scales(camera)
    screen_xy = np.stack([
        scale_x * coords[:, 0] / cam_z,
        scale_y * coords[:, 1] / cam_z,
    ], axis=1)
    return ProjectedMesh(screen_xy=screen_xy, cam_z=cam_z)


def project(mesh: Mesh, camera: Camera) -> ProjectedMesh:
    """Project every mesh vertex into the [-1, 1] screen frame"""
    return project_vertices(mesh.vertices, camera)


def projection_jacobian(vertices: np.ndarray, camera: Camera) -> np.ndarray:
    """d(screen_xy)/d(world position) per vertex, shape (V, 2, 3)"""
    coords, (right, up, forward) = _camera_coordinates(vertices, camera)
    cam_z = coords[:, 2]
    _check_near_plane(cam_z)

    scale_x, scale_y = _focal_scales(camera)
    inv_z = (1.0 / cam_z)[:, None]
    jacobian = np.empty((len(coords), 2, 3))
    jacobian[:, 0, :] = scale_x * (right[None, :] * inv_z - (coords[:, 0:1] * inv_z ** 2) * forward[None, :])
    jacobian[:, 1, :] = scale_y * (up[None, :] * inv_z - (coords[:, 1:2] * inv_z ** 2) * forward[None, :])
    return jacobian


def pixel_center(row: int, col: int, width: int, height: int) -> Tuple[float, float]:
    """Normalized center of a pixel; row 0 is the top scan line"""
    x = (2 * col + 1) / width - 1.0
    y = 1.0 - (2 * row + 1) / height
    return x, y


def pixel_grid(width: int, height: int) -> np.ndarray:
    """All pixel centers in scan-line order, shape (height * width, 2)"""
    xs = (2.0 * np.arange(width) + 1.0) / width - 1.0
    ys = 1.0 - (2.0 * np.arange(height) + 1.0) / height
    grid_x, grid_y = np.meshgrid(xs, ys)
    return np.stack([grid_x.ravel(), grid_y.ravel()], axis=1)


def view_set_cameras(
    name: ViewSetName,
    distance: float = None,
    fov_y: float = None,
    size: int = None,
) -> List[Camera]:
    """Cameras of a named view set, elevation-major then ascending azimuth"""
    name = ViewSetName(name)
    options = {}
    if distance is not None:
        options["distance"] = distance
    if fov_y is not None:
        options["fov_y"] = fov_y
    if size is not None:
        options["width"] = size
        options["height"] = size

    elevations = (RING_ELEVATION,) if name is ViewSetName.RING24 else GRID_ELEVATIONS
    cameras = [
        Camera(azimuth=azimuth, elevation=elevation, **options)
        for elevation in elevations
        for azimuth in RING_AZIMUTHS
    ]
    logger.debug(f"View set {name.value}: {len(cameras)} cameras")
    return cameras
