"""Voxelization by ray parity and volumetric intersection over union."""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from config.settings import settings
from core.errors import GridMismatchError, MeshValidationError, OpenMeshError
from core.mesh import Mesh, boundary_edges, is_closed

logger = logging.getLogger(__name__)

_GOLDEN_RATIO = (1.0 + 5.0 ** 0.5) / 2.0
# Upper bound on (ray, face) pairs tested at once
_RAY_CHUNK = 1 << 20


@dataclass(frozen=True)
class VoxelGrid:
    """Cubic grid over an axis-aligned box; occupancy indexed [x, y, z]"""

    resolution: int
    bounds: np.ndarray
    occupancy: np.ndarray

    def __post_init__(self):
        bounds = np.array(self.bounds, dtype=np.float64).reshape(2, 3)
        if not np.all(bounds[1] > bounds[0]):
            raise MeshValidationError(f"voxel bounds are degenerate: {bounds.tolist()}")
        occupancy = np.asarray(self.occupancy, dtype=bool)
        if occupancy.size != self.resolution ** 3:
            raise MeshValidationError(
                f"occupancy has {occupancy.size} cells, expected {self.resolution ** 3}"
            )
        object.__setattr__(self, "bounds", bounds)
        object.__setattr__(self, "occupancy", occupancy.reshape((self.resolution,) * 3))

    @property
    def occupied_count(self) -> int:
        return int(self.occupancy.sum())

    @property
    def occupied_fraction(self) -> float:
        return self.occupied_count / self.occupancy.size


def cell_centers(low: float, high: float, resolution: int) -> np.ndarray:
    return low + (np.arange(resolution) + 0.5) * (high - low) / resolution


def default_bounds(mesh_a: Mesh, mesh_b: Optional[Mesh] = None) -> np.ndarray:
    """Union of the bounding boxes, grown about its center by the configured margin"""
    points = mesh_a.vertices if mesh_b is None else np.vstack([mesh_a.vertices, mesh_b.vertices])
    if len(points) == 0:
        raise MeshValidationError("cannot bound an empty mesh")
    low, high = points.min(axis=0), points.max(axis=0)
    center = (low + high) / 2.0
    half = (high - low) / 2.0 * (1.0 + settings.VOXEL_MARGIN)
    return np.stack([center - half, center + half])


def _ray_hits(origins_yz: np.ndarray, tris: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """x coordinates where +x rays through (y, z) origins cross the triangles"""
    a, b, c = tris[None, :, 0], tris[None, :, 1], tris[None, :, 2]
    p = origins_yz[:, None, :]

    def edge(start, end):
        return (end[..., 1] - start[..., 1]) * (p[..., 2] - start[..., 2]) - \
            (end[..., 2] - start[..., 2]) * (p[..., 1] - start[..., 1])

    e_ab, e_bc, e_ca = edge(a, b), edge(b, c), edge(c, a)
    area2 = e_ab + e_bc + e_ca
    inside = ((e_ab > 0) & (e_bc > 0) & (e_ca > 0)) | ((e_ab < 0) & (e_bc < 0) & (e_ca < 0))
    ray_index, face_index = np.nonzero(inside)
    area = area2[ray_index, face_index]
    hit_x = (
        e_bc[ray_index, face_index] * tris[face_index, 0, 0]
        + e_ca[ray_index, face_index] * tris[face_index, 1, 0]
        + e_ab[ray_index, face_index] * tris[face_index, 2, 0]
    ) / area
    return ray_index, hit_x


def voxelize(mesh: Mesh, resolution: int = None, bounds: Optional[np.ndarray] = None) -> VoxelGrid:
    """Mark cells whose centers a +x ray shows to be inside the closed mesh"""
    if resolution is None:
        resolution = settings.VOXEL_RESOLUTION
    if resolution < 2:
        raise MeshValidationError(f"voxel resolution must be at least 2, got {resolution}")
    if not is_closed(mesh):
        open_edges = boundary_edges(mesh)
        if mesh.face_count == 0:
            raise OpenMeshError("mesh has no faces")
        if len(open_edges):
            raise OpenMeshError(f"mesh is not closed: {len(open_edges)} boundary edges, first {open_edges[0].tolist()}")
        raise OpenMeshError("mesh has edges shared by more than two faces")
    if bounds is None:
        bounds = default_bounds(mesh)
    bounds = np.array(bounds, dtype=np.float64).reshape(2, 3)

    xs = cell_centers(bounds[0, 0], bounds[1, 0], resolution)
    ys = cell_centers(bounds[0, 1], bounds[1, 1], resolution)
    zs = cell_centers(bounds[0, 2], bounds[1, 2], resolution)
    grid_y, grid_z = np.meshgrid(ys, zs, indexing="ij")
    # Fixed offset keeps rays off edges and vertices
    origins = np.stack([
        np.zeros(grid_y.size),
        grid_y.ravel() + settings.RAY_JITTER,
        grid_z.ravel() + _GOLDEN_RATIO * settings.RAY_JITTER,
    ], axis=1)

    tris = mesh.vertices[mesh.faces]
    ray_count = len(origins)
    hit_rays, hit_xs = [], []
    faces_per_chunk = max(1, _RAY_CHUNK // ray_count)
    for start in range(0, len(tris), faces_per_chunk):
        ray_index, hit_x = _ray_hits(origins, tris[start:start + faces_per_chunk])
        hit_rays.append(ray_index)
        hit_xs.append(hit_x)

    occupancy = np.zeros((resolution, resolution, resolution), dtype=bool)
    if hit_rays:
        ray_index = np.concatenate(hit_rays)
        hit_x = np.concatenate(hit_xs)
        order = np.lexsort((hit_x, ray_index))
        ray_index, hit_x = ray_index[order], hit_x[order]
        starts = np.searchsorted(ray_index, np.arange(ray_count), side="left")
        ends = np.searchsorted(ray_index, np.arange(ray_count), side="right")
        for ray in np.nonzero(ends > starts)[0]:
            hits = hit_x[starts[ray]:ends[ray]]
            crossings_ahead = len(hits) - np.searchsorted(hits, xs, side="right")
            iy, iz = divmod(int(ray), resolution)
            occupancy[:, iy, iz] = crossings_ahead % 2 == 1

    grid = VoxelGrid(resolution, bounds, occupancy)
    logger.debug(f"Voxelized {mesh.face_count} faces at {resolution}^3: {grid.occupied_count} cells occupied")
    return grid


def iou_3d(grid_a: VoxelGrid, grid_b: VoxelGrid) -> float:
    """|A and B| / |A or B| over two grids sharing resolution and bounds"""
    if grid_a.resolution != grid_b.resolution or not np.array_equal(grid_a.bounds, grid_b.bounds):
        raise GridMismatchError(
            f"grids differ: resolution {grid_a.resolution} vs {grid_b.resolution}, "
            f"bounds {grid_a.bounds.tolist()} vs {grid_b.bounds.tolist()}"
        )
    union = np.logical_or(grid_a.occupancy, grid_b.occupancy).sum()
    if union == 0:
        logger.warning("3D IoU of two empty grids; reporting 1.0")
        return 1.0
    return float(np.logical_and(grid_a.occupancy, grid_b.occupancy).sum() / union)


def mesh_iou_3d(mesh_a: Mesh, mesh_b: Mesh, resolution: int = None) -> float:
    """3D IoU of two closed meshes voxelized over their shared default bounds"""
    bounds = default_bounds(mesh_a, mesh_b)
    return iou_3d(voxelize(mesh_a, resolution, bounds), voxelize(mesh_b, resolution, bounds))
