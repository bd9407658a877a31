"""Triangle mesh model, icosphere template, adjacency structures and OBJ I/O."""

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from config.settings import settings
from core.errors import (
    MeshValidationError,
    NonManifoldEdgeError,
    ObjFormatError,
    SubdivisionLimitError,
)

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


@dataclass(frozen=True)
class Mesh:
    """Triangle mesh with counterclockwise faces and optional per-vertex RGB colors"""

    vertices: np.ndarray
    faces: np.ndarray
    colors: Optional[np.ndarray] = None

    def __post_init__(self):
        vertices = np.array(self.vertices, dtype=np.float64).reshape(-1, 3)
        faces = np.array(self.faces, dtype=np.int64).reshape(-1, 3)

        if not np.all(np.isfinite(vertices)):
            raise MeshValidationError("vertex coordinates must be finite")
        if faces.size:
            if faces.min() < 0 or faces.max() >= len(vertices):
                raise MeshValidationError(
                    f"face index out of range for {len(vertices)} vertices"
                )
            repeated = (
                (faces[:, 0] == faces[:, 1])
                | (faces[:, 1] == faces[:, 2])
                | (faces[:, 2] == faces[:, 0])
            )
            if repeated.any():
                raise MeshValidationError(
                    f"face {int(np.argmax(repeated))} references the same vertex twice"
                )

        colors = None
        if self.colors is not None:
            colors = np.array(self.colors, dtype=np.float64).reshape(-1, 3)
            if len(colors) != len(vertices):
                raise MeshValidationError(
                    f"{len(colors)} colors given for {len(vertices)} vertices"
                )
            if not np.all((colors >= 0.0) & (colors <= 1.0)):
                raise MeshValidationError("color channels must lie in [0, 1]")
            colors.setflags(write=False)

        vertices.setflags(write=False)
        faces.setflags(write=False)
        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "faces", faces)
        object.__setattr__(self, "colors", colors)

    @property
    def vertex_count(self) -> int:
        return len(self.vertices)

    @property
    def face_count(self) -> int:
        return len(self.faces)

    @property
    def has_colors(self) -> bool:
        return self.colors is not None

    def with_vertices(self, vertices: np.ndarray) -> "Mesh":
        """Same topology and colors, new positions"""
        return Mesh(vertices, self.faces, self.colors)

    def with_colors(self, colors: Optional[np.ndarray]) -> "Mesh":
        return Mesh(self.vertices, self.faces, colors)


@dataclass(frozen=True)
class VertexAdjacency:
    """Sorted one-ring neighbor lists N(i)"""

    neighbors: Tuple[Tuple[int, ...], ...]

    def degrees(self) -> np.ndarray:
        return np.array([len(ring) for ring in self.neighbors], dtype=np.int64)

    def as_csr(self) -> Tuple[np.ndarray, np.ndarray]:
        """Neighbor lists as (indptr, indices) arrays"""
        degrees = self.degrees()
        indptr = np.zeros(len(degrees) + 1, dtype=np.int64)
        np.cumsum(degrees, out=indptr[1:])
        indices = np.fromiter(
            (j for ring in self.neighbors for j in ring), dtype=np.int64, count=int(indptr[-1])
        )
        return indptr, indices


@dataclass(frozen=True)
class EdgeAdjacency:
    """Interior edges as ((i, j), left face, right face), sorted by vertex pair"""

    interior_edges: Tuple[Tuple[Tuple[int, int], int, int], ...]

    @property
    def edges(self) -> np.ndarray:
        return np.array([pair for pair, _, _ in self.interior_edges], dtype=np.int64).reshape(-1, 2)

    @property
    def faces(self) -> np.ndarray:
        return np.array(
            [(left, right) for _, left, right in self.interior_edges], dtype=np.int64
        ).reshape(-1, 2)

    def __len__(self) -> int:
        return len(self.interior_edges)


def _edge_incidence(faces: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Unique undirected edges, their incident face counts and incident faces in ascending order"""
    if len(faces) == 0:
        empty = np.zeros((0, 2), dtype=np.int64)
        return empty, np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)

    directed = faces[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2)
    keys = np.sort(directed, axis=1)
    face_ids = np.repeat(np.arange(len(faces)), 3)

    edges, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.reshape(-1)
    order = np.lexsort((face_ids, inverse))
    return edges, counts, face_ids[order]


def unique_edges(mesh: Mesh) -> np.ndarray:
    """All undirected edges of the mesh, sorted"""
    edges, _, _ = _edge_incidence(mesh.faces)
    return edges


def boundary_edges(mesh: Mesh) -> np.ndarray:
    """Edges with exactly one incident face"""
    edges, counts, _ = _edge_incidence(mesh.faces)
    return edges[counts == 1]


def is_closed(mesh: Mesh) -> bool:
    """True when every edge has exactly two incident faces"""
    _, counts, _ = _edge_incidence(mesh.faces)
    return bool(len(counts)) and bool(np.all(counts == 2))


# Regular icosahedron, outward counterclockwise winding
_GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0
_ICOSAHEDRON_VERTICES = np.array([
    [-1.0, _GOLDEN, 0.0],
    [1.0, _GOLDEN, 0.0],
    [-1.0, -_GOLDEN, 0.0],
    [1.0, -_GOLDEN, 0.0],
    [0.0, -1.0, _GOLDEN],
    [0.0, 1.0, _GOLDEN],
    [0.0, -1.0, -_GOLDEN],
    [0.0, 1.0, -_GOLDEN],
    [_GOLDEN, 0.0, -1.0],
    [_GOLDEN, 0.0, 1.0],
    [-_GOLDEN, 0.0, -1.0],
    [-_GOLDEN, 0.0, 1.0],
])

_ICOSAHEDRON_FACES = np.array([
    [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
    [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
    [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
    [5, 4, 9], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
])


def icosphere(subdivisions: int, radius: float = 1.0) -> Mesh:
    """Icosahedron midpoint subdivision projected onto a sphere of the given radius"""
    if subdivisions < 0 or subdivisions > settings.MAX_SUBDIVISIONS:
        raise SubdivisionLimitError(
            f"subdivisions must lie in [0, {settings.MAX_SUBDIVISIONS}], got {subdivisions}"
        )
    if not radius > 0:
        raise MeshValidationError(f"radius must be positive, got {radius}")

    vertices: List[np.ndarray] = [v / np.linalg.norm(v) for v in _ICOSAHEDRON_VERTICES]
    faces = [tuple(int(i) for i in face) for face in _ICOSAHEDRON_FACES]

    for _ in range(subdivisions):
        midpoints: Dict[Tuple[int, int], int] = {}

        def midpoint(a: int, b: int) -> int:
            key = (a, b) if a < b else (b, a)
            if key not in midpoints:
                point = vertices[a] + vertices[b]
                vertices.append(point / np.linalg.norm(point))
                midpoints[key] = len(vertices) - 1
            return midpoints[key]

        refined = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            refined.extend([(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)])
        faces = refined

    return Mesh(np.array(vertices) * radius, np.array(faces, dtype=np.int64))


def vertex_adjacency(mesh: Mesh) -> VertexAdjacency:
    """One-ring neighbors of every vertex"""
    rings: List[set] = [set() for _ in range(mesh.vertex_count)]
    for i, j in unique_edges(mesh):
        rings[i].add(int(j))
        rings[j].add(int(i))
    return VertexAdjacency(tuple(tuple(sorted(ring)) for ring in rings))


def edge_adjacency(mesh: Mesh) -> EdgeAdjacency:
    """Edges shared by exactly two faces; the left face has the lower index"""
    edges, counts, incident = _edge_incidence(mesh.faces)
    if np.any(counts > 2):
        bad = edges[int(np.argmax(counts > 2))]
        raise NonManifoldEdgeError(
            f"edge ({bad[0]}, {bad[1]}) has {int(counts.max())} incident faces"
        )

    offsets = np.concatenate([[0], np.cumsum(counts)])
    interior = []
    for k in np.flatnonzero(counts == 2):
        left, right = incident[offsets[k]], incident[offsets[k] + 1]
        interior.append(((int(edges[k, 0]), int(edges[k, 1])), int(left), int(right)))
    return EdgeAdjacency(tuple(interior))


def _parse_face_index(token: str, vertex_count: int, line_number: int) -> int:
    head = token.split("/")[0]
    try:
        index = int(head)
    except ValueError:
        raise ObjFormatError(f"invalid face index '{token}'", line_number) from None
    # Negative indices count back from the most recent vertex
    resolved = index - 1 if index > 0 else vertex_count + index
    if index == 0 or not 0 <= resolved < vertex_count:
        raise ObjFormatError(
            f"face index {index} out of range for {vertex_count} vertices", line_number
        )
    return resolved


def load_obj(path: PathLike) -> Mesh:
    """Read the OBJ subset: v (3 or 6 floats), f (fan-triangulated), # comments"""
    vertices: List[List[float]] = []
    colors: List[List[float]] = []
    faces: List[Tuple[int, int, int]] = []

    with open(path, "r", encoding="utf-8") as obj_file:
        for line_number, raw in enumerate(obj_file, start=1):
            tokens = raw.split()
            if not tokens or tokens[0].startswith("#"):
                continue

            if tokens[0] == "v":
                values = tokens[1:]
                if len(values) not in (3, 6):
                    raise ObjFormatError(
                        f"vertex needs 3 or 6 values, got {len(values)}", line_number
                    )
                try:
                    numbers = [float(value) for value in values]
                except ValueError:
                    raise ObjFormatError(f"non-numeric vertex '{raw.strip()}'", line_number) from None
                if vertices and (len(numbers) == 6) != bool(colors):
                    raise ObjFormatError("vertex colors must be given for all vertices or none", line_number)
                vertices.append(numbers[:3])
                if len(numbers) == 6:
                    colors.append(numbers[3:])

            elif tokens[0] == "f":
                if len(tokens) < 4:
                    raise ObjFormatError(
                        f"face needs at least 3 vertices, got {len(tokens) - 1}", line_number
                    )
                polygon = [_parse_face_index(token, len(vertices), line_number) for token in tokens[1:]]
                # Fan split anchored at the first vertex
                for k in range(1, len(polygon) - 1):
                    faces.append((polygon[0], polygon[k], polygon[k + 1]))

    try:
        mesh = Mesh(np.array(vertices), np.array(faces), np.array(colors) if colors else None)
    except MeshValidationError as e:
        raise ObjFormatError(f"{path}: {e}") from e

    logger.debug(f"Loaded {path}: {mesh.vertex_count} vertices, {mesh.face_count} faces")
    return mesh


def save_obj(mesh: Mesh, path: PathLike) -> None:
    """Write vertices with 6 fractional digits and 1-based triangle faces"""
    lines = []
    for k, vertex in enumerate(mesh.vertices):
        line = "v {:.6f} {:.6f} {:.6f}".format(*vertex)
        if mesh.has_colors:
            line += " {:.6f} {:.6f} {:.6f}".format(*mesh.colors[k])
        lines.append(line)
    for face in mesh.faces:
        lines.append("f {} {} {}".format(*(face + 1)))

    with open(path, "w", encoding="utf-8") as obj_file:
        obj_file.write("\n".join(lines) + "\n")

    logger.debug(f"Saved {path}: {mesh.vertex_count} vertices, {mesh.face_count} faces")
