"""Soft silhouette rasterization with an exact analytic backward pass.

Every face j contributes a probability map D_j = sigmoid(delta * d^2 / sigma),
where d is the distance from the pixel center to the closed edges of the
projected triangle and delta is +1 inside, -1 outside. The maps are fused as
S = 1 - prod_j (1 - D_j). The product is accumulated in log space,
log(1 - D_j) = log_sigmoid(-delta * d^2 / sigma), so it never collapses to an
exact 1 that would zero the gradient.

All reductions run in ascending face index order, which keeps forward and
backward results bitwise reproducible.
"""

import logging
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import expit, log_expit

from config.settings import settings
from core.camera import Camera, pixel_grid, project, projection_jacobian
from core.errors import MissingColorsError, RasterInputError
from core.mesh import Mesh

logger = logging.getLogger(__name__)

# Upper bound on (pixel, face) pairs evaluated at once
_PAIR_CHUNK = 1 << 20
# Bounding-box slack for the hard rasterizer's boundary pixels
_HARD_SLACK = 1e-9
# Largest double below 1; soft coverage stays in [0, 1)
_BELOW_ONE = float(np.nextafter(1.0, 0.0))


@dataclass(frozen=True)
class Sharpness:
    """Sharpness sigma of the probability maps"""

    sigma: float = settings.SIGMA

    def __post_init__(self):
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise RasterInputError(f"sigma must be positive, got {self.sigma}")


SigmaLike = Union[float, Sharpness]


def _sigma_value(sigma: Optional[SigmaLike]) -> float:
    if sigma is None:
        return settings.SIGMA
    if isinstance(sigma, Sharpness):
        return sigma.sigma
    return Sharpness(float(sigma)).sigma


@dataclass(frozen=True)
class SoftSilhouette:
    """Soft silhouette, shape (height, width), top row first"""

    values: np.ndarray

    @property
    def shape(self) -> Tuple[int, int]:
        return self.values.shape


@dataclass(frozen=True)
class BinaryMask:
    """Hard silhouette, shape (height, width), top row first"""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=bool))

    @property
    def shape(self) -> Tuple[int, int]:
        return self.values.shape


@dataclass(frozen=True)
class GradientBuffer:
    """Accumulated dL/dv per vertex and, when colors are optimized, dL/dc"""

    d_vertices: np.ndarray
    d_colors: Optional[np.ndarray] = None

    @classmethod
    def zeros(cls, vertex_count: int, with_colors: bool = False) -> "GradientBuffer":
        return cls(
            np.zeros((vertex_count, 3)),
            np.zeros((vertex_count, 3)) if with_colors else None,
        )

    def is_finite(self) -> bool:
        finite = bool(np.all(np.isfinite(self.d_vertices)))
        if self.d_colors is not None:
            finite = finite and bool(np.all(np.isfinite(self.d_colors)))
        return finite


@dataclass(frozen=True)
class _PairGeometry:
    """Pixel-to-triangle relations for a batch of (pixel, face) pairs"""

    sign: np.ndarray          # +1 inside or on the boundary, -1 outside
    d2: np.ndarray            # squared distance to the nearest closed edge
    edge: np.ndarray          # index k of that edge (vertex k -> vertex k+1)
    t: np.ndarray             # clamped parameter of the closest point on it
    offset: np.ndarray        # pixel minus closest point
    edge_values: np.ndarray   # the three edge functions
    area2: np.ndarray         # twice the signed triangle area


def _edge_distances(points: np.ndarray, tris: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Squared distances to the three closed edges, closest-point parameters and offsets"""
    count = len(points)
    d2 = np.empty((count, 3))
    t = np.empty((count, 3))
    offset = np.empty((count, 3, 2))
    for k in range(3):
        a = tris[:, k]
        ab = tris[:, (k + 1) % 3] - a
        ap = points - a
        length2 = np.einsum("ij,ij->i", ab, ab)
        along = np.einsum("ij,ij->i", ap, ab)
        tk = np.divide(along, length2, out=np.zeros_like(along), where=length2 > 0)
        np.clip(tk, 0.0, 1.0, out=tk)
        diff = ap - tk[:, None] * ab
        d2[:, k] = np.einsum("ij,ij->i", diff, diff)
        t[:, k] = tk
        offset[:, k] = diff
    return d2, t, offset


def _edge_functions(points: np.ndarray, tris: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    values = np.empty((len(points), 3))
    for k in range(3):
        a = tris[:, k]
        ab = tris[:, (k + 1) % 3] - a
        ap = points - a
        values[:, k] = ab[:, 0] * ap[:, 1] - ab[:, 1] * ap[:, 0]
    e1 = tris[:, 1] - tris[:, 0]
    e2 = tris[:, 2] - tris[:, 0]
    area2 = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    return values, area2


def _inside_sign(edge_values: np.ndarray, area2: np.ndarray) -> np.ndarray:
    # Winding independent; zero-area triangles are outside everywhere
    solid = 0.5 * np.abs(area2) >= settings.DEGENERATE_AREA
    same_side = np.all(edge_values >= 0, axis=1) | np.all(edge_values <= 0, axis=1)
    return np.where(solid & same_side, 1.0, -1.0)


def _pair_geometry(points: np.ndarray, tris: np.ndarray) -> _PairGeometry:
    d2_all, t_all, offset_all = _edge_distances(points, tris)
    edge_values, area2 = _edge_functions(points, tris)
    # argmin keeps the lowest edge index on ties
    edge = np.argmin(d2_all, axis=1)
    rows = np.arange(len(points))
    return _PairGeometry(
        sign=_inside_sign(edge_values, area2),
        d2=d2_all[rows, edge],
        edge=edge,
        t=t_all[rows, edge],
        offset=offset_all[rows, edge],
        edge_values=edge_values,
        area2=area2,
    )


def _as_batch(p: Sequence[float], tri: Sequence[Sequence[float]]) -> Tuple[np.ndarray, np.ndarray]:
    return (
        np.asarray(p, dtype=np.float64).reshape(1, 2),
        np.asarray(tri, dtype=np.float64).reshape(1, 3, 2),
    )


def point_in_triangle(p: Sequence[float], tri: Sequence[Sequence[float]]) -> int:
    """+1 if p is inside or on the boundary of tri, -1 otherwise"""
    points, tris = _as_batch(p, tri)
    edge_values, area2 = _edge_functions(points, tris)
    return int(_inside_sign(edge_values, area2)[0])


def edge_distances_squared(p: Sequence[float], tri: Sequence[Sequence[float]]) -> np.ndarray:
    """Squared distances from p to each closed edge (k -> k+1) of tri"""
    points, tris = _as_batch(p, tri)
    d2, _, _ = _edge_distances(points, tris)
    return d2[0]


def distance_to_triangle(p: Sequence[float], tri: Sequence[Sequence[float]]) -> float:
    """Shortest distance from p to the three closed edge segments"""
    return float(np.sqrt(edge_distances_squared(p, tri).min()))


def face_probability(p: Sequence[float], tri: Sequence[Sequence[float]], sigma: SigmaLike) -> float:
    """sigmoid(delta * d^2 / sigma)"""
    points, tris = _as_batch(p, tri)
    geometry = _pair_geometry(points, tris)
    return float(expit(geometry.sign[0] * geometry.d2[0] / _sigma_value(sigma)))


def face_probability_map(tri: Sequence[Sequence[float]], width: int, height: int, sigma: SigmaLike) -> SoftSilhouette:
    """Probability map of one triangle given directly in normalized screen coordinates"""
    if width < 1 or height < 1:
        raise RasterInputError(f"image size must be positive, got {width}x{height}")
    points = pixel_grid(width, height)
    tris = np.broadcast_to(np.asarray(tri, dtype=np.float64).reshape(1, 3, 2), (len(points), 3, 2))
    geometry = _pair_geometry(points, tris)
    values = expit(geometry.sign * geometry.d2 / _sigma_value(sigma))
    return SoftSilhouette(values.reshape(height, width))


def _face_pairs(
    tris: np.ndarray,
    width: int,
    height: int,
    radius: Optional[float],
) -> Iterator[Tuple[np.ndarray, np.ndarray]]:
    """Yield (pixel index, face index) chunks, face-major in ascending face order.

    With radius None every face meets every pixel; otherwise a face only
    meets the pixels whose centers fall in its bounding box dilated by radius.
    """
    face_count = len(tris)
    pixel_count = width * height
    if face_count == 0 or pixel_count == 0:
        return

    if radius is None:
        faces_per_chunk = max(1, _PAIR_CHUNK // pixel_count)
        for start in range(0, face_count, faces_per_chunk):
            stop = min(start + faces_per_chunk, face_count)
            face_index = np.repeat(np.arange(start, stop), pixel_count)
            pixel_index = np.tile(np.arange(pixel_count), stop - start)
            yield pixel_index, face_index
        return

    lower = tris.min(axis=1) - radius
    upper = tris.max(axis=1) + radius
    col_lo = np.maximum(np.ceil((lower[:, 0] + 1.0) * width / 2.0 - 0.5), 0).astype(np.int64)
    col_hi = np.minimum(np.floor((upper[:, 0] + 1.0) * width / 2.0 - 0.5), width - 1).astype(np.int64)
    row_lo = np.maximum(np.ceil((1.0 - upper[:, 1]) * height / 2.0 - 0.5), 0).astype(np.int64)
    row_hi = np.minimum(np.floor((1.0 - lower[:, 1]) * height / 2.0 - 0.5), height - 1).astype(np.int64)
    cols = np.maximum(col_hi - col_lo + 1, 0)
    rows = np.maximum(row_hi - row_lo + 1, 0)
    counts = cols * rows

    start = 0
    while start < face_count:
        # Grow the chunk until it holds about _PAIR_CHUNK pairs
        cumulative = np.cumsum(counts[start:])
        stop = start + max(1, int(np.searchsorted(cumulative, _PAIR_CHUNK, side="right")))
        chunk_counts = counts[start:stop]
        total = int(chunk_counts.sum())
        if total:
            face_index = np.repeat(np.arange(start, stop), chunk_counts)
            first = np.repeat(np.cumsum(chunk_counts) - chunk_counts, chunk_counts)
            local = np.arange(total) - first
            row = row_lo[face_index] + local // cols[face_index]
            col = col_lo[face_index] + local % cols[face_index]
            yield row * width + col, face_index
        start = stop


def truncation_radius(sigma: SigmaLike) -> float:
    """Distance beyond which a face's probability is below the truncation epsilon"""
    eps = settings.TRUNCATION_EPS
    return float(np.sqrt(_sigma_value(sigma) * np.log(1.0 / eps - 1.0)))


class SoftRasterPass:
    """Projected mesh plus the cached log-space aggregate for one camera.

    Holding the aggregate lets a caller render, evaluate a loss and run the
    backward pass without aggregating twice.
    """

    def __init__(self, mesh: Mesh, camera: Camera, sigma: Optional[SigmaLike] = None, truncate: bool = False):
        self.mesh = mesh
        self.camera = camera
        self.sigma = _sigma_value(sigma)
        self.truncate = truncate
        self.width = camera.width
        self.height = camera.height
        self.pixels = pixel_grid(self.width, self.height)
        self.tris = project(mesh, camera).screen_xy[mesh.faces] if mesh.face_count else np.zeros((0, 3, 2))
        self._radius = truncation_radius(self.sigma) if truncate else None
        self._log_complement: Optional[np.ndarray] = None

    @property
    def pixel_count(self) -> int:
        return self.width * self.height

    def pairs(self) -> Iterator[Tuple[np.ndarray, np.ndarray, _PairGeometry]]:
        for pixel_index, face_index in _face_pairs(self.tris, self.width, self.height, self._radius):
            yield pixel_index, face_index, _pair_geometry(self.pixels[pixel_index], self.tris[face_index])

    def log_complement(self) -> np.ndarray:
        """sum_j log(1 - D_j) per pixel"""
        if self._log_complement is None:
            total = np.zeros(self.pixel_count)
            for pixel_index, _, geometry in self.pairs():
                logits = geometry.sign * geometry.d2 / self.sigma
                total += np.bincount(pixel_index, weights=log_expit(-logits), minlength=self.pixel_count)
            self._log_complement = total
        return self._log_complement

    def silhouette(self) -> SoftSilhouette:
        values = -np.expm1(self.log_complement())
        values = np.minimum(np.where(values > 0.0, values, 0.0), _BELOW_ONE)
        return SoftSilhouette(values.reshape(self.height, self.width))

    def backward(self, upstream: np.ndarray) -> GradientBuffer:
        """Chain dL/dS through the aggregate, the probability maps and the projection"""
        upstream = self._check_upstream(upstream, (self.height, self.width))
        mesh = self.mesh
        if not upstream.any() or mesh.face_count == 0:
            return GradientBuffer.zeros(mesh.vertex_count)

        # dS/dx_j = prod_k (1 - D_k) * D_j with x_j = delta * d^2 / sigma
        pixel_scale = upstream.ravel() * np.exp(self.log_complement())
        corner_count = 3 * mesh.face_count
        corner_grad = np.zeros((corner_count, 2))

        for pixel_index, face_index, geometry in self.pairs():
            logits = geometry.sign * geometry.d2 / self.sigma
            d_d2 = pixel_scale[pixel_index] * expit(logits) * geometry.sign / self.sigma
            # d(d^2)/dq = -2 (p - q); q = (1 - t) a + t b with t held at its optimum
            d_closest = -2.0 * d_d2[:, None] * geometry.offset
            start_corner = 3 * face_index + geometry.edge
            end_corner = 3 * face_index + (geometry.edge + 1) % 3
            for axis in range(2):
                corner_grad[:, axis] += np.bincount(
                    start_corner, weights=d_closest[:, axis] * (1.0 - geometry.t), minlength=corner_count
                )
                corner_grad[:, axis] += np.bincount(
                    end_corner, weights=d_closest[:, axis] * geometry.t, minlength=corner_count
                )

        screen_grad = np.zeros((mesh.vertex_count, 2))
        np.add.at(screen_grad, mesh.faces.ravel(), corner_grad)
        jacobian = projection_jacobian(mesh.vertices, self.camera)
        return GradientBuffer(np.einsum("vij,vi->vj", jacobian, screen_grad))

    def _color_terms(self, geometry: _PairGeometry) -> Tuple[np.ndarray, np.ndarray]:
        """Probabilities and clamped barycentric weights of a pair batch"""
        probability = expit(geometry.sign * geometry.d2 / self.sigma)
        area2 = geometry.area2
        solid = 0.5 * np.abs(area2) >= settings.DEGENERATE_AREA
        safe_area = np.where(solid, area2, 1.0)
        # Weight of vertex k is the edge function of the opposite edge (k+1 -> k+2)
        weights = np.clip(np.roll(geometry.edge_values, -1, axis=1) / safe_area[:, None], 0.0, 1.0)
        weights_sum = weights.sum(axis=1, keepdims=True)
        weights = np.divide(weights, weights_sum, out=np.full_like(weights, 1.0 / 3.0), where=weights_sum > 0)
        weights[~solid] = 1.0 / 3.0
        return probability, weights

    def _require_colors(self) -> np.ndarray:
        if not self.mesh.has_colors:
            raise MissingColorsError("color rendering needs per-vertex colors")
        return self.mesh.colors

    def _probability_totals(self) -> np.ndarray:
        total = np.zeros(self.pixel_count)
        for pixel_index, _, geometry in self.pairs():
            probability = expit(geometry.sign * geometry.d2 / self.sigma)
            total += np.bincount(pixel_index, weights=probability, minlength=self.pixel_count)
        return total

    def color_image(self) -> np.ndarray:
        """sum_j D_j c_j / (sum_j D_j + eps), shape (height, width, 3)"""
        colors = self._require_colors()
        numerator = np.zeros((self.pixel_count, 3))
        denominator = np.zeros(self.pixel_count)
        for pixel_index, face_index, geometry in self.pairs():
            probability, weights = self._color_terms(geometry)
            face_colors = np.einsum("nk,nkc->nc", weights, colors[self.mesh.faces[face_index]])
            denominator += np.bincount(pixel_index, weights=probability, minlength=self.pixel_count)
            for channel in range(3):
                numerator[:, channel] += np.bincount(
                    pixel_index, weights=probability * face_colors[:, channel], minlength=self.pixel_count
                )
        image = numerator / (denominator + settings.COLOR_EPS)[:, None]
        return image.reshape(self.height, self.width, 3)

    def color_backward(self, upstream: np.ndarray) -> GradientBuffer:
        """dL/dcolors for an upstream image gradient of shape (height, width, 3)"""
        self._require_colors()
        upstream = self._check_upstream(upstream, (self.height, self.width, 3))
        mesh = self.mesh
        if not upstream.any() or mesh.face_count == 0:
            return GradientBuffer.zeros(mesh.vertex_count, with_colors=True)

        upstream_flat = upstream.reshape(-1, 3)
        normalizer = 1.0 / (self._probability_totals() + settings.COLOR_EPS)
        corner_count = 3 * mesh.face_count
        corner_grad = np.zeros((corner_count, 3))

        for pixel_index, face_index, geometry in self.pairs():
            probability, weights = self._color_terms(geometry)
            d_face_color = upstream_flat[pixel_index] * (probability * normalizer[pixel_index])[:, None]
            for k in range(3):
                corner = 3 * face_index + k
                for channel in range(3):
                    corner_grad[:, channel] += np.bincount(
                        corner, weights=weights[:, k] * d_face_color[:, channel], minlength=corner_count
                    )

        d_colors = np.zeros((mesh.vertex_count, 3))
        np.add.at(d_colors, mesh.faces.ravel(), corner_grad)
        return GradientBuffer(np.zeros((mesh.vertex_count, 3)), d_colors)

    @staticmethod
    def _check_upstream(upstream: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
        upstream = np.asarray(upstream, dtype=np.float64)
        if upstream.shape != shape:
            raise RasterInputError(f"upstream gradient has shape {upstream.shape}, expected {shape}")
        if not np.all(np.isfinite(upstream)):
            raise RasterInputError("upstream gradient contains non-finite values")
        return upstream


def render_soft(mesh: Mesh, camera: Camera, sigma: Optional[SigmaLike] = None, truncate: bool = False) -> SoftSilhouette:
    """Soft silhouette 1 - prod_j (1 - D_j) over all faces, no culling"""
    return SoftRasterPass(mesh, camera, sigma, truncate).silhouette()


def backward_soft(
    mesh: Mesh,
    camera: Camera,
    sigma: Optional[SigmaLike],
    upstream: np.ndarray,
    truncate: bool = False,
) -> GradientBuffer:
    """dL/dvertices for an upstream dL/dS of shape (height, width)"""
    return SoftRasterPass(mesh, camera, sigma, truncate).backward(upstream)


def render_hard(mesh: Mesh, camera: Camera) -> BinaryMask:
    """Pixel is solid when its center is inside or on any projected triangle"""
    pixels = pixel_grid(camera.width, camera.height)
    covered = np.zeros(len(pixels), dtype=bool)
    if mesh.face_count:
        tris = project(mesh, camera).screen_xy[mesh.faces]
        for pixel_index, face_index in _face_pairs(tris, camera.width, camera.height, _HARD_SLACK):
            edge_values, area2 = _edge_functions(pixels[pixel_index], tris[face_index])
            covered[pixel_index[_inside_sign(edge_values, area2) > 0]] = True
    return BinaryMask(covered.reshape(camera.height, camera.width))


def render_color(mesh: Mesh, camera: Camera, sigma: Optional[SigmaLike] = None, truncate: bool = False) -> np.ndarray:
    """Normalized-weight composite of interpolated vertex colors, shape (height, width, 3)"""
    return SoftRasterPass(mesh, camera, sigma, truncate).color_image()


def backward_color(
    mesh: Mesh,
    camera: Camera,
    sigma: Optional[SigmaLike],
    upstream: np.ndarray,
    truncate: bool = False,
) -> GradientBuffer:
    """dL/dcolors for an upstream dL/dimage of shape (height, width, 3)"""
    return SoftRasterPass(mesh, camera, sigma, truncate).color_backward(upstream)
