"""Finite-difference check of the soft rasterizer's analytic vertex gradients."""

import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from config.settings import settings
from core.camera import Camera, project_vertices
from core.mesh import Mesh
from core.soft_raster import SoftRasterPass, edge_distances_squared

logger = logging.getLogger(__name__)

SIGMA_RANGE = (1e-2, 1e-1)
# Screen-space distance kept from closest-edge ties, segment ends and the boundary
GEOMETRY_MARGIN = 2e-2
# Largest |delta * d^2 / sigma| accepted
SATURATION_LIMIT = 30.0
MIN_SCREEN_AREA = 1e-2
MAX_ATTEMPTS = 10000

_PIXEL = np.zeros(2)
_SINGLE_FACE = np.array([[0, 1, 2]])


@dataclass(frozen=True)
class GradcheckReport:
    trials: int
    max_relative_error: float
    worst_trial: Optional[int]
    rejected: int
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_relative_error < self.tolerance

    def summary(self) -> str:
        relation = "<" if self.passed else ">="
        return (
            f"max rel err {relation} {self.tolerance:g} "
            f"({self.max_relative_error:.3e} over {self.trials} trials, {self.rejected} rejected)"
        )


def numerical_gradient(func: Callable[[np.ndarray], float], x: np.ndarray, delta: float) -> np.ndarray:
    """Central differences (f(x + h) - f(x - h)) / 2h per coordinate"""
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    for i in range(x.size):
        original = x.flat[i]
        x.flat[i] = original + delta
        forward = func(x)
        x.flat[i] = original - delta
        backward = func(x)
        x.flat[i] = original
        grad.flat[i] = (forward - backward) / (2.0 * delta)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """||a - n|| / max(||a||, ||n||), zero when both vanish"""
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric))
    return float(np.linalg.norm(analytic - numeric) / scale) if scale > 0 else 0.0


def _well_conditioned(tri: np.ndarray, sigma: float) -> bool:
    """Reject pixels near ties, segment ends, the boundary, or saturation"""
    e1, e2 = tri[1] - tri[0], tri[2] - tri[0]
    if 0.5 * abs(e1[0] * e2[1] - e1[1] * e2[0]) < MIN_SCREEN_AREA:
        return False

    distances = np.sqrt(edge_distances_squared(_PIXEL, tri))
    order = np.argsort(distances)
    nearest, runner_up = distances[order[0]], distances[order[1]]
    if runner_up - nearest < GEOMETRY_MARGIN or nearest < GEOMETRY_MARGIN:
        return False
    if nearest ** 2 / sigma > SATURATION_LIMIT:
        return False

    k = order[0]
    start, end = tri[k], tri[(k + 1) % 3]
    segment = end - start
    t_raw = float(np.dot(_PIXEL - start, segment) / np.dot(segment, segment))
    length = float(np.linalg.norm(segment))
    return abs(t_raw) * length >= GEOMETRY_MARGIN and abs(t_raw - 1.0) * length >= GEOMETRY_MARGIN


def _silhouette_value(vertices: np.ndarray, camera: Camera, sigma: float) -> float:
    mesh = Mesh(vertices.reshape(3, 3), _SINGLE_FACE)
    return float(SoftRasterPass(mesh, camera, sigma).silhouette().values[0, 0])


def run_gradcheck(trials: int = None, seed: int = None, step: float = None, tolerance: float = None) -> GradcheckReport:
    """Compare analytic and central-difference gradients of a one-pixel render.

    Each trial draws a random world-space triangle near the origin and a
    log-uniform sigma, then differentiates the single on-axis pixel of a
    1x1 render with respect to the nine vertex coordinates.
    """
    trials = settings.GRADCHECK_TRIALS if trials is None else trials
    seed = settings.GRADCHECK_SEED if seed is None else seed
    step = settings.GRADCHECK_STEP if step is None else step
    tolerance = settings.GRADCHECK_TOLERANCE if tolerance is None else tolerance
    if trials < 0:
        raise ValueError(f"trials must be non-negative, got {trials}")
    if trials == 0:
        logger.warning("gradcheck ran zero trials; passing vacuously")
        return GradcheckReport(0, 0.0, None, 0, tolerance)

    rng = np.random.default_rng(seed)
    camera = Camera(width=1, height=1)
    log_low, log_high = np.log(SIGMA_RANGE[0]), np.log(SIGMA_RANGE[1])

    worst_error, worst_trial, rejected = 0.0, None, 0
    for trial in range(trials):
        for _ in range(MAX_ATTEMPTS):
            vertices = rng.uniform(-0.5, 0.5, size=(3, 3))
            sigma = float(np.exp(rng.uniform(log_low, log_high)))
            tri = project_vertices(vertices, camera).screen_xy
            if _well_conditioned(tri, sigma):
                break
            rejected += 1
        else:
            raise RuntimeError(f"trial {trial}: no well-conditioned configuration in {MAX_ATTEMPTS} draws")

        mesh = Mesh(vertices, _SINGLE_FACE)
        analytic = SoftRasterPass(mesh, camera, sigma).backward(np.ones((1, 1))).d_vertices.ravel()
        numeric = numerical_gradient(lambda x: _silhouette_value(x, camera, sigma), vertices.ravel(), step)
        error = relative_error(analytic, numeric)
        if error >= worst_error:
            worst_error, worst_trial = error, trial

    report = GradcheckReport(trials, worst_error, worst_trial, rejected, tolerance)
    logger.info(f"gradcheck: {report.summary()}")
    return report
