"""Multi-view silhouette fitting of a template mesh by optimizing a displacement field."""

import asyncio
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterator, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from config.settings import settings
from core.camera import Camera, project
from core.errors import FitError, LossError, MissingColorsError, NonFiniteGradientError, RasterInputError, SoftRasError
from core.fit_config import FitConfig
from core.losses import (
    LossComponents,
    LossReport,
    color_l2_loss,
    flattening_loss,
    iou_loss,
    laplacian_loss,
    total_loss,
    weighted_vertex_gradient,
)
from core.mesh import Mesh, edge_adjacency, vertex_adjacency
from core.optimizer import AdamState, adam_step
from core.soft_raster import BinaryMask, SoftRasterPass, render_color, render_hard

logger = logging.getLogger(__name__)

# Starting color of templates that carry none
_NEUTRAL_GRAY = 0.5


@dataclass(frozen=True)
class View:
    """One camera with its target silhouette and optional RGB target"""

    camera: Camera
    mask: BinaryMask
    color_target: Optional[np.ndarray] = None


class ViewSet:
    """Non-empty list of views whose targets match their cameras' image sizes"""

    def __init__(self, views: Sequence[View]):
        views = list(views)
        if not views:
            raise RasterInputError("a view set needs at least one view")

        with_colors = [view.color_target is not None for view in views]
        if any(with_colors) and not all(with_colors):
            raise RasterInputError("color targets must be given for every view or for none")

        for index, view in enumerate(views):
            expected = view.camera.image_shape
            if view.mask.shape != expected:
                raise RasterInputError(
                    f"view {index}: mask shape {view.mask.shape} does not match camera image {expected}"
                )
            if view.color_target is not None and np.shape(view.color_target) != expected + (3,):
                raise RasterInputError(
                    f"view {index}: color target shape {np.shape(view.color_target)} "
                    f"does not match camera image {expected + (3,)}"
                )
        self.views: Tuple[View, ...] = tuple(views)

    def __len__(self) -> int:
        return len(self.views)

    def __iter__(self) -> Iterator[View]:
        return iter(self.views)

    def __getitem__(self, index: int) -> View:
        return self.views[index]

    @property
    def cameras(self) -> List[Camera]:
        return [view.camera for view in self.views]

    @property
    def has_colors(self) -> bool:
        return self.views[0].color_target is not None

    @classmethod
    def from_mesh(
        cls,
        mesh: Mesh,
        cameras: Sequence[Camera],
        with_colors: bool = False,
        sigma: Optional[float] = None,
    ) -> "ViewSet":
        """Targets rendered from a reference mesh: hard masks, plus soft color images when asked"""
        views = []
        for camera in cameras:
            color_target = render_color(mesh, camera, sigma) if with_colors else None
            views.append(View(camera, render_hard(mesh, camera), color_target))
        return cls(views)


class FitResult(NamedTuple):
    mesh: Mesh
    history: List[LossReport]


class _ViewTerms(NamedTuple):
    iou: float
    vertex_grad: np.ndarray
    color: Optional[float]
    color_grad: Optional[np.ndarray]


class SilhouetteFitter:
    """Adam on the displacement field of a template, full batch over all views each iteration.

    Views may be rendered on several worker threads, but their losses and
    gradients are always summed in ascending view order, so the loss history
    does not depend on the worker count.
    """

    def __init__(self, template: Mesh, views: ViewSet, config: Optional[FitConfig] = None):
        self.template = template
        self.views = views
        self.config = config or FitConfig()
        self.logger = logging.getLogger(f"{__name__}.SilhouetteFitter")

        if self.config.color_enabled and not views.has_colors:
            raise MissingColorsError("color fitting needs color targets on every view")

        self.vertex_adjacency = vertex_adjacency(template)
        self.edge_adjacency = edge_adjacency(template)

    def _check_projectable(self) -> None:
        for view_index, view in enumerate(self.views):
            try:
                project(self.template, view.camera)
            except SoftRasError as e:
                raise FitError(f"template is not projectable: {e}", view_index=view_index) from e

    def _view_terms(self, mesh: Mesh, view_index: int, sigma: float, iteration: int) -> _ViewTerms:
        view = self.views[view_index]
        try:
            raster = SoftRasterPass(mesh, view.camera, sigma, self.config.truncate)
            silhouette_loss, upstream = iou_loss(raster.silhouette(), view.mask)
            gradient = raster.backward(upstream)
            if not gradient.is_finite():
                raise NonFiniteGradientError("non-finite vertex gradient", iteration=iteration, view_index=view_index)
            vertex_grad = gradient.d_vertices

            color_value = color_grad = None
            if self.config.color_enabled:
                color_value, color_upstream = color_l2_loss(raster.color_image(), view.color_target)
                color_grad = raster.color_backward(color_upstream).d_colors
        except FitError:
            raise
        except SoftRasError as e:
            raise FitError(str(e), iteration=iteration, view_index=view_index) from e

        return _ViewTerms(silhouette_loss, vertex_grad, color_value, color_grad)

    def _evaluate(
        self,
        mesh: Mesh,
        iteration: int,
        executor: Optional[ThreadPoolExecutor],
    ) -> Tuple[LossReport, np.ndarray, Optional[np.ndarray]]:
        sigma = self.config.sigma_at(iteration)
        indices = range(len(self.views))
        if executor is None:
            terms = [self._view_terms(mesh, index, sigma, iteration) for index in indices]
        else:
            terms = list(executor.map(lambda index: self._view_terms(mesh, index, sigma, iteration), indices))

        view_count = len(terms)
        silhouette_loss = 0.0
        silhouette_grad = np.zeros_like(mesh.vertices)
        color_value = color_grad = None
        if self.config.color_enabled:
            color_value = 0.0
            color_grad = np.zeros_like(mesh.vertices)
        for term in terms:
            silhouette_loss += term.iou
            silhouette_grad += term.vertex_grad
            if color_grad is not None:
                color_value += term.color
                color_grad += term.color_grad
        silhouette_loss /= view_count
        silhouette_grad /= view_count

        try:
            laplacian_value, laplacian_grad = laplacian_loss(mesh, self.vertex_adjacency)
            flattening_value, flattening_grad = flattening_loss(mesh, self.edge_adjacency)
            if color_grad is not None:
                color_value /= view_count
                color_grad *= self.config.color_weight / view_count
            report = total_loss(
                LossComponents(silhouette_loss, laplacian_value, flattening_value, color_value),
                self.config.weights,
                self.config.color_weight,
            )
        except LossError as e:
            raise FitError(str(e), iteration=iteration) from e

        gradient = weighted_vertex_gradient(silhouette_grad, laplacian_grad, flattening_grad, self.config.weights)
        return report, gradient, color_grad

    def _deformed(self, displacement: np.ndarray, colors: Optional[np.ndarray]) -> Mesh:
        return Mesh(self.template.vertices + displacement, self.template.faces, colors)

    def run(self) -> FitResult:
        """Optimize and return the deformed mesh plus one loss report per iteration"""
        config = self.config
        self._check_projectable()
        if config.iterations == 0:
            return FitResult(self.template, [])

        displacement = np.zeros_like(self.template.vertices)
        displacement_state = AdamState.zeros_like(displacement)
        colors = self.template.colors
        color_state = None
        if config.color_enabled:
            colors = (
                np.array(self.template.colors)
                if self.template.has_colors
                else np.full_like(self.template.vertices, _NEUTRAL_GRAY)
            )
            color_state = AdamState.zeros_like(colors)

        history: List[LossReport] = []
        start_time = time.time()
        executor = ThreadPoolExecutor(max_workers=config.num_workers) if config.num_workers > 1 else None
        try:
            for iteration in range(config.iterations):
                mesh = self._deformed(displacement, colors)
                report, gradient, color_grad = self._evaluate(mesh, iteration, executor)
                history.append(report)

                displacement, displacement_state = adam_step(
                    displacement, gradient, displacement_state, config, iteration=iteration
                )
                if color_state is not None:
                    colors, color_state = adam_step(colors, color_grad, color_state, config, iteration=iteration)
                    colors = np.clip(colors, 0.0, 1.0)

                if iteration % settings.FIT_LOG_EVERY == 0 or iteration == config.iterations - 1:
                    self.logger.info(
                        f"iteration {iteration}: total={report.total:.6f} iou={report.iou:.6f} "
                        f"laplacian={report.laplacian:.6f} flattening={report.flattening:.6f}"
                    )
        finally:
            if executor is not None:
                executor.shutdown()

        self.logger.info(
            f"Fit of {len(self.views)} views finished in {time.time() - start_time:.2f}s "
            f"after {config.iterations} iterations"
        )
        return FitResult(self._deformed(displacement, colors), history)

    async def run_async(self) -> FitResult:
        loop = asyncio.get_running_loop()
        return await loop.run_in_executor(None, self.run)


def fit(template: Mesh, views: ViewSet, config: Optional[FitConfig] = None) -> FitResult:
    """Deform a template so its soft silhouettes match every view's target"""
    return SilhouetteFitter(template, views, config).run()


async def fit_async(template: Mesh, views: ViewSet, config: Optional[FitConfig] = None) -> FitResult:
    return await SilhouetteFitter(template, views, config).run_async()


def mask_iou(rendered: BinaryMask, target: BinaryMask) -> float:
    """Intersection over union of two masks; two empty masks count as identical"""
    union = np.logical_or(rendered.values, target.values).sum()
    if union == 0:
        return 1.0
    return float(np.logical_and(rendered.values, target.values).sum() / union)


def evaluate_2d_iou(mesh: Mesh, views: ViewSet) -> Tuple[List[float], float]:
    """Per-view and mean IoU between hard renders of the mesh and the target masks"""
    per_view = [mask_iou(render_hard(mesh, view.camera), view.mask) for view in views]
    return per_view, float(np.mean(per_view))
