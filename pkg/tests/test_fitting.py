import numpy as np
import pytest

from core.camera import Camera, ViewSetName, view_set_cameras
from core.errors import FitError, MissingColorsError, NonFiniteGradientError, RasterInputError
from core.fit_config import FitConfig
from core.fitting import SilhouetteFitter, View, ViewSet, evaluate_2d_iou, fit, mask_iou
from core.losses import LossWeights
from core.shapes import ellipsoid, template_sphere
from core.soft_raster import BinaryMask, GradientBuffer, SoftRasterPass
from core.voxel_eval import mesh_iou_3d


@pytest.fixture
def quick_cameras():
    return [Camera(azimuth=azimuth, elevation=20.0, width=16, height=16) for azimuth in (0.0, 90.0, 180.0, 270.0)]


@pytest.fixture
def self_views(template_mesh, quick_cameras):
    return ViewSet.from_mesh(template_mesh, quick_cameras)


class TestViewSet:
    def test_needs_views(self):
        with pytest.raises(RasterInputError):
            ViewSet([])

    def test_mask_must_match_camera(self):
        with pytest.raises(RasterInputError):
            ViewSet([View(Camera(width=8, height=8), BinaryMask(np.zeros((8, 6))))])

    def test_color_targets_all_or_none(self):
        camera = Camera(width=4, height=4)
        mask = BinaryMask(np.zeros((4, 4)))
        with pytest.raises(RasterInputError):
            ViewSet([View(camera, mask, np.zeros((4, 4, 3))), View(camera, mask)])

    def test_from_mesh(self, template_mesh, quick_cameras):
        colored = template_mesh.with_colors(np.full((template_mesh.vertex_count, 3), 0.5))
        views = ViewSet.from_mesh(colored, quick_cameras, with_colors=True, sigma=1e-3)
        assert len(views) == 4
        assert views.has_colors
        assert views[0].color_target.shape == (16, 16, 3)
        assert views.cameras == quick_cameras


class TestFit:
    def test_zero_iterations_returns_template(self, template_mesh, self_views):
        fitted, history = fit(template_mesh, self_views, FitConfig(iterations=0))
        assert fitted is template_mesh
        assert history == []

    def test_self_target_loss_does_not_increase(self, template_mesh, self_views):
        config = FitConfig(sigma=1e-3, iterations=30)
        fitted, history = fit(template_mesh, self_views, config)
        assert len(history) == 30
        totals = [report.total for report in history]
        for before, after in zip(totals[:10], totals[1:10]):
            assert after <= before + 1e-12
        assert totals[-1] <= totals[0]
        np.testing.assert_array_equal(fitted.faces, template_mesh.faces)

    def test_history_independent_of_worker_count(self, template_mesh, self_views):
        serial = fit(template_mesh, self_views, FitConfig(sigma=1e-3, iterations=5, num_workers=1))
        threaded = fit(template_mesh, self_views, FitConfig(sigma=1e-3, iterations=5, num_workers=3))
        assert serial.history == threaded.history
        assert np.array_equal(serial.mesh.vertices, threaded.mesh.vertices)

    def test_repeat_runs_are_identical(self, template_mesh, self_views):
        config = FitConfig(sigma=1e-3, iterations=5, truncate=True)
        assert fit(template_mesh, self_views, config).history == fit(template_mesh, self_views, config).history

    def test_sigma_schedule_is_followed(self, template_mesh, self_views):
        config = FitConfig(sigma=1e-2, sigma_schedule=[(2, 1e-3)], iterations=4)
        history = fit(template_mesh, self_views, config).history
        fixed = fit(template_mesh, self_views, FitConfig(sigma=1e-2, iterations=4)).history
        assert history[:2] == fixed[:2]
        assert history[2] != fixed[2]

    def test_unprojectable_template(self, template_mesh):
        views = ViewSet([
            View(Camera(width=8, height=8), BinaryMask(np.zeros((8, 8)))),
            View(Camera(distance=0.3, width=8, height=8), BinaryMask(np.zeros((8, 8)))),
        ])
        with pytest.raises(FitError) as info:
            fit(template_mesh, views, FitConfig(iterations=3))
        assert info.value.view_index == 1

    def test_projection_failure_names_iteration_and_view(self, template_mesh, self_views):
        fitter = SilhouetteFitter(template_mesh, self_views, FitConfig(iterations=1))
        eye_direction = np.array([1.0, 0.0, 0.0])
        too_close = template_mesh.with_vertices(template_mesh.vertices + 2.6 * eye_direction)
        with pytest.raises(FitError) as info:
            fitter._view_terms(too_close, 1, 1e-3, iteration=7)
        assert (info.value.iteration, info.value.view_index) == (7, 1)
        assert str(info.value).startswith("iteration 7, view 1:")

    def test_non_finite_gradient_stops_the_fit(self, template_mesh, self_views, monkeypatch):
        def poisoned_backward(raster, upstream):
            return GradientBuffer(np.full((raster.mesh.vertex_count, 3), np.nan))

        monkeypatch.setattr(SoftRasterPass, "backward", poisoned_backward)
        with pytest.raises(NonFiniteGradientError) as info:
            fit(template_mesh, self_views, FitConfig(iterations=2))
        assert (info.value.iteration, info.value.view_index) == (0, 0)
        assert info.value.error_code == "NON_FINITE_GRADIENT"

    def test_color_fit_needs_color_targets(self, template_mesh, self_views):
        with pytest.raises(MissingColorsError):
            fit(template_mesh, self_views, FitConfig(color_enabled=True))

    def test_color_fit_reduces_color_loss(self, template_mesh, quick_cameras):
        target = template_mesh.with_colors(np.tile([0.9, 0.2, 0.1], (template_mesh.vertex_count, 1)))
        views = ViewSet.from_mesh(target, quick_cameras, with_colors=True, sigma=1e-3)
        config = FitConfig(sigma=1e-3, iterations=15, color_enabled=True, adam_alpha=1e-2)
        fitted, history = fit(template_mesh, views, config)
        assert history[-1].color < history[0].color
        assert fitted.has_colors
        assert np.all((fitted.colors >= 0.0) & (fitted.colors <= 1.0))
        assert history[0].total == pytest.approx(
            history[0].iou + 0.01 * history[0].laplacian + 0.001 * history[0].flattening + history[0].color
        )


class TestEvaluate2dIou:
    def test_source_mesh_matches_its_views(self, template_mesh, self_views):
        per_view, mean = evaluate_2d_iou(template_mesh, self_views)
        assert per_view == [1.0] * 4
        assert mean == 1.0

    def test_empty_target(self, template_mesh):
        views = ViewSet([View(Camera(width=16, height=16), BinaryMask(np.zeros((16, 16))))])
        assert evaluate_2d_iou(template_mesh, views) == ([0.0], 0.0)

    def test_half_frame_against_full_frame(self):
        half = np.zeros((8, 8), dtype=bool)
        half[:, :4] = True
        assert mask_iou(BinaryMask(half), BinaryMask(np.ones((8, 8)))) == 0.5

    def test_two_empty_masks(self):
        assert mask_iou(BinaryMask(np.zeros((2, 2))), BinaryMask(np.zeros((2, 2)))) == 1.0


@pytest.mark.slow
def test_ellipsoid_reconstruction():
    target = ellipsoid()
    views = ViewSet.from_mesh(target, view_set_cameras(ViewSetName.RING24))
    fitted, history = fit(template_sphere(), views, FitConfig(iterations=2000, truncate=True))
    _, mean_iou = evaluate_2d_iou(fitted, views)
    assert mean_iou >= 0.95
    assert mesh_iou_3d(fitted, target, 32) >= 0.85
    assert history[-1].total < history[0].total


@pytest.mark.slow
def test_single_view_descent_without_regularizers():
    views = ViewSet.from_mesh(ellipsoid(), [Camera(azimuth=30.0, elevation=30.0)])
    config = FitConfig(iterations=500, weights=LossWeights(lambda_=0.0, mu=0.0), truncate=True)
    totals = [report.total for report in fit(template_sphere(), views, config).history]
    windows = [totals[start + 49] <= totals[start] for start in range(0, len(totals) - 49)]
    assert np.mean(windows) >= 0.9
