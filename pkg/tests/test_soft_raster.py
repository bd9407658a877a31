import math

import numpy as np
import pytest
from scipy.special import expit

from config.settings import settings
from core.camera import Camera, project
from core.errors import MissingColorsError, RasterInputError
from core.mesh import Mesh, icosphere
from core.soft_raster import (
    BinaryMask,
    GradientBuffer,
    Sharpness,
    SoftRasterPass,
    backward_color,
    backward_soft,
    distance_to_triangle,
    edge_distances_squared,
    face_probability,
    face_probability_map,
    point_in_triangle,
    render_color,
    render_hard,
    render_soft,
    truncation_radius,
)
from utils.gradcheck import numerical_gradient, relative_error

UNIT_TRIANGLE = ((0.0, 0.0), (1.0, 0.0), (0.0, 1.0))


class TestTriangleGeometry:
    def test_point_in_triangle(self):
        assert point_in_triangle((0.25, 0.25), UNIT_TRIANGLE) == 1
        assert point_in_triangle((1.0, 1.0), UNIT_TRIANGLE) == -1

    def test_boundary_counts_as_inside(self):
        assert point_in_triangle((0.5, 0.0), UNIT_TRIANGLE) == 1
        assert point_in_triangle((0.0, 0.0), UNIT_TRIANGLE) == 1

    def test_winding_does_not_matter(self):
        clockwise = (UNIT_TRIANGLE[0], UNIT_TRIANGLE[2], UNIT_TRIANGLE[1])
        assert point_in_triangle((0.25, 0.25), clockwise) == 1

    def test_degenerate_triangle_is_outside(self):
        assert point_in_triangle((0.5, 0.0), ((0.0, 0.0), (1.0, 0.0), (2.0, 0.0))) == -1

    def test_edge_distances(self):
        np.testing.assert_allclose(
            edge_distances_squared((0.25, 0.25), UNIT_TRIANGLE), [0.0625, 0.125, 0.0625]
        )

    def test_distance_to_nearest_vertex(self):
        assert distance_to_triangle((2.0, 0.0), UNIT_TRIANGLE) == pytest.approx(1.0)
        assert distance_to_triangle((-1.0, -1.0), UNIT_TRIANGLE) == pytest.approx(np.sqrt(2.0))


class TestFaceProbability:
    def test_half_on_the_boundary(self):
        assert face_probability((0.5, 0.0), UNIT_TRIANGLE, 0.01) == pytest.approx(0.5)

    def test_inside_and_outside(self):
        inside = face_probability((0.25, 0.25), UNIT_TRIANGLE, 0.01)
        outside = face_probability((-0.25, 0.25), UNIT_TRIANGLE, 0.01)
        assert inside == pytest.approx(expit(6.25))
        assert outside == pytest.approx(expit(-6.25))
        assert inside + outside == pytest.approx(1.0)

    def test_sharper_sigma_is_closer_to_binary(self):
        soft = face_probability((0.3, 0.3), UNIT_TRIANGLE, 0.03)
        sharp = face_probability((0.3, 0.3), UNIT_TRIANGLE, 0.01)
        assert soft < sharp < 1.0

    @pytest.mark.parametrize("sigma", [0.0, -1.0, float("nan")])
    def test_invalid_sigma(self, sigma):
        with pytest.raises(RasterInputError):
            face_probability((0.0, 0.0), UNIT_TRIANGLE, sigma)
        with pytest.raises(RasterInputError):
            Sharpness(sigma)

    def test_probability_map(self):
        triangle = ((-0.5, -0.5), (0.5, -0.5), (0.0, 0.5))
        probability = face_probability_map(triangle, 16, 16, 0.01)
        assert probability.shape == (16, 16)
        assert np.all((probability.values > 0.0) & (probability.values < 1.0))
        assert probability.values[8, 8] > 0.5 > probability.values[0, 0]

    def test_continuous_across_an_edge_with_vanishing_slope(self):
        sigma = 0.01
        slopes = []
        for step in (1e-2, 1e-3, 1e-4):
            inside = face_probability((0.5, step), UNIT_TRIANGLE, sigma)
            outside = face_probability((0.5, -step), UNIT_TRIANGLE, sigma)
            assert inside > 0.5 > outside
            slopes.append((inside - outside) / (2.0 * step))
        assert slopes[0] > slopes[1] > slopes[2]
        # Central slope is about step / (4 sigma) near the edge
        assert slopes[2] == pytest.approx(1e-4 / (4.0 * sigma), rel=1e-3)


class TestSoftSilhouette:
    def test_range_and_bound_by_single_faces(self, template_mesh, small_camera):
        sigma = 0.01
        silhouette = render_soft(template_mesh, small_camera, sigma).values
        assert np.all((silhouette >= 0.0) & (silhouette < 1.0))

        raster = SoftRasterPass(template_mesh, small_camera, sigma)
        for pixel_index, face_index, geometry in raster.pairs():
            probability = expit(geometry.sign * geometry.d2 / sigma)
            assert np.all(silhouette.ravel()[pixel_index] >= probability - 1e-15)

    def test_face_permutation_invariance(self, template_mesh, small_camera, rng):
        order = rng.permutation(template_mesh.face_count)
        shuffled = Mesh(template_mesh.vertices, template_mesh.faces[order])
        np.testing.assert_allclose(
            render_soft(template_mesh, small_camera, 0.01).values,
            render_soft(shuffled, small_camera, 0.01).values,
            atol=1e-12,
        )

    def test_empty_mesh_renders_zero(self, empty_mesh, small_camera):
        assert not render_soft(empty_mesh, small_camera).values.any()
        assert not render_hard(empty_mesh, small_camera).values.any()

    def test_deterministic(self, template_mesh, small_camera):
        first = render_soft(template_mesh, small_camera, 1e-3).values
        second = render_soft(template_mesh, small_camera, 1e-3).values
        assert np.array_equal(first, second)

    def test_converges_to_hard_silhouette(self):
        mesh = icosphere(2, settings.TEMPLATE_RADIUS)
        camera = Camera()
        hard = render_hard(mesh, camera).values.astype(float)
        errors = [
            float(np.mean(np.abs(render_soft(mesh, camera, sigma).values - hard)))
            for sigma in (1e-3, 1e-4, 1e-5)
        ]
        assert errors[0] > errors[1] > errors[2]
        assert errors[2] < 0.02

    def test_truncation_matches_exact(self, template_mesh):
        camera = Camera(azimuth=40.0, elevation=20.0, width=32, height=32)
        exact = render_soft(template_mesh, camera, 1e-4).values
        truncated = render_soft(template_mesh, camera, 1e-4, truncate=True).values
        np.testing.assert_allclose(truncated, exact, atol=1e-5)

    def test_truncation_radius(self):
        radius = truncation_radius(3e-5)
        assert expit(-radius ** 2 / 3e-5) == pytest.approx(settings.TRUNCATION_EPS)

    def test_two_faces_through_the_pixel(self):
        vertices = np.array([[0.0, -0.5, 0.0], [0.5, 0.0, 0.0], [0.0, 0.5, 0.0], [-0.5, 0.0, 0.0]])
        mesh = Mesh(vertices, np.array([[0, 1, 2], [0, 2, 3]]))
        # The single pixel center lies on the shared edge, so each face contributes 0.5
        silhouette = render_soft(mesh, Camera(width=1, height=1), 0.01)
        assert silhouette.values[0, 0] == pytest.approx(0.75, abs=1e-12)

    def test_single_face_matches_its_probability_map(self):
        vertices = np.array([[-0.3, -0.2, 0.1], [0.35, -0.15, 0.0], [0.0, 0.3, -0.1]])
        mesh = Mesh(vertices, np.array([[0, 1, 2]]))
        camera = Camera(azimuth=10.0, elevation=5.0, width=16, height=16)
        screen_triangle = project(mesh, camera).screen_xy[mesh.faces[0]]
        np.testing.assert_allclose(
            render_soft(mesh, camera, 0.01).values,
            face_probability_map(screen_triangle, 16, 16, 0.01).values,
            atol=1e-12,
        )

    def test_adding_faces_never_lowers_coverage(self, template_mesh, small_camera):
        partial = Mesh(template_mesh.vertices, template_mesh.faces[:40])
        fewer = render_soft(partial, small_camera, 0.01).values
        more = render_soft(template_mesh, small_camera, 0.01).values
        assert np.all(fewer <= more + 1e-15)

    def test_range_at_the_default_sigma(self):
        values = render_soft(icosphere(2, 0.375), Camera(width=16, height=16)).values
        assert np.all((values >= 0.0) & (values < 1.0))
        assert not np.signbit(values).any()
        assert values.max() > 0.999


class TestHardSilhouette:
    def test_template_disk(self, template_mesh):
        mask = render_hard(template_mesh, Camera())
        assert isinstance(mask, BinaryMask)
        assert 0 < mask.values.sum() < mask.values.size
        assert mask.values[32, 32]
        assert not mask.values[0, 0]

    def test_matches_pixel_centers_inside_projection(self, template_mesh, small_camera):
        mask = render_hard(template_mesh, small_camera).values
        tris = project(template_mesh, small_camera).screen_xy[template_mesh.faces]
        for row in range(8):
            for col in range(8):
                center = ((2 * col + 1) / 8 - 1.0, 1.0 - (2 * row + 1) / 8)
                covered = any(point_in_triangle(center, tri) == 1 for tri in tris)
                assert mask[row, col] == covered


class TestBackward:
    def test_vertex_gradient_matches_finite_differences(self, template_mesh, small_camera, rng):
        sigma = 1e-2
        upstream = rng.uniform(-1.0, 1.0, size=small_camera.image_shape)

        def weighted_silhouette(flat_vertices):
            mesh = template_mesh.with_vertices(flat_vertices.reshape(-1, 3))
            return float(np.sum(upstream * render_soft(mesh, small_camera, sigma).values))

        analytic = backward_soft(template_mesh, small_camera, sigma, upstream).d_vertices
        numeric = numerical_gradient(weighted_silhouette, template_mesh.vertices.ravel(), 1e-6)
        assert relative_error(analytic.ravel(), numeric) < 1e-5

    def test_truncated_gradient_close_to_exact(self, template_mesh, rng):
        camera = Camera(azimuth=20.0, elevation=10.0, width=32, height=32)
        upstream = rng.uniform(-1.0, 1.0, size=camera.image_shape)
        exact = backward_soft(template_mesh, camera, 3e-3, upstream).d_vertices
        truncated = backward_soft(template_mesh, camera, 3e-3, upstream, truncate=True).d_vertices
        assert relative_error(truncated, exact) < 1e-4

    def test_zero_upstream_gives_zero_gradient(self, template_mesh, small_camera):
        gradient = backward_soft(template_mesh, small_camera, 1e-2, np.zeros(small_camera.image_shape))
        assert isinstance(gradient, GradientBuffer)
        assert not gradient.d_vertices.any()
        assert gradient.is_finite()

    def test_upstream_shape_checked(self, template_mesh, small_camera):
        with pytest.raises(RasterInputError):
            backward_soft(template_mesh, small_camera, 1e-2, np.zeros((4, 4)))

    def test_non_finite_upstream_rejected(self, template_mesh, small_camera):
        upstream = np.zeros(small_camera.image_shape)
        upstream[0, 0] = np.inf
        with pytest.raises(RasterInputError):
            backward_soft(template_mesh, small_camera, 1e-2, upstream)

    def test_shifting_mesh_and_pixel_together_keeps_the_gradient(self):
        sigma = 1e-2
        camera = Camera(width=16, height=16)
        vertices = np.array([[-0.2, -0.15, 0.0], [0.15, -0.1, 0.0], [-0.05, 0.2, 0.0]])
        mesh = Mesh(vertices, np.array([[0, 1, 2]]))
        # Two pixel widths along screen x, at the depth of the z = 0 plane
        offset = 2 * (2.0 / 16) * camera.distance * math.tan(math.radians(camera.fov_y / 2.0))
        shifted = mesh.with_vertices(vertices + np.array([offset, 0.0, 0.0]))

        upstream = np.zeros(camera.image_shape)
        upstream[6, 7] = 1.0
        moved_upstream = np.zeros(camera.image_shape)
        moved_upstream[6, 9] = 1.0

        # In-plane components only; the depth component carries the perspective term
        gradient = backward_soft(mesh, camera, sigma, upstream).d_vertices[:, :2]
        moved_gradient = backward_soft(shifted, camera, sigma, moved_upstream).d_vertices[:, :2]
        assert np.abs(gradient).max() > 1e-3
        np.testing.assert_allclose(moved_gradient, gradient, rtol=1e-6, atol=1e-12)


class TestColor:
    def test_uniform_color_inside_silhouette(self, template_mesh):
        color = np.array([0.2, 0.6, 0.9])
        mesh = template_mesh.with_colors(np.tile(color, (template_mesh.vertex_count, 1)))
        camera = Camera(width=16, height=16)
        image = render_color(mesh, camera, 1e-3)
        assert image.shape == (16, 16, 3)
        np.testing.assert_allclose(image[8, 8], color, atol=1e-6)

    def test_requires_colors(self, template_mesh, small_camera):
        with pytest.raises(MissingColorsError):
            render_color(template_mesh, small_camera)

    def test_color_gradient_matches_finite_differences(self, template_mesh, small_camera, rng):
        colors = rng.uniform(0.2, 0.8, size=(template_mesh.vertex_count, 3))
        mesh = template_mesh.with_colors(colors)
        upstream = rng.uniform(-1.0, 1.0, size=small_camera.image_shape + (3,))

        def weighted_image(flat_colors):
            recolored = mesh.with_colors(flat_colors.reshape(-1, 3))
            return float(np.sum(upstream * render_color(recolored, small_camera, 1e-2)))

        analytic = backward_color(mesh, small_camera, 1e-2, upstream)
        numeric = numerical_gradient(weighted_image, colors.ravel(), 1e-6)
        assert relative_error(analytic.d_colors.ravel(), numeric) < 1e-6
        assert not analytic.d_vertices.any()
