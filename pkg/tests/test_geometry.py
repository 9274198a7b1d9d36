import numpy as np
import pytest

from scatter_workbench.errors import GeometryError, NearBoundaryError
from scatter_workbench.Geometry import (
    build_volume_mesh,
    discretize_boundary,
    distance_to_curve,
    make_curve,
    make_grid,
    mask_in_curve,
    point_in_curve,
    points_in_curve,
    trig_interpolation_matrix,
)


def test_reference_points():
    np.testing.assert_allclose(make_curve("circle", (2.0,)).point(0.0), [2.0, 0.0])
    kite = make_curve("kite")
    np.testing.assert_allclose(kite.point(0.0), [1.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(kite.point(np.pi / 2), [-1.3, 1.5], atol=1e-15)
    np.testing.assert_allclose(make_curve("rounded_square").point(0.0), [4.5, 0.0])


def test_offset_and_rotation():
    curve = make_curve("circle", (1.0,), offset=(2.0, 3.0), rotation=np.pi / 2)
    np.testing.assert_allclose(curve.point(0.0), [2.0, 4.0], atol=1e-15)
    rotated = make_curve("kite").rotated(np.pi)
    np.testing.assert_allclose(rotated.point(0.0), [-1.0, 0.0], atol=1e-15)


def test_circle_measures(unit_circle):
    assert unit_circle.area == pytest.approx(np.pi, rel=1e-13)
    assert unit_circle.length == pytest.approx(2 * np.pi, rel=1e-13)
    assert unit_circle.circumradius == pytest.approx(1.0)


def test_kite_area_and_centroid(kite):
    assert kite.area == pytest.approx(1.5 * np.pi, rel=1e-12)
    cx, cy = kite.centroid
    assert cx == pytest.approx(-0.325, abs=1e-12)
    assert cy == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize(
    "kind, params",
    [("ellipse", (1.0,)), ("circle", (-1.0,)), ("kite", (0.65, 0.0)), ("rounded_square", (1.0, 2.0))],
)
def test_invalid_curves(kind, params):
    with pytest.raises(GeometryError):
        make_curve(kind, params)


def test_clockwise_curve_is_rejected():
    with pytest.raises(GeometryError):
        make_curve("kite", (0.65, -1.5))


@pytest.mark.parametrize("n", [6, 7, 63])
def test_node_count_must_be_even(unit_circle, n):
    with pytest.raises(GeometryError):
        discretize_boundary(unit_circle, n)


def test_circle_mesh():
    mesh = discretize_boundary(make_curve("circle", (2.0,)), 32)
    np.testing.assert_allclose(mesh.jacobians, 2.0)
    np.testing.assert_allclose(mesh.normals, mesh.nodes / 2.0, atol=1e-15)
    assert mesh.length == pytest.approx(4 * np.pi, rel=1e-14)
    assert mesh.weight == pytest.approx(2 * np.pi / 32)


def test_green_identities_on_kite(kite_mesh, kite):
    w = kite_mesh.weights
    np.testing.assert_allclose(w @ kite_mesh.normals, 0.0, atol=1e-12)
    assert np.sum(w * np.sum(kite_mesh.nodes * kite_mesh.normals, axis=1)) == pytest.approx(2 * kite.area, rel=1e-12)
    assert kite_mesh.length == pytest.approx(kite.length, rel=1e-10)


def test_membership(kite):
    assert not point_in_curve(kite, (-2.3, 0.0))
    assert point_in_curve(kite, (-0.5, 0.0))
    inside = points_in_curve(kite, np.array([[0.0, 0.0], [3.0, 3.0], [-0.5, 1.0]]))
    assert inside.tolist() == [True, False, True]


def test_membership_on_the_curve_raises(kite):
    with pytest.raises(NearBoundaryError) as info:
        point_in_curve(kite, kite.point(0.4))
    assert info.value.indices == [0]


def test_distance_to_circle(unit_circle):
    np.testing.assert_allclose(distance_to_curve(unit_circle, [[3.0, 0.0], [0.0, 0.0], [0.0, -1.5]]), [2.0, 1.0, 0.5], atol=1e-9)


def test_trig_interpolation_is_exact_for_band_limited_data():
    n, factor = 16, 4
    coarse = np.cos(3 * 2 * np.pi * np.arange(n) / n) + 0.5 * np.sin(7 * 2 * np.pi * np.arange(n) / n)
    fine_t = 2 * np.pi * np.arange(n * factor) / (n * factor)
    expected = np.cos(3 * fine_t) + 0.5 * np.sin(7 * fine_t)
    np.testing.assert_allclose(trig_interpolation_matrix(n, factor) @ coarse, expected, atol=1e-13)


def test_annulus_volume_mesh():
    mesh = build_volume_mesh(make_curve("circle", (2.0,)), make_curve("circle", (1.0,)), 0.05)
    assert mesh.area == pytest.approx(3 * np.pi, rel=0.02)
    radii = np.hypot(mesh.cell_centers[:, 0], mesh.cell_centers[:, 1])
    assert radii.min() > 1.0
    assert radii.max() < 2.0


def test_medium_without_obstacle():
    mesh = build_volume_mesh(make_curve("circle", (1.0,)), None, 0.1)
    assert mesh.area == pytest.approx(np.pi, rel=0.05)
    assert mesh.indices.shape == (mesh.n, 2)


def test_obstacle_must_sit_inside_the_medium():
    omega = make_curve("circle", (1.0,))
    with pytest.raises(GeometryError):
        build_volume_mesh(omega, make_curve("circle", (0.5,), offset=(0.8, 0.0)), 0.1)
    with pytest.raises(GeometryError):
        build_volume_mesh(omega, make_curve("circle", (1.0,)), 0.1)


def test_empty_volume_mesh():
    mesh = build_volume_mesh(None, None, 0.1)
    assert mesh.is_empty
    assert mesh.area == 0.0


def test_sampling_grid_layout():
    grid = make_grid((-6, 6, -6, 6), 121)
    assert grid.points.shape == (14641, 2)
    assert grid.spacing == pytest.approx((0.1, 0.1))
    corners = make_grid((-1, 1, -1, 1), 2)
    np.testing.assert_array_equal(corners.points, [[-1, -1], [1, -1], [-1, 1], [1, 1]])
    shifted = corners.translated((1.0, 0.0))
    assert shifted.bbox == (0.0, 2.0, -1.0, 1.0)


@pytest.mark.parametrize("bbox, n", [((1, 1, 0, 1), 10), ((0, 1, 2, 1), 10), ((0, 1, 0, 1), 1)])
def test_degenerate_grids(bbox, n):
    with pytest.raises(GeometryError):
        make_grid(bbox, n)


def test_mask_in_curve(unit_circle):
    grid = make_grid((-2, 2, -2, 2), 41)
    mask = mask_in_curve(unit_circle, grid)
    assert mask.sum() * 0.1 ** 2 == pytest.approx(np.pi, rel=0.05)
