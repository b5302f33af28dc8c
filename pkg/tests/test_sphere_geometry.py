from __future__ import annotations

import math

import numpy as np
import pytest

from models import DegenerateEdgeError, GeometryError
from sphere_geometry import (cart_to_lonlat, central_angle, edge_unit_normal, great_circle_distance,
                             interior_angle, lonlat_to_cart, normalize, quad_area, rotation_matrix,
                             triangle_area)

X = np.array([1.0, 0.0, 0.0])
Y = np.array([0.0, 1.0, 0.0])
Z = np.array([0.0, 0.0, 1.0])


def _random_rotation(rng):
    axis = rng.normal(size=3)
    return rotation_matrix(axis, rng.uniform(0, 2 * math.pi))


def test_cart_to_lonlat_axes() -> None:
    assert cart_to_lonlat(X) == pytest.approx((0.0, 0.0))
    assert cart_to_lonlat(Y) == pytest.approx((math.pi / 2, 0.0))
    lon, lat = cart_to_lonlat(Z)
    assert lon == 0.0
    assert lat == pytest.approx(math.pi / 2)


def test_cart_to_lonlat_keeps_lon_in_half_open_range() -> None:
    lon, _ = cart_to_lonlat([-1.0, -0.0, 0.0])
    assert lon == pytest.approx(math.pi)


def test_cart_to_lonlat_rejects_zero_vector() -> None:
    with pytest.raises(GeometryError):
        cart_to_lonlat([0.0, 0.0, 0.0])
    # still a ValueError for callers that only know the builtin
    with pytest.raises(ValueError):
        normalize([0.0, 0.0, 0.0])


def test_lonlat_roundtrip_on_random_points() -> None:
    rng = np.random.default_rng(7)
    points = normalize(rng.normal(size=(50, 3)), 3.0)
    lon, lat = cart_to_lonlat(points)
    np.testing.assert_allclose(lonlat_to_cart(lon, lat, 3.0), points, atol=1e-12)


def test_great_circle_distance_special_cases() -> None:
    assert great_circle_distance((0.0, 0.0), (math.pi / 2, 0.0), radius=2.0) == pytest.approx(math.pi)
    assert great_circle_distance((0.3, 0.2), (0.3, 0.2)) == 0.0
    assert great_circle_distance((0.0, 0.0), (math.pi, 0.0)) == pytest.approx(math.pi)


def test_central_angle_agrees_with_distance() -> None:
    rng = np.random.default_rng(11)
    a = normalize(rng.normal(size=(20, 3)))
    b = normalize(rng.normal(size=(20, 3)))
    expected = great_circle_distance(cart_to_lonlat(a), cart_to_lonlat(b))
    np.testing.assert_allclose(central_angle(a, b), expected, atol=1e-12)


def test_octant_triangle() -> None:
    assert interior_angle(Z, X, Y) == pytest.approx(math.pi / 2)
    assert triangle_area(X, Y, Z) == pytest.approx(4 * math.pi / 8)
    assert triangle_area(X, Y, Z, radius=2.0) == pytest.approx(2 * math.pi)


def test_quad_area_is_orientation_independent() -> None:
    corners = normalize([[1.0, -0.2, -0.2], [1.0, 0.2, -0.2], [1.0, 0.2, 0.2], [1.0, -0.2, 0.2]])
    forward = quad_area(*corners)
    backward = quad_area(*corners[::-1])
    assert forward > 0
    assert backward == pytest.approx(forward, rel=1e-12)


def test_degenerate_edge_raises() -> None:
    with pytest.raises(DegenerateEdgeError):
        edge_unit_normal(X, 2 * X)
    with pytest.raises(DegenerateEdgeError):
        edge_unit_normal(X, -X)


def test_rotation_matrix_is_orthonormal() -> None:
    r = rotation_matrix(Z, math.pi / 2)
    np.testing.assert_allclose(r @ r.T, np.eye(3), atol=1e-15)
    np.testing.assert_allclose(r @ X, Y, atol=1e-15)


def test_angles_and_areas_are_rotation_invariant() -> None:
    rng = np.random.default_rng(3)
    corners = normalize([[1.0, -0.1, -0.15], [1.0, 0.2, -0.1], [1.0, 0.15, 0.2], [1.0, -0.1, 0.1]])
    area = quad_area(*corners)
    angle = interior_angle(corners[0], corners[1], corners[2])
    for _ in range(5):
        rotated = corners @ _random_rotation(rng).T
        assert quad_area(*rotated) == pytest.approx(area, abs=1e-12)
        assert interior_angle(rotated[0], rotated[1], rotated[2]) == pytest.approx(angle, abs=1e-12)
        assert central_angle(rotated[0], rotated[2]) == pytest.approx(central_angle(corners[0], corners[2]), abs=1e-12)


def test_interior_angle_is_symmetric_in_its_arms() -> None:
    rng = np.random.default_rng(5)
    a, b, c = (normalize(rng.normal(size=(30, 3))) for _ in range(3))
    np.testing.assert_allclose(interior_angle(a, b, c), interior_angle(c, b, a), atol=1e-14)


def test_great_circle_distance_is_a_metric() -> None:
    rng = np.random.default_rng(9)
    lon = rng.uniform(-math.pi, math.pi, size=(3, 200))
    lat = rng.uniform(-math.pi / 2, math.pi / 2, size=(3, 200))
    a, b, c = ((lon[n], lat[n]) for n in range(3))
    ab, ba = great_circle_distance(a, b), great_circle_distance(b, a)
    np.testing.assert_allclose(ab, ba, atol=1e-14)
    assert np.all(ab >= 0) and np.all(ab <= math.pi)
    assert np.all(great_circle_distance(a, c) <= ab + great_circle_distance(b, c) + 1e-12)


def test_quad_area_splits_into_two_triangles() -> None:
    rng = np.random.default_rng(13)
    corners = normalize([[1.0, -0.1, -0.15], [1.0, 0.2, -0.1], [1.0, 0.15, 0.2], [1.0, -0.1, 0.1]])
    for _ in range(5):
        p1, p2, p3, p4 = corners @ _random_rotation(rng).T
        halves = triangle_area(p1, p2, p3, radius=3.0) + triangle_area(p1, p3, p4, radius=3.0)
        assert quad_area(p1, p2, p3, p4, radius=3.0) == pytest.approx(halves, rel=1e-12)


def test_cube_face_covers_a_sixth_of_the_sphere() -> None:
    face = normalize([[1.0, -1.0, -1.0], [1.0, 1.0, -1.0], [1.0, 1.0, 1.0], [1.0, -1.0, 1.0]])
    assert interior_angle(face[3], face[0], face[1]) == pytest.approx(2 * math.pi / 3, rel=1e-14)
    assert quad_area(*face, radius=2.0) == pytest.approx(4 * math.pi * 4 / 6, rel=1e-13)
