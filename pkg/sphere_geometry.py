"""
Spherical primitives on a sphere of radius R.

Points are Cartesian arrays whose last axis holds (X, Y, Z). Every function
broadcasts over leading axes, so a whole panel lattice goes through one call.
Angles between edges are taken from unit normals of the great-circle planes
(e_ab = p_a x p_b / |p_a x p_b|) rather than from spherical trigonometry.
"""

import logging
import math

import numpy as np

from models import DegenerateEdgeError, GeometryError

logger = logging.getLogger(__name__)

# relative size of |p_a x p_b| below which an edge counts as degenerate
DEGENERATE_TOL = 1e-14


def _points(p):
    return np.asarray(p, dtype=float)


def _scalar_or_array(values):
    return np.asarray(values)[()]


def norm(p):
    return np.linalg.norm(_points(p), axis=-1)


def normalize(p, radius=1.0):
    """Scale points onto the sphere of the given radius."""
    p = _points(p)
    length = norm(p)
    if np.any(length == 0):
        raise GeometryError("cannot project the zero vector onto the sphere")
    return radius * p / length[..., None]


def cart_to_lonlat(p):
    """Return (lon, lat) in radians, lon in (-pi, pi], lat in [-pi/2, pi/2].

    At the poles lon is atan2(0, 0) = 0.
    """
    p = _points(p)
    length = norm(p)
    if np.any(length == 0) or not np.all(np.isfinite(length)):
        raise GeometryError("longitude/latitude undefined for a zero or non-finite vector")
    lon = np.arctan2(p[..., 1], p[..., 0])
    lon = np.where(lon <= -math.pi, math.pi, lon)
    lat = np.arcsin(np.clip(p[..., 2] / length, -1.0, 1.0))
    return _scalar_or_array(lon), _scalar_or_array(lat)


def lonlat_to_cart(lon, lat, radius=1.0):
    lon = np.asarray(lon, dtype=float)
    lat = np.asarray(lat, dtype=float)
    cos_lat = np.cos(lat)
    return radius * np.stack([cos_lat * np.cos(lon), cos_lat * np.sin(lon), np.sin(lat)], axis=-1)


def great_circle_distance(a, b, radius=1.0):
    """Great-circle distance between two (lon, lat) pairs.

    Uses the atan2 form of the central angle: it agrees with
    arccos(sin phi1 sin phi2 + cos phi1 cos phi2 cos dlon) but stays exact for
    coincident and nearly antipodal points.
    """
    lon1, lat1 = (np.asarray(v, dtype=float) for v in a)
    lon2, lat2 = (np.asarray(v, dtype=float) for v in b)
    dlon = lon2 - lon1
    sin1, cos1 = np.sin(lat1), np.cos(lat1)
    sin2, cos2 = np.sin(lat2), np.cos(lat2)
    num = np.hypot(cos2 * np.sin(dlon), cos1 * sin2 - sin1 * cos2 * np.cos(dlon))
    den = sin1 * sin2 + cos1 * cos2 * np.cos(dlon)
    return _scalar_or_array(radius * np.arctan2(num, den))


def central_angle(pa, pb):
    """Angle subtended at the sphere centre by two Cartesian points."""
    pa, pb = _points(pa), _points(pb)
    cross = norm(np.cross(pa, pb))
    dot = np.sum(pa * pb, axis=-1)
    return _scalar_or_array(np.arctan2(cross, dot))


def edge_unit_normal(pa, pb):
    """Unit normal of the great-circle plane through p_a and p_b, along p_a x p_b."""
    pa, pb = _points(pa), _points(pb)
    cross = np.cross(pa, pb)
    length = norm(cross)
    if np.any(length <= DEGENERATE_TOL * norm(pa) * norm(pb)):
        raise DegenerateEdgeError("edge endpoints are parallel or antiparallel")
    return cross / length[..., None]


def interior_angle(pa, pb, pc):
    """Angle at vertex p_b between the arcs towards p_a and p_c, in [0, pi].

    Equal to arccos(e_ba . e_bc); evaluated with atan2 so that angles close to
    0 or pi keep full precision.
    """
    e_ba = edge_unit_normal(pb, pa)
    e_bc = edge_unit_normal(pb, pc)
    cos_angle = np.sum(e_ba * e_bc, axis=-1)
    sin_angle = norm(np.cross(e_ba, e_bc))
    return _scalar_or_array(np.arctan2(sin_angle, cos_angle))


def quad_interior_angles(p1, p2, p3, p4):
    """Interior angles at p1..p4 of a quadrilateral given in cyclic order."""
    return (
        interior_angle(p4, p1, p2),
        interior_angle(p1, p2, p3),
        interior_angle(p2, p3, p4),
        interior_angle(p3, p4, p1),
    )


def quad_area(p1, p2, p3, p4, radius=1.0):
    """Spherical-excess area of a convex quadrilateral.

    The corners must be given in cyclic order (either orientation); a crossed
    ordering is not detected and gives a meaningless result.
    """
    a1, a2, a3, a4 = quad_interior_angles(p1, p2, p3, p4)
    return _scalar_or_array(radius ** 2 * (a1 + a2 + a3 + a4 - 2 * math.pi))


def triangle_area(p1, p2, p3, radius=1.0):
    """Girard's theorem: R^2 times the angle excess over pi."""
    excess = (interior_angle(p3, p1, p2) + interior_angle(p1, p2, p3)
              + interior_angle(p2, p3, p1) - math.pi)
    return _scalar_or_array(radius ** 2 * excess)


def rotation_matrix(axis, angle):
    """Rodrigues rotation matrix for a right-handed rotation about axis."""
    k = normalize(axis)
    kx, ky, kz = k
    cross = np.array([[0.0, -kz, ky], [kz, 0.0, -kx], [-ky, kx, 0.0]])
    return (math.cos(angle) * np.eye(3) + math.sin(angle) * cross
            + (1 - math.cos(angle)) * np.outer(k, k))
