from __future__ import annotations

import math

import numpy as np
import pytest

from gnomonic_grid import (PANEL_FRAMES, build_grid, cell_metrics_at, grid_summary, locate, location_label,
                           metric_field, neighbor_centre, panel_point, reference_angles)
from models import PANEL_IDS, GhostMode, GridIndexError, GridSpec, MappingKind, Staggering
from sphere_geometry import central_angle, interior_angle

C192_GEOMETRY = {
    # mapping: (area ratio, smallest-cell label, mid-edge chi (max, min))
    'equidistant': (5.142, 'corner', (1.414, 0.707)),
    'equiangular': (1.408, 'mid-edge', (1.414, 0.707)),
    'equi-edge': (2.299, 'corner', (1.061, 0.943)),
}


def test_panel_frames_are_right_handed() -> None:
    for normal, u, v in PANEL_FRAMES:
        np.testing.assert_array_equal(np.cross(u, v), normal)
    np.testing.assert_array_equal(PANEL_FRAMES[4], [[0, 0, 1], [0, 1, 0], [-1, 0, 0]])
    np.testing.assert_array_equal(PANEL_FRAMES[5], [[0, 0, -1], [0, 1, 0], [1, 0, 0]])


def test_panel_centres_lie_on_the_normals() -> None:
    spec = GridSpec(mapping='equiangular', ne=4, radius=2.0)
    for pid in PANEL_IDS:
        np.testing.assert_allclose(panel_point(spec, pid, 0.0, 0.0), 2.0 * PANEL_FRAMES[pid - 1, 0], atol=1e-15)


def test_adjacency_is_reciprocal(equiangular_c48) -> None:
    adjacency = equiangular_c48.adjacency
    assert adjacency[1] == {'west': 4, 'east': 2, 'south': 6, 'north': 5}
    for pid, sides in adjacency.items():
        assert sorted(sides.values()) == sorted(set(PANEL_IDS) - {pid, sides_opposite(pid)})
        for neighbour in sides.values():
            assert pid in adjacency[neighbour].values()


def sides_opposite(pid):
    return {1: 3, 2: 4, 3: 1, 4: 2, 5: 6, 6: 5}[pid]


@pytest.mark.parametrize('mapping', MappingKind.names())
def test_locate_inverts_panel_point(mapping) -> None:
    spec = GridSpec(mapping=mapping, ne=8)
    rng = np.random.default_rng(5)
    theta = rng.uniform(-0.95, 0.95, size=(2, 30)) * spec.theta_max
    for pid in PANEL_IDS:
        found, tx, ty = locate(spec, panel_point(spec, pid, theta[0], theta[1]))
        np.testing.assert_array_equal(found, pid)
        np.testing.assert_allclose(tx, theta[0], atol=1e-12)
        np.testing.assert_allclose(ty, theta[1], atol=1e-12)


def test_panels_share_edge_vertices(equi_edge_c48) -> None:
    vertices = equi_edge_c48.vertices
    radius = equi_edge_c48.spec.radius
    np.testing.assert_allclose(vertices[0, -1, :], vertices[1, 0, :], atol=1e-9 * radius)
    np.testing.assert_allclose(vertices[3, -1, :], vertices[0, 0, :], atol=1e-9 * radius)


@pytest.mark.parametrize('mapping', MappingKind.names())
def test_primary_cells_tile_the_sphere(mapping, grid_cache) -> None:
    grid = grid_cache(mapping, 48)
    area = metric_field(grid, Staggering.PRIMARY).area
    assert np.all(area > 0)
    assert np.sum(area) == pytest.approx(4 * math.pi * grid.spec.radius ** 2, rel=1e-9)


@pytest.mark.parametrize('mapping', list(C192_GEOMETRY))
def test_grid_summary_at_c192(mapping, grid_cache) -> None:
    ratio, smallest, chi_mid_edge = C192_GEOMETRY[mapping]
    summary = grid_summary(grid_cache(mapping, 192))
    assert summary.area_ratio == pytest.approx(ratio, abs=1e-3)
    assert summary.min_area_label == smallest
    assert summary.chi_mid_edge == pytest.approx(chi_mid_edge, abs=1e-3)
    assert summary.chi_corner == pytest.approx(1.0, abs=1e-12)
    assert summary.sin_alpha_corner == pytest.approx(0.866, abs=1e-3)
    assert summary.sin_alpha_mid_edge == pytest.approx(1.0, abs=1e-3)
    assert abs(summary.sphere_area_error) < 1e-9


def test_equiangular_area_ratio_approaches_root_two(grid_cache) -> None:
    ratios = [grid_summary(grid_cache('equiangular', ne)).area_ratio for ne in (9, 27, 81)]
    gaps = [abs(r - math.sqrt(2)) for r in ratios]
    assert gaps[0] > gaps[1] > gaps[2]


@pytest.mark.parametrize('stagger', Staggering.names())
@pytest.mark.parametrize('ghosts', GhostMode.names())
def test_cell_metrics_at_matches_metric_field(stagger, ghosts, grid_cache) -> None:
    grid = grid_cache('equi-edge', 6)
    field = metric_field(grid, stagger, ghosts)
    m = grid.size(stagger)
    for pid, i, j in [(1, 0, 0), (2, m - 1, 0), (5, m // 2, 0), (6, 2, 3), (3, m - 1, m - 1)]:
        cell = cell_metrics_at(grid, stagger, pid, i, j, ghosts)
        expected = field.at((pid - 1, i, j))
        for name in ('dx', 'dy', 'chi', 'alpha', 'area'):
            assert getattr(cell, name) == pytest.approx(getattr(expected, name), rel=1e-12)


def test_cell_metrics_at_rejects_out_of_range(equiangular_c48) -> None:
    with pytest.raises(GridIndexError):
        cell_metrics_at(equiangular_c48, Staggering.PRIMARY, 1, 48, 0)
    with pytest.raises(GridIndexError):
        cell_metrics_at(equiangular_c48, Staggering.OFFSET, 7, 0, 0)


def test_ghost_modes_agree_away_from_edges(equi_edge_c48) -> None:
    extended = metric_field(equi_edge_c48, Staggering.OFFSET, GhostMode.EXTENDED)
    adjacent = metric_field(equi_edge_c48, Staggering.OFFSET, GhostMode.ADJACENT)
    inner = (slice(None), slice(2, -2), slice(2, -2))
    np.testing.assert_array_equal(np.asarray(extended.area)[inner], np.asarray(adjacent.area)[inner])
    assert not np.allclose(np.asarray(extended.area)[:, 1:-1, 0], np.asarray(adjacent.area)[:, 1:-1, 0], rtol=1e-6)


def test_adjacent_cube_corner_uses_three_centres(equi_edge_c48) -> None:
    corner = cell_metrics_at(equi_edge_c48, Staggering.OFFSET, 1, 0, 0, GhostMode.ADJACENT)
    assert corner.alpha == pytest.approx(2 * math.pi / 3, abs=1e-9)
    assert corner.chi == pytest.approx(1.0, abs=1e-9)


def test_neighbor_centre_crosses_into_the_adjacent_panel(equiangular_c48) -> None:
    grid = equiangular_c48
    ne = grid.spec.ne
    pid, i, j, point = neighbor_centre(grid, 1, ne, 7)
    assert (pid, i, j) == (2, 0, 7)
    np.testing.assert_array_equal(point, grid.centres[1, 0, 7])
    pid, i, j, _ = neighbor_centre(grid, 1, -1, 7)
    assert (pid, i, j) == (4, ne - 1, 7)
    pid, _, _, point = neighbor_centre(grid, 1, 10, ne)
    assert pid == 5
    one_cell = 1.5 * grid.spec.d_theta
    assert central_angle(point, grid.centres[0, 10, ne - 1]) < one_cell
    with pytest.raises(GridIndexError):
        neighbor_centre(grid, 1, 3, 3)
    with pytest.raises(GridIndexError):
        neighbor_centre(grid, 1, -1, -1)


@pytest.mark.parametrize('stagger, i, j, label', [
    ('offset', 0, 0, 'corner'),
    ('offset', 4, 0, 'mid-edge'),
    ('offset', 2, 0, 'edge'),
    ('offset', 4, 4, 'centre'),
    ('offset', 2, 3, 'interior'),
    ('primary', 0, 0, 'corner'),
    ('primary', 3, 0, 'mid-edge'),
    ('primary', 7, 4, 'mid-edge'),
])
def test_location_label(stagger, i, j, label) -> None:
    assert location_label(8, stagger, i, j) == label


def test_build_grid_shapes() -> None:
    grid = build_grid(GridSpec(mapping='equidistant', ne=3, radius=1.0))
    assert grid.vertices.shape == (6, 4, 4, 3)
    assert grid.centres.shape == (6, 3, 3, 3)
    np.testing.assert_allclose(np.linalg.norm(grid.vertices, axis=-1), 1.0, atol=1e-15)
    lon, lat = grid.lonlat(Staggering.PRIMARY)
    assert lon.shape == (6, 3, 3)
    assert lat[4, 1, 1] == pytest.approx(math.pi / 2)


def test_reference_angles_at_two_cells() -> None:
    spec = GridSpec(mapping='equiangular', ne=2)
    np.testing.assert_allclose(reference_angles(spec, Staggering.OFFSET), [-math.pi / 4, 0.0, math.pi / 4],
                               atol=1e-15)
    np.testing.assert_allclose(reference_angles(spec, Staggering.PRIMARY), [-math.pi / 8, math.pi / 8], atol=1e-15)
    offset = reference_angles(GridSpec(mapping='equi-edge', ne=5), Staggering.OFFSET)
    assert offset[0] == -math.asin(1 / math.sqrt(3))
    assert offset[-1] == math.asin(1 / math.sqrt(3))


@pytest.mark.parametrize('mapping', MappingKind.names())
def test_panel_corners_and_edges_meet_the_cube(mapping) -> None:
    spec = GridSpec(mapping=mapping, ne=4)
    radius = spec.radius
    corner = panel_point(spec, 1, spec.theta_max, spec.theta_max)
    np.testing.assert_allclose(np.abs(corner), radius / math.sqrt(3), atol=1e-12 * radius)
    mid_edge = panel_point(spec, 1, spec.theta_max, 0.0)
    to_own = central_angle(mid_edge, panel_point(spec, 1, 0.0, 0.0))
    to_east = central_angle(mid_edge, panel_point(spec, 2, 0.0, 0.0))
    assert to_own == pytest.approx(to_east, abs=1e-14)
    assert to_own == pytest.approx(math.pi / 4, abs=1e-14)


@pytest.mark.parametrize('mapping', MappingKind.names())
def test_panel_corner_angle_is_two_thirds_pi(mapping, grid_cache) -> None:
    v = grid_cache(mapping, 24).vertices[0]
    assert interior_angle(v[1, 0], v[0, 0], v[0, 1]) == pytest.approx(2 * math.pi / 3, abs=1e-12)
    assert interior_angle(v[-1, -2], v[-1, -1], v[-2, -1]) == pytest.approx(2 * math.pi / 3, abs=1e-12)


@pytest.mark.parametrize('mapping', MappingKind.names())
def test_each_panel_covers_a_sixth_of_the_sphere(mapping, grid_cache) -> None:
    grid = grid_cache(mapping, 48)
    area = np.asarray(metric_field(grid, Staggering.PRIMARY).area)
    expected = 2 * math.pi * grid.spec.radius ** 2 / 3
    for slot in range(6):
        assert np.sum(area[slot]) == pytest.approx(expected, rel=1e-9)


@pytest.mark.parametrize('stagger', Staggering.names())
@pytest.mark.parametrize('mapping', MappingKind.names())
def test_panel_metrics_have_the_square_symmetries(mapping, stagger, grid_cache) -> None:
    metrics = metric_field(grid_cache(mapping, 24), stagger, panels=(1,))
    area, sin_alpha, chi = (np.asarray(getattr(metrics, name))[0] for name in ('area', 'sin_alpha', 'chi'))
    dx, dy = np.asarray(metrics.dx)[0], np.asarray(metrics.dy)[0]
    for values in (area, sin_alpha):
        np.testing.assert_allclose(values[::-1, :], values, rtol=1e-10)
        np.testing.assert_allclose(values[:, ::-1], values, rtol=1e-10)
        np.testing.assert_allclose(values.T, values, rtol=1e-10)
    np.testing.assert_allclose(chi[::-1, :], chi, rtol=1e-10)
    np.testing.assert_allclose(dx.T, dy, rtol=1e-10)
    np.testing.assert_allclose(chi * chi.T, 1.0, rtol=1e-10)
    np.testing.assert_allclose(np.diag(chi), 1.0, rtol=1e-10)
    np.testing.assert_allclose(np.diag(chi[::-1]), 1.0, rtol=1e-10)


@pytest.mark.parametrize('mapping', MappingKind.names())
def test_adjacent_ghosts_are_exact_neighbour_centres(mapping, grid_cache) -> None:
    grid = grid_cache(mapping, 8)
    spec = grid.spec
    ne = spec.ne
    centre_angles = reference_angles(spec, Staggering.PRIMARY)
    for a in range(ne):
        for (i, j), side in (((-1, a), 'west'), ((ne, a), 'east'), ((a, -1), 'south'), ((a, ne), 'north')):
            pid, ii, jj, point = neighbor_centre(grid, 1, i, j)
            assert pid == grid.adjacency[1][side]
            np.testing.assert_allclose(point, panel_point(spec, pid, centre_angles[ii], centre_angles[jj]),
                                       atol=1e-12 * spec.radius)
            found, tx, ty = locate(spec, point)
            assert found == pid
            assert tx == pytest.approx(centre_angles[ii], abs=1e-12)
            assert ty == pytest.approx(centre_angles[jj], abs=1e-12)


def test_two_cell_equiangular_grid_is_congruent() -> None:
    grid = build_grid(GridSpec(mapping='equiangular', ne=2, radius=1.0))
    assert grid.vertices.shape == (6, 3, 3, 3)
    assert grid.centres.shape == (6, 2, 2, 3)
    np.testing.assert_allclose(np.linalg.norm(grid.centres, axis=-1), 1.0, atol=1e-15)
    area = np.asarray(metric_field(grid, Staggering.PRIMARY).area).ravel()
    assert area.size == 24
    np.testing.assert_allclose(area, 4 * math.pi / 24, rtol=1e-12)
