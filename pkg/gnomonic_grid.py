"""
Gnomonic cubed-sphere lattices and their cell metrics.

The panelization is:
```
          +---+
          | 5 |
      +---+---+---+---+
      | 4 | 1 | 2 | 3 |
      +---+---+---+---+
          | 6 |
          +---+
```
Panel 1 is P1 = (a, xi, eta) and faces +X; panels 2-4 follow by successive 90
degree rotations about Z, panel 5 (top) and 6 (bottom) by -90 and +90 degree
rotations about Y. Each panel's local +x runs along its u axis and +y along
its v axis, so panel 1's east neighbour is 2 and its north neighbour is 5.

Lattice arrays are indexed [panel - 1, i, j, :] with i along x and j along y.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from models import (PANEL_IDS, CellMetrics, GhostMode, GridIndexError, GridSpec, Location,
                    Staggering)
from sphere_geometry import (cart_to_lonlat, central_angle, interior_angle, normalize,
                             quad_interior_angles, rotation_matrix, triangle_area)

logger = logging.getLogger(__name__)

_Z_AXIS = (0.0, 0.0, 1.0)
_Y_AXIS = (0.0, 1.0, 0.0)
_PANEL_ROTATIONS = {
    1: (_Z_AXIS, 0.0),
    2: (_Z_AXIS, math.pi / 2),
    3: (_Z_AXIS, math.pi),
    4: (_Z_AXIS, 3 * math.pi / 2),
    5: (_Y_AXIS, -math.pi / 2),
    6: (_Y_AXIS, math.pi / 2),
}

SIDES = {
    'west': (-1, 0),
    'east': (1, 0),
    'south': (0, -1),
    'north': (0, 1),
}

# a centre-index ring point beyond an edge is looked up a quarter cell past it
_REACH_DEPTH = 0.25
# in area-equivalent terms the three-centre corner triangle covers 3/8 of a cell
_CORNER_TRIANGLE_SCALE = 8.0 / 3.0


def _panel_frame(panel_id):
    """Rows (normal, u, v) of a panel; axis-aligned, so rounding is exact."""
    axis, angle = _PANEL_ROTATIONS[panel_id]
    return np.rint(np.eye(3) @ rotation_matrix(axis, angle).T) + 0.0


PANEL_FRAMES = np.stack([_panel_frame(pid) for pid in PANEL_IDS])


def _check_panel(panel_id):
    if panel_id not in PANEL_IDS:
        raise GridIndexError(f"panel id must be one of {PANEL_IDS}, got {panel_id}")


def lattice_size(spec: GridSpec, stagger: Staggering) -> int:
    return spec.ne if Staggering.parse(stagger) is Staggering.PRIMARY else spec.ne + 1


def reference_angles(spec: GridSpec, stagger: Staggering):
    """Reference angles of the cell-centre points of a staggering.

    Primary centres sit at -theta_max + (i - 0.5) dtheta for i = 1..Ne; offset
    centres are the primary vertices -theta_max + (i - 1) dtheta for
    i = 1..Ne+1, with the endpoints exactly +-theta_max.
    """
    stagger = Staggering.parse(stagger)
    if stagger is Staggering.PRIMARY:
        return -spec.theta_max + (np.arange(spec.ne) + 0.5) * spec.d_theta
    return np.linspace(-spec.theta_max, spec.theta_max, spec.ne + 1)


def extended_centre_angles(spec: GridSpec):
    """Primary centre angles with one ghost centre past each panel edge."""
    return -spec.theta_max + (np.arange(-1, spec.ne + 1) + 0.5) * spec.d_theta


def panel_point(spec: GridSpec, panel_id: int, theta_x, theta_y):
    """Project reference angles of one panel onto the sphere.

    Angles slightly beyond theta_max continue the panel's own coordinates,
    which is how edge cells get ghost corners.
    """
    _check_panel(panel_id)
    normal, u, v = PANEL_FRAMES[panel_id - 1]
    xi = spec.a * np.asarray(spec.mapping.beta(theta_x))
    eta = spec.a * np.asarray(spec.mapping.beta(theta_y))
    cube = spec.a * normal + xi[..., None] * u + eta[..., None] * v
    return normalize(cube, spec.radius)


def _lattice(spec, panel_id, angles):
    theta_x, theta_y = np.meshgrid(angles, angles, indexing='ij')
    return panel_point(spec, panel_id, theta_x, theta_y)


def locate(spec: GridSpec, p):
    """Inverse mapping: (panel_id, theta_x, theta_y) of a point on the sphere.

    The panel is the one whose normal has the largest projection on p, lowest
    id first on ties.
    """
    p = np.asarray(p, dtype=float)
    projections = p @ PANEL_FRAMES[:, 0, :].T
    index = np.argmax(projections, axis=-1)
    normal, u, v = (PANEL_FRAMES[index, row] for row in range(3))
    along_normal = np.sum(p * normal, axis=-1)
    theta_x = spec.mapping.beta_inverse(np.sum(p * u, axis=-1) / along_normal)
    theta_y = spec.mapping.beta_inverse(np.sum(p * v, axis=-1) / along_normal)
    panel_id = np.asarray(index + 1)[()]
    return panel_id, np.asarray(theta_x)[()], np.asarray(theta_y)[()]


def _cell_index(spec, theta):
    index = int(math.floor((float(theta) + spec.theta_max) / spec.d_theta))
    return min(max(index, 0), spec.ne - 1)


@dataclass
class PanelGrid:
    spec: GridSpec
    vertices: np.ndarray  # (6, ne+1, ne+1, 3); also the offset cell centres
    centres: np.ndarray   # (6, ne, ne, 3)
    adjacency: Dict[int, Dict[str, int]]

    def points(self, stagger: Staggering):
        if Staggering.parse(stagger) is Staggering.PRIMARY:
            return self.centres
        return self.vertices

    def size(self, stagger: Staggering) -> int:
        return lattice_size(self.spec, stagger)

    def lonlat(self, stagger: Staggering):
        return cart_to_lonlat(self.points(stagger))


def _panel_neighbours(spec, panel_id):
    reach = spec.theta_max + _REACH_DEPTH * spec.d_theta
    neighbours = {}
    for side, (sx, sy) in SIDES.items():
        found, _, _ = locate(spec, panel_point(spec, panel_id, sx * reach, sy * reach))
        neighbours[side] = int(found)
    return neighbours


def build_grid(spec: GridSpec) -> PanelGrid:
    centre_angles = reference_angles(spec, Staggering.PRIMARY)
    vertex_angles = reference_angles(spec, Staggering.OFFSET)
    vertices = np.stack([_lattice(spec, pid, vertex_angles) for pid in PANEL_IDS])
    centres = np.stack([_lattice(spec, pid, centre_angles) for pid in PANEL_IDS])
    adjacency = {pid: _panel_neighbours(spec, pid) for pid in PANEL_IDS}
    logger.info(f"🧊 Built {spec.mapping.value} {spec.label} grid: "
                f"{centres.shape[0] * spec.ne ** 2} primary cells, {vertices.shape[0] * (spec.ne + 1) ** 2} offset points")
    return PanelGrid(spec=spec, vertices=vertices, centres=centres, adjacency=adjacency)


def _side_of(spec, i, j):
    ne = spec.ne
    if i < 0:
        return 'west'
    if i >= ne:
        return 'east'
    if j < 0:
        return 'south'
    return 'north'


def neighbor_centre(grid: PanelGrid, panel_id: int, i: int, j: int):
    """Resolve a ghost centre index to the neighbour panel's own cell centre.

    (i, j) is a primary centre index with exactly one coordinate in {-1, Ne}.
    The neighbour cell is the one containing a sample point a quarter cell
    beyond the edge at the centre's along-edge angle. Returns
    (panel_id, i, j, point) on the neighbour.
    """
    _check_panel(panel_id)
    spec = grid.spec
    ne = spec.ne
    outside = [not 0 <= i < ne, not 0 <= j < ne]
    if not (-1 <= i <= ne and -1 <= j <= ne) or outside.count(True) != 1:
        raise GridIndexError(f"({i}, {j}) is not a ghost centre beside a single panel edge")
    reach = spec.theta_max + _REACH_DEPTH * spec.d_theta
    theta = extended_centre_angles(spec)
    theta_x = math.copysign(reach, i - ne / 2) if outside[0] else theta[i + 1]
    theta_y = math.copysign(reach, j - ne / 2) if outside[1] else theta[j + 1]
    found, found_x, found_y = locate(spec, panel_point(spec, panel_id, theta_x, theta_y))
    found = int(found)
    expected = grid.adjacency[panel_id][_side_of(spec, i, j)]
    if found != expected:
        logger.warning(f"[neighbor_centre] lookup for panel {panel_id} ({i}, {j}) landed on panel {found}, "
                       f"adjacency says {expected}")
    ii, jj = _cell_index(spec, found_x), _cell_index(spec, found_y)
    return found, ii, jj, grid.centres[found - 1, ii, jj]


# --- Cell metrics ---

def _quad_metrics(p1, p2, p3, p4, radius):
    """Metrics of quads with corners SW, SE, NE, NW.

    Each corner angle is measured between the local +x and +y grid directions:
    the interior angle at SW and NE, its supplement at SE and NW. Their mean
    gives alpha; the interior angles themselves give the spherical excess.
    """
    dx = 0.5 * radius * (central_angle(p1, p2) + central_angle(p4, p3))
    dy = 0.5 * radius * (central_angle(p1, p4) + central_angle(p2, p3))
    a1, a2, a3, a4 = quad_interior_angles(p1, p2, p3, p4)
    area = radius ** 2 * (a1 + a2 + a3 + a4 - 2 * math.pi)
    alpha = 0.25 * (a1 + (math.pi - a2) + a3 + (math.pi - a4))
    return CellMetrics.from_lengths(dx, dy, alpha, area)


def _corner_cell_metrics(grid, panel_id, i, j):
    """Three-centre metrics of an offset point sitting on a cube corner."""
    spec = grid.spec
    ne = spec.ne
    ci = 0 if i == 0 else ne - 1
    cj = 0 if j == 0 else ne - 1
    vertex = grid.vertices[panel_id - 1, i, j]
    own = grid.centres[panel_id - 1, ci, cj]
    across_x = neighbor_centre(grid, panel_id, -1 if i == 0 else ne, cj)[3]
    across_y = neighbor_centre(grid, panel_id, ci, -1 if j == 0 else ne)[3]
    alpha = (interior_angle(own, vertex, across_x) + interior_angle(across_x, vertex, across_y)
             + interior_angle(across_y, vertex, own)) / 3
    dx = spec.radius * central_angle(own, across_x)
    dy = spec.radius * central_angle(own, across_y)
    area = _CORNER_TRIANGLE_SCALE * triangle_area(own, across_x, across_y, spec.radius)
    return CellMetrics.from_lengths(float(dx), float(dy), float(alpha), float(area))


def _is_cube_corner(ne, i, j):
    return i in (0, ne) and j in (0, ne)


def _ghost_point(grid, panel_id, ci, cj, ghosts):
    """Corner point of an offset cell, by primary centre index in [-1, Ne]."""
    spec = grid.spec
    ne = spec.ne
    if 0 <= ci < ne and 0 <= cj < ne:
        return grid.centres[panel_id - 1, ci, cj]
    if ghosts is GhostMode.EXTENDED:
        theta = extended_centre_angles(spec)
        return panel_point(spec, panel_id, theta[ci + 1], theta[cj + 1])
    return neighbor_centre(grid, panel_id, ci, cj)[3]


def _corner_lattice(grid, stagger, ghosts, panels):
    """Cell-corner lattice (len(panels), m+1, m+1, 3) for m cells per side."""
    spec = grid.spec
    if stagger is Staggering.PRIMARY:
        return grid.vertices[[pid - 1 for pid in panels]]
    theta = extended_centre_angles(spec)
    corners = np.stack([_lattice(spec, pid, theta) for pid in panels])
    if ghosts is GhostMode.ADJACENT:
        ne = spec.ne
        for slot, pid in enumerate(panels):
            corners[slot, 1:-1, 1:-1] = grid.centres[pid - 1]
            for a in range(ne):
                for ci, cj in ((-1, a), (ne, a), (a, -1), (a, ne)):
                    corners[slot, ci + 1, cj + 1] = neighbor_centre(grid, pid, ci, cj)[3]
    return corners


def cell_metrics_at(grid: PanelGrid, stagger: Staggering, panel_id: int, i: int, j: int,
                    ghosts: GhostMode = GhostMode.EXTENDED) -> CellMetrics:
    """Metrics of the cell centred on point (i, j) of a staggering.

    Primary cells are bounded by their four vertices; offset cells by the four
    surrounding primary centres, with ghost centres past the panel edge taken
    as set by ``ghosts``.
    """
    stagger = Staggering.parse(stagger)
    ghosts = GhostMode.parse(ghosts)
    _check_panel(panel_id)
    m = grid.size(stagger)
    if not (0 <= i < m and 0 <= j < m):
        raise GridIndexError(f"cell ({i}, {j}) outside the {m}x{m} {stagger.value} lattice")
    spec = grid.spec
    if stagger is Staggering.PRIMARY:
        v = grid.vertices[panel_id - 1]
        return _quad_metrics(v[i, j], v[i + 1, j], v[i + 1, j + 1], v[i, j + 1], spec.radius)
    if ghosts is GhostMode.ADJACENT and _is_cube_corner(spec.ne, i, j):
        return _corner_cell_metrics(grid, panel_id, i, j)
    corners = [_ghost_point(grid, panel_id, i - 1 + di, j - 1 + dj, ghosts)
               for di, dj in ((0, 0), (1, 0), (1, 1), (0, 1))]
    metrics = _quad_metrics(*corners, spec.radius)
    return metrics.at(())


def metric_field(grid: PanelGrid, stagger: Staggering, ghosts: GhostMode = GhostMode.EXTENDED,
                 panels: Tuple[int, ...] = PANEL_IDS) -> CellMetrics:
    """Metrics of every point of a staggering, as arrays of shape (len(panels), m, m)."""
    stagger = Staggering.parse(stagger)
    ghosts = GhostMode.parse(ghosts)
    for pid in panels:
        _check_panel(pid)
    corners = _corner_lattice(grid, stagger, ghosts, panels)
    metrics = _quad_metrics(corners[:, :-1, :-1], corners[:, 1:, :-1], corners[:, 1:, 1:],
                            corners[:, :-1, 1:], grid.spec.radius)
    if stagger is Staggering.OFFSET and ghosts is GhostMode.ADJACENT:
        fields = {name: np.array(getattr(metrics, name)) for name in ('dx', 'dy', 'chi', 'alpha', 'sin_alpha', 'area')}
        ne = grid.spec.ne
        for slot, pid in enumerate(panels):
            for i in (0, ne):
                for j in (0, ne):
                    corner = _corner_cell_metrics(grid, pid, i, j)
                    for name, values in fields.items():
                        values[slot, i, j] = getattr(corner, name)
        metrics = CellMetrics(**fields)
    logger.debug(f"Evaluated {stagger.value} metrics on {len(panels)} panel(s) of {grid.spec.label}")
    return metrics


def location_label(ne: int, stagger: Staggering, i: int, j: int) -> str:
    """Name the part of the panel a point belongs to, within one cell."""
    offset = 0.5 if Staggering.parse(stagger) is Staggering.PRIMARY else 0.0
    x, y = i + offset, j + offset
    to_edge_x, to_edge_y = min(x, ne - x), min(y, ne - y)
    to_mid_x, to_mid_y = abs(x - ne / 2), abs(y - ne / 2)
    near = 1.0 + 1e-9
    if to_edge_x <= near and to_edge_y <= near:
        return 'corner'
    if (to_edge_x <= near and to_mid_y <= near) or (to_edge_y <= near and to_mid_x <= near):
        return 'mid-edge'
    if to_edge_x <= near or to_edge_y <= near:
        return 'edge'
    if to_mid_x <= near and to_mid_y <= near:
        return 'centre'
    return 'interior'


@dataclass
class GridSummary:
    spec: GridSpec
    ghosts: GhostMode
    max_area: float
    max_area_location: Location
    min_area: float
    min_area_location: Location
    area_ratio: float
    total_area: float
    chi_corner: float
    chi_mid_edge: Tuple[float, float]
    sin_alpha_corner: float
    sin_alpha_mid_edge: float

    @property
    def max_area_label(self) -> str:
        _, i, j = self.max_area_location
        return location_label(self.spec.ne, Staggering.PRIMARY, i, j)

    @property
    def min_area_label(self) -> str:
        _, i, j = self.min_area_location
        return location_label(self.spec.ne, Staggering.PRIMARY, i, j)

    @property
    def sphere_area_error(self) -> float:
        return self.total_area / (4 * math.pi * self.spec.radius ** 2) - 1

    def to_dict(self):
        return {
            'grid': self.spec.to_dict(),
            'ghosts': self.ghosts.value,
            'max_area_m2': self.max_area,
            'max_area_location': list(self.max_area_location),
            'max_area_label': self.max_area_label,
            'min_area_m2': self.min_area,
            'min_area_location': list(self.min_area_location),
            'min_area_label': self.min_area_label,
            'area_ratio': self.area_ratio,
            'total_area_m2': self.total_area,
            'sphere_area_error': self.sphere_area_error,
            'chi_corner': self.chi_corner,
            'chi_mid_edge': list(self.chi_mid_edge),
            'sin_alpha_corner': self.sin_alpha_corner,
            'sin_alpha_mid_edge': self.sin_alpha_mid_edge,
        }


def _first_location(values, reducer):
    p, i, j = np.unravel_index(reducer(values), values.shape)
    return (int(p) + 1, int(i), int(j))


def grid_summary(grid: PanelGrid, ghosts: GhostMode = GhostMode.EXTENDED,
                 primary: Optional[CellMetrics] = None) -> GridSummary:
    """Area extrema of the primary cells plus corner and mid-edge offset samples."""
    ghosts = GhostMode.parse(ghosts)
    spec = grid.spec
    if primary is None:
        primary = metric_field(grid, Staggering.PRIMARY)
    area = np.asarray(primary.area)
    mid = spec.ne // 2
    corner = cell_metrics_at(grid, Staggering.OFFSET, 1, 0, 0, ghosts)
    south_mid = cell_metrics_at(grid, Staggering.OFFSET, 1, mid, 0, ghosts)
    west_mid = cell_metrics_at(grid, Staggering.OFFSET, 1, 0, mid, ghosts)
    chi_values = sorted((float(south_mid.chi), float(west_mid.chi)), reverse=True)
    summary = GridSummary(
        spec=spec,
        ghosts=ghosts,
        max_area=float(area.max()),
        max_area_location=_first_location(area, np.argmax),
        min_area=float(area.min()),
        min_area_location=_first_location(area, np.argmin),
        area_ratio=float(area.max() / area.min()),
        total_area=float(np.sum(area)),
        chi_corner=float(corner.chi),
        chi_mid_edge=(chi_values[0], chi_values[1]),
        sin_alpha_corner=float(corner.sin_alpha),
        sin_alpha_mid_edge=float(south_mid.sin_alpha),
    )
    logger.info(f"📐 {spec.mapping.value} {spec.label}: area ratio {summary.area_ratio:.4f}, "
                f"smallest cell at {summary.min_area_label}")
    return summary
