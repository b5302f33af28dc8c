"""
Domain types shared by the grid, stability and simulation modules, plus the
JSON/CSV persistence used for reports.
"""

import csv
import json
import logging
import math
import os
import tempfile
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import numpy.typing as npt

from app import EARTH_RADIUS, TOOL_NAME, __version__

logger = logging.getLogger(__name__)

PANEL_IDS = (1, 2, 3, 4, 5, 6)

Scalar = Union[float, np.floating]
FloatArray = npt.NDArray[np.float64]
Location = Tuple[int, int, int]


# --- Errors ---

class CubeSphereError(Exception):
    """Base class for every error raised by this package."""


class GeometryError(CubeSphereError, ValueError):
    """Invalid geometric input such as a zero vector."""


class DegenerateEdgeError(GeometryError):
    """Edge endpoints are parallel or antiparallel, so the edge plane is undefined."""


class GridIndexError(CubeSphereError, IndexError):
    pass


class NoStableCoefficientError(CubeSphereError, ValueError):
    """The Laplacian coefficient alone already breaks the 2dx stability bound."""


class BracketError(CubeSphereError, RuntimeError):
    """A bisection bracket does not straddle the stable/unstable boundary."""


# --- Enumerations ---

class _Choice(Enum):
    """Enum parsed from user-facing names, with the valid list in the error."""

    @classmethod
    def names(cls) -> List[str]:
        return [member.value for member in cls]

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        text = str(value).strip().lower()
        for member in cls:
            if member.value == text:
                return member
        raise ValueError(f"unknown {cls.__name__} '{value}'; expected one of {', '.join(cls.names())}")


class MappingKind(_Choice):
    """Gnomonic mapping: each kind fixes theta_max and the beta(theta) rule.

    All three satisfy beta(theta_max) = 1, so the panel edge lands on the
    cube-face half-width a.
    """
    EQUIDISTANT = 'equidistant'
    EQUIANGULAR = 'equiangular'
    EQUI_EDGE = 'equi-edge'

    @property
    def theta_max(self) -> float:
        if self is MappingKind.EQUIDISTANT:
            return 1.0
        if self is MappingKind.EQUIANGULAR:
            return math.pi / 4
        return math.asin(1 / math.sqrt(3))

    def beta(self, theta):
        if self is MappingKind.EQUIDISTANT:
            return np.multiply(theta, 1.0)
        if self is MappingKind.EQUIANGULAR:
            return np.tan(theta)
        return math.sqrt(2) * np.tan(theta)

    def beta_inverse(self, b):
        if self is MappingKind.EQUIDISTANT:
            return np.multiply(b, 1.0)
        if self is MappingKind.EQUIANGULAR:
            return np.arctan(b)
        return np.arctan(np.divide(b, math.sqrt(2)))


class Staggering(_Choice):
    PRIMARY = 'primary'
    OFFSET = 'offset'


class OperatorKind(_Choice):
    PSEUDO = 'pseudo'
    FULL = 'full'


class GhostMode(_Choice):
    """Where offset cells on a panel edge take their outer corners from."""
    EXTENDED = 'extended'
    ADJACENT = 'adjacent'


class OperatorForm(_Choice):
    FROZEN = 'frozen'
    FLUX = 'flux'


# --- Value types ---

@dataclass(frozen=True)
class GridSpec:
    mapping: MappingKind
    ne: int
    radius: float = EARTH_RADIUS

    def __post_init__(self):
        object.__setattr__(self, 'mapping', MappingKind.parse(self.mapping))
        if isinstance(self.ne, bool) or int(self.ne) != self.ne:
            raise ValueError(f"ne must be an integer, got {self.ne!r}")
        object.__setattr__(self, 'ne', int(self.ne))
        if self.ne < 2:
            raise ValueError(f"ne must be at least 2, got {self.ne}")
        if not self.radius > 0:
            raise ValueError(f"radius must be positive, got {self.radius}")

    @property
    def theta_max(self) -> float:
        return self.mapping.theta_max

    @property
    def d_theta(self) -> float:
        return 2 * self.mapping.theta_max / self.ne

    @property
    def a(self) -> float:
        """Half-width of the reference cube inscribed in the sphere."""
        return self.radius / math.sqrt(3)

    @property
    def label(self) -> str:
        return f"C{self.ne}"

    def to_dict(self):
        return {
            'mapping': self.mapping.value,
            'ne': self.ne,
            'radius': self.radius,
        }


@dataclass(frozen=True)
class CellMetrics:
    """Metric terms of one cell, or of a whole lattice when the fields are arrays.

    dy is stored as chi * dx so the two always agree exactly.
    """
    dx: Union[Scalar, FloatArray]
    dy: Union[Scalar, FloatArray]
    chi: Union[Scalar, FloatArray]
    alpha: Union[Scalar, FloatArray]
    sin_alpha: Union[Scalar, FloatArray]
    area: Union[Scalar, FloatArray]

    @classmethod
    def from_lengths(cls, dx, dy, alpha, area):
        chi = np.divide(dy, dx)
        return cls(dx=dx, dy=chi * dx, chi=chi, alpha=alpha, sin_alpha=np.sin(alpha), area=area)

    @classmethod
    def frozen(cls, chi=1.0, alpha=math.pi / 2, area=1.0, dx=1.0):
        """Uniform metrics for a synthetic patch."""
        if not chi > 0:
            raise ValueError(f"chi must be positive, got {chi}")
        if not 0 < alpha < math.pi:
            raise ValueError(f"alpha must lie in (0, pi), got {alpha}")
        if not area > 0:
            raise ValueError(f"area must be positive, got {area}")
        if not dx > 0:
            raise ValueError(f"dx must be positive, got {dx}")
        return cls(dx=float(dx), dy=float(chi * dx), chi=float(chi), alpha=float(alpha),
                   sin_alpha=math.sin(alpha), area=float(area))

    @property
    def cos_alpha(self):
        return np.cos(self.alpha)

    @property
    def shape(self) -> Tuple[int, ...]:
        return np.shape(self.area)

    @property
    def is_uniform(self) -> bool:
        return self.shape == ()

    def at(self, index) -> 'CellMetrics':
        """Pick the metrics of a single cell out of a lattice."""
        def pick(values):
            return float(np.asarray(values)[index])
        return CellMetrics(dx=pick(self.dx), dy=pick(self.dy), chi=pick(self.chi),
                           alpha=pick(self.alpha), sin_alpha=pick(self.sin_alpha), area=pick(self.area))

    def to_dict(self):
        return {
            'dx': self.dx,
            'dy': self.dy,
            'chi': self.chi,
            'alpha': self.alpha,
            'sin_alpha': self.sin_alpha,
            'area': self.area,
        }


@dataclass(frozen=True)
class DampingSpec:
    q: int
    coef: float
    operator: OperatorKind = OperatorKind.PSEUDO
    coef2: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, 'operator', OperatorKind.parse(self.operator))
        if isinstance(self.q, bool) or int(self.q) != self.q or self.q < 1:
            raise ValueError(f"order q must be a positive integer, got {self.q!r}")
        object.__setattr__(self, 'q', int(self.q))
        if not self.coef >= 0:
            raise ValueError(f"coef must be non-negative, got {self.coef}")
        if not self.coef2 >= 0:
            raise ValueError(f"coef2 must be non-negative, got {self.coef2}")

    @property
    def order(self) -> int:
        return 2 * self.q

    def to_dict(self):
        return {
            'q': self.q,
            'order': self.order,
            'coef': self.coef,
            'coef2': self.coef2,
            'operator': self.operator.value,
        }


@dataclass(frozen=True)
class WaveNumber:
    k_dx: float
    l_dy: float

    def __post_init__(self):
        for name in ('k_dx', 'l_dy'):
            value = getattr(self, name)
            if not 0 <= value <= math.pi:
                raise ValueError(f"{name} must lie in [0, pi], got {value}")

    @classmethod
    def two_dx(cls) -> 'WaveNumber':
        return cls(math.pi, math.pi)


@dataclass
class StabilityField:
    """A per-point quantity over the panels of one staggering.

    values has shape (len(panels), n, n); locations are reported as
    (panel_id, i, j) with the first occurrence in C order winning ties.
    """
    values: FloatArray
    stagger: Staggering
    quantity: str
    panels: Tuple[int, ...] = PANEL_IDS

    def _location(self, flat_index) -> Location:
        p, i, j = np.unravel_index(flat_index, self.values.shape)
        return (self.panels[int(p)], int(i), int(j))

    @property
    def minimum(self) -> float:
        return float(np.min(self.values))

    @property
    def maximum(self) -> float:
        return float(np.max(self.values))

    @property
    def argmin(self) -> Location:
        return self._location(np.argmin(self.values))

    @property
    def argmax(self) -> Location:
        return self._location(np.argmax(self.values))

    def panel(self, panel_id: int) -> FloatArray:
        return self.values[self.panels.index(panel_id)]

    def to_dict(self):
        return {
            'quantity': self.quantity,
            'stagger': self.stagger.value,
            'min': self.minimum,
            'argmin': list(self.argmin),
            'max': self.maximum,
            'argmax': list(self.argmax),
            'spread': self.maximum - self.minimum,
        }


class ReportDocument:
    """Metadata block plus a payload; the metadata echoes the full input config."""

    def __init__(self, command: str, config: Dict, payload):
        self.command = command
        self.config = config
        self.payload = payload

    def to_dict(self):
        return {
            'metadata': {
                'tool': TOOL_NAME,
                'version': __version__,
                'command': self.command,
                'config': self.config,
            },
            'payload': self.payload,
        }


# --- Helper for JSON serialization ---

class CustomEncoder(json.JSONEncoder):
    """Custom JSON encoder to handle numpy values, enums and objects with to_dict."""
    def default(self, obj):
        if isinstance(obj, np.bool_):
            return bool(obj)
        if isinstance(obj, np.integer):
            return int(obj)
        if isinstance(obj, np.floating):
            return float(obj)
        if isinstance(obj, np.ndarray):
            return obj.tolist()
        if isinstance(obj, Enum):
            return obj.value
        if hasattr(obj, 'to_dict'):
            return obj.to_dict()
        return json.JSONEncoder.default(self, obj)


def format_number(value) -> str:
    """Shortest round-trip text for a CSV cell."""
    if isinstance(value, (bool, np.bool_)):
        return 'true' if value else 'false'
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _atomic_write(path, write, mode='w'):
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp_path = tempfile.mkstemp(dir=directory, prefix='.tmp-', suffix='-' + os.path.basename(path))
    try:
        with os.fdopen(fd, mode, newline='', encoding='utf-8') as f:
            write(f)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise


def save_report(document: ReportDocument, path) -> None:
    def write(f):
        json.dump(document, f, cls=CustomEncoder, indent=2, sort_keys=True)
        f.write('\n')
    _atomic_write(path, write)
    logger.info(f"💾 Report saved to {path}")


def load_report(path) -> Dict:
    with open(path, 'r', encoding='utf-8') as f:
        return json.load(f)


def save_csv(path, header: List[str], rows) -> int:
    """Write rows atomically; returns the number of data rows."""
    count = 0

    def write(f):
        nonlocal count
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_number(value) for value in row])
            count += 1
    _atomic_write(path, write)
    logger.info(f"💾 {count} rows saved to {path}")
    return count


def parse_location(text: Optional[str]) -> Optional[Location]:
    """Parse 'panel,i,j'; None or 'argmin' means the grid's argmin cell."""
    if text is None or str(text).strip().lower() == 'argmin':
        return None
    parts = [p.strip() for p in str(text).split(',')]
    if len(parts) != 3:
        raise ValueError(f"location must be 'argmin' or 'panel,i,j', got '{text}'")
    try:
        panel_id, i, j = (int(p) for p in parts)
    except ValueError:
        raise ValueError(f"location must hold three integers, got '{text}'") from None
    if panel_id not in PANEL_IDS:
        raise ValueError(f"panel id must be one of {PANEL_IDS}, got {panel_id}")
    return (panel_id, i, j)
