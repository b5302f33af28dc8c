"""
Explicit forward-Euler damping on a doubly periodic patch.

The damped scalar s (divergence or vorticity) is stepped with

    s <- s + (-1)^(q+1) (C dA_min)^q L^q s + C2 dA_min L s

where L is the discrete pseudo- or full Laplacian. The time step is absorbed
into the nondimensional coefficients. On a uniform patch every Fourier mode is
an eigenvector of L, so one step multiplies it by exactly the amplification
factor of the stability module.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from app import BLOWUP_FACTOR
from gnomonic_grid import PanelGrid, metric_field
from models import (BracketError, CellMetrics, DampingSpec, GhostMode, OperatorForm, OperatorKind,
                    Staggering)
from stability import grid_stability_function

logger = logging.getLogger(__name__)

# symmetric copies of the weakest cell agree to rounding; distinct cells differ far more
_TIE_TOLERANCE = 1e-9

# excesses over the analytic limit tried in turn by escalate_panel_run
EXCESS_LADDER = (0.002, 0.004, 0.008, 0.012, 0.02)


@dataclass(frozen=True)
class PatchConfig:
    nx: int
    ny: int
    metrics: CellMetrics  # one frozen cell, or arrays of shape (nx, ny)
    area_min: float
    operator: OperatorKind = OperatorKind.PSEUDO
    q: int = 1
    coef: float = 0.0
    coef2: float = 0.0
    n_steps: int = 200
    form: OperatorForm = OperatorForm.FROZEN
    blowup_factor: float = BLOWUP_FACTOR

    def __post_init__(self):
        object.__setattr__(self, 'operator', OperatorKind.parse(self.operator))
        object.__setattr__(self, 'form', OperatorForm.parse(self.form))
        if self.nx < 4 or self.ny < 4:
            raise ValueError(f"patch must be at least 4x4 to hold a 2dx wave, got {self.nx}x{self.ny}")
        if self.n_steps < 1:
            raise ValueError(f"n_steps must be positive, got {self.n_steps}")
        if not self.area_min > 0:
            raise ValueError(f"area_min must be positive, got {self.area_min}")
        if self.metrics.shape not in ((), (self.nx, self.ny)):
            raise ValueError(f"metrics of shape {self.metrics.shape} do not fit a {self.nx}x{self.ny} patch")
        if self.form is OperatorForm.FLUX and self.operator is OperatorKind.FULL:
            raise ValueError("the flux form is only defined for the pseudo-Laplacian")
        if not self.blowup_factor > 1:
            raise ValueError(f"blowup_factor must exceed 1, got {self.blowup_factor}")
        # validates q and the coefficients
        DampingSpec(q=self.q, coef=self.coef, operator=self.operator, coef2=self.coef2)

    @property
    def damping(self) -> DampingSpec:
        return DampingSpec(q=self.q, coef=self.coef, operator=self.operator, coef2=self.coef2)

    def with_coef(self, coef: float) -> 'PatchConfig':
        return replace(self, coef=coef)

    @cached_property
    def stencil(self) -> Dict[str, np.ndarray]:
        m = self.metrics
        chi = np.asarray(m.chi, dtype=float)
        sin_alpha = np.asarray(m.sin_alpha, dtype=float)
        area = np.asarray(m.area, dtype=float)
        if self.form is OperatorForm.FLUX:
            gx = chi * sin_alpha * np.ones((self.nx, self.ny))
            gy = sin_alpha / chi * np.ones((self.nx, self.ny))
            return {
                'x_face': 0.5 * (gx + np.roll(gx, -1, axis=0)),
                'y_face': 0.5 * (gy + np.roll(gy, -1, axis=1)),
                'inv_area': 1 / area,
            }
        if self.operator is OperatorKind.PSEUDO:
            return {'x': chi * sin_alpha / area, 'y': sin_alpha / (chi * area)}
        return {
            'x': chi / (sin_alpha * area),
            'y': 1 / (chi * sin_alpha * area),
            'xy': -np.cos(np.asarray(m.alpha, dtype=float)) / (sin_alpha * area),
        }

    def to_dict(self):
        return {
            'nx': self.nx,
            'ny': self.ny,
            'area_min': self.area_min,
            'operator': self.operator.value,
            'q': self.q,
            'coef': self.coef,
            'coef2': self.coef2,
            'n_steps': self.n_steps,
            'form': self.form.value,
            'blowup_factor': self.blowup_factor,
            'uniform': self.metrics.is_uniform,
        }


@dataclass
class RunOutcome:
    stable: bool
    growth_per_step: float
    argmax: Tuple[int, int]
    steps_taken: int
    initial_amplitude: float
    final_amplitude: float
    min_locations: List[Tuple[int, int]] = field(default_factory=list)
    distance_to_min: Optional[int] = None

    @property
    def classification(self) -> str:
        return 'stable' if self.stable else 'unstable'

    def to_dict(self):
        return {
            'classification': self.classification,
            'growth_per_step': self.growth_per_step,
            'argmax': list(self.argmax),
            'steps_taken': self.steps_taken,
            'initial_amplitude': self.initial_amplitude,
            'final_amplitude': self.final_amplitude,
            'min_locations': [list(loc) for loc in self.min_locations],
            'distance_to_min': self.distance_to_min,
        }


# --- Initial conditions ---

def checkerboard(nx: int, ny: int) -> np.ndarray:
    """The 2dx wave in both directions."""
    i, j = np.indices((nx, ny))
    return np.where((i + j) % 2 == 0, 1.0, -1.0)


def random_field(nx: int, ny: int, seed: int = 0) -> np.ndarray:
    return np.random.default_rng(seed).uniform(-1.0, 1.0, size=(nx, ny))


def fourier_mode(nx: int, ny: int, kx: int, ly: int) -> np.ndarray:
    """Complex lattice mode exp(i (2 pi kx i / nx + 2 pi ly j / ny))."""
    i, j = np.indices((nx, ny))
    return np.exp(2j * math.pi * (kx * i / nx + ly * j / ny))


def uniform_patch(metrics: CellMetrics, n: int = 8, area_min: Optional[float] = None, **options) -> PatchConfig:
    """An n x n patch frozen at one cell's metrics.

    area_min defaults to the cell's own area, i.e. the cell is the smallest one.
    """
    if area_min is None:
        area_min = float(metrics.area)
    return PatchConfig(nx=n, ny=n, metrics=metrics, area_min=area_min, **options)


# --- Operators ---

def _check_field(field_values, cfg):
    values = np.asarray(field_values)
    if values.shape != (cfg.nx, cfg.ny):
        raise ValueError(f"field of shape {values.shape} does not match the {cfg.nx}x{cfg.ny} patch")
    return values


def apply_operator(field_values, cfg: PatchConfig) -> np.ndarray:
    """One application of the discrete Laplacian with periodic wraparound.

    The full operator's cross derivatives use the equal average of the four
    corner evaluations, (s[i+1,j+1] - s[i+1,j-1] - s[i-1,j+1] + s[i-1,j-1]) / 4,
    for each of dx dy and dy dx.
    """
    s = _check_field(field_values, cfg)
    east, west = np.roll(s, -1, axis=0), np.roll(s, 1, axis=0)
    north, south = np.roll(s, -1, axis=1), np.roll(s, 1, axis=1)
    coeffs = cfg.stencil
    if cfg.form is OperatorForm.FLUX:
        flux_x = coeffs['x_face'] * (east - s)
        flux_y = coeffs['y_face'] * (north - s)
        divergence = (flux_x - np.roll(flux_x, 1, axis=0)) + (flux_y - np.roll(flux_y, 1, axis=1))
        return coeffs['inv_area'] * divergence
    out = coeffs['x'] * (east - 2 * s + west) + coeffs['y'] * (north - 2 * s + south)
    if 'xy' in coeffs:
        corners = (np.roll(east, -1, axis=1) - np.roll(east, 1, axis=1)
                   - np.roll(west, -1, axis=1) + np.roll(west, 1, axis=1))
        out = out + coeffs['xy'] * 0.5 * corners
    return out


def step(field_values, cfg: PatchConfig) -> np.ndarray:
    """One forward-Euler step of order-2q damping (plus the optional Laplacian term)."""
    s = _check_field(field_values, cfg)
    laplacian = apply_operator(s, cfg)
    power = laplacian
    for _ in range(cfg.q - 1):
        power = apply_operator(power, cfg)
    sign = 1 if cfg.q % 2 == 1 else -1
    out = s + sign * (cfg.coef * cfg.area_min) ** cfg.q * power
    if cfg.coef2:
        out = out + cfg.coef2 * cfg.area_min * laplacian
    return out


def _argmax(values) -> Tuple[int, int]:
    magnitude = np.where(np.isfinite(values), np.abs(values), np.inf)
    i, j = np.unravel_index(np.argmax(magnitude), magnitude.shape)
    return int(i), int(j)


def run(cfg: PatchConfig, initial) -> RunOutcome:
    """Step until n_steps or until max|s| passes blowup_factor times its start."""
    s = np.array(_check_field(initial, cfg), dtype=float)
    initial_amplitude = float(np.max(np.abs(s)))
    if initial_amplitude == 0 or not math.isfinite(initial_amplitude):
        raise ValueError("initial field must be finite and not identically zero")
    threshold = cfg.blowup_factor * initial_amplitude
    amplitude = initial_amplitude
    steps_taken = 0
    stable = True
    with np.errstate(over='ignore', invalid='ignore'):
        for n in range(1, cfg.n_steps + 1):
            s = step(s, cfg)
            steps_taken = n
            amplitude = float(np.max(np.abs(s)))
            if not math.isfinite(amplitude) or amplitude > threshold:
                stable = False
                break
    if math.isfinite(amplitude):
        growth = (amplitude / initial_amplitude) ** (1 / steps_taken)
    else:
        growth = math.inf
    outcome = RunOutcome(stable=stable, growth_per_step=growth, argmax=_argmax(s), steps_taken=steps_taken,
                         initial_amplitude=initial_amplitude, final_amplitude=amplitude)
    logger.debug(f"[run] q={cfg.q} C={cfg.coef:.6g}: {outcome.classification} after {steps_taken} steps, "
                 f"growth {growth:.6g}")
    return outcome


def stability_scan(cfg: PatchConfig, coefs: Sequence[float], initial) -> List[Tuple[float, RunOutcome]]:
    return [(c, run(cfg.with_coef(c), initial)) for c in coefs]


def empirical_threshold(template: PatchConfig, bracket: Tuple[float, float], tol: float,
                        initial=None) -> float:
    """Bisect the coefficient between a stable and an unstable run.

    The returned midpoint is within tol of the classification boundary.
    """
    lo, hi = bracket
    if not 0 <= lo < hi:
        raise ValueError(f"bracket must satisfy 0 <= lo < hi, got {bracket}")
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")
    if initial is None:
        initial = random_field(template.nx, template.ny, seed=0)
    if not run(template.with_coef(lo), initial).stable:
        raise BracketError(f"lower bracket C={lo} is already unstable")
    if run(template.with_coef(hi), initial).stable:
        raise BracketError(f"upper bracket C={hi} is still stable after {template.n_steps} steps")
    trials = 0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if run(template.with_coef(mid), initial).stable:
            lo = mid
        else:
            hi = mid
        trials += 1
    threshold = 0.5 * (lo + hi)
    logger.info(f"🔎 Bisection settled at C={threshold:.6f} after {trials} trials (q={template.q})")
    return threshold


def _periodic_distance(a, b, shape):
    d = []
    for x, y, n in zip(a, b, shape):
        gap = abs(x - y) % n
        d.append(min(gap, n - gap))
    return max(d)


def panel_run(grid: PanelGrid, stagger: Staggering, spec: DampingSpec, n_steps: int, seed: int = 0,
              ghosts: GhostMode = GhostMode.EXTENDED, amplitude: float = 1e-3,
              form: OperatorForm = OperatorForm.FROZEN, blowup_factor: float = BLOWUP_FACTOR) -> RunOutcome:
    """Damp seeded noise on panel 1 with per-cell metrics and periodic wrap.

    The outcome lists every cell tied for the weakest stability function and
    the periodic Chebyshev distance from the final argmax to the nearest one.
    """
    stagger = Staggering.parse(stagger)
    everywhere = metric_field(grid, stagger, ghosts)
    area_min = float(np.min(everywhere.area))
    panel = CellMetrics(**{name: np.asarray(getattr(everywhere, name))[0]
                           for name in ('dx', 'dy', 'chi', 'alpha', 'sin_alpha', 'area')})
    m = grid.size(stagger)
    psi = np.asarray(grid_stability_function(panel, area_min, spec.operator))
    weakest = float(psi.min())
    min_locations = [(int(i), int(j)) for i, j in np.argwhere(psi <= weakest * (1 + _TIE_TOLERANCE))]
    cfg = PatchConfig(nx=m, ny=m, metrics=panel, area_min=area_min, operator=spec.operator, q=spec.q,
                      coef=spec.coef, coef2=spec.coef2, n_steps=n_steps, form=form, blowup_factor=blowup_factor)
    logger.info(f"🌀 Panel run on {grid.spec.mapping.value} {grid.spec.label} {stagger.value}: "
                f"q={spec.q} C={spec.coef:.6f}, weakest Psi={weakest:.6f} at {len(min_locations)} cell(s)")
    outcome = run(cfg, amplitude * random_field(m, m, seed))
    outcome.min_locations = min_locations
    outcome.distance_to_min = min(_periodic_distance(outcome.argmax, loc, (m, m)) for loc in min_locations)
    return outcome


@dataclass
class Escalation:
    limit: float
    excess: Optional[float]  # first excess that blew up; None if every run stayed bounded
    outcome: RunOutcome      # that run, or the last one tried
    attempts: List[Tuple[float, RunOutcome]] = field(default_factory=list)

    @property
    def blew_up(self) -> bool:
        return self.excess is not None

    def to_dict(self):
        return {
            'limit': self.limit,
            'excess': self.excess,
            'blew_up': self.blew_up,
            'attempts': [{'excess': excess, 'classification': outcome.classification,
                          'steps_taken': outcome.steps_taken, 'growth_per_step': outcome.growth_per_step}
                         for excess, outcome in self.attempts],
        }


def escalate_panel_run(grid: PanelGrid, stagger: Staggering, spec: DampingSpec, limit: float, n_steps: int,
                       excesses: Sequence[float] = EXCESS_LADDER, **options) -> Escalation:
    """Run panel_run at limit + excess for each excess in turn, stopping at the first blow-up.

    On a whole panel the unstable 2dx mode is confined to the few cells where
    Psi~ is lowest, and Psi~ climbs about 2% per cell away from them, so the
    operator grows far more slowly than the frozen weakest cell predicts. Just
    above the limit a run can stay bounded for thousands of steps; the ladder
    finds the smallest excess whose blow-up location can be read off.
    """
    if not excesses:
        raise ValueError("at least one excess is needed")
    attempts = []
    for excess in excesses:
        outcome = panel_run(grid, stagger, replace(spec, coef=limit + excess), n_steps, **options)
        attempts.append((excess, outcome))
        if not outcome.stable:
            logger.info(f"💥 Panel run blew up at C = limit + {excess} after {outcome.steps_taken} steps")
            return Escalation(limit=limit, excess=excess, outcome=outcome, attempts=attempts)
        logger.info(f"Panel run at C = limit + {excess} stayed bounded for {n_steps} steps")
    logger.warning(f"⚠️ No excess up to {excesses[-1]} blew up within {n_steps} steps")
    return Escalation(limit=limit, excess=None, outcome=attempts[-1][1], attempts=attempts)
