"""
Von Neumann stability of divergence and vorticity damping on cubed-sphere grids.

Damping of order 2q with nondimensional coefficient C uses
nu = (C * dA_min)^q / dt; every result here is nondimensional, so dt never
appears. Divergence damping is analysed on the offset staggering and
vorticity damping on the primary one.
"""

import logging
import math
from decimal import ROUND_FLOOR, Decimal
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

from gnomonic_grid import PanelGrid, location_label, metric_field
from models import (PANEL_IDS, CellMetrics, DampingSpec, GhostMode, Location,
                    NoStableCoefficientError, OperatorKind, StabilityField, Staggering, WaveNumber)

logger = logging.getLogger(__name__)

# FV3's default divergence-damping coefficient for fourth to eighth order
DEFAULT_FV3_COEFFICIENT = 0.15
ORDERS = (1, 2, 3, 4)


def _array(values):
    return np.asarray(values, dtype=float)


def _check_positive(name, value):
    if not np.all(np.asarray(value) > 0):
        raise ValueError(f"{name} must be positive, got {value}")


def _check_order(q):
    if isinstance(q, bool) or int(q) != q or q < 1:
        raise ValueError(f"order q must be a positive integer, got {q!r}")


def grid_stability_function(metrics: CellMetrics, area_min: float, operator=OperatorKind.PSEUDO):
    """Psi~ = dA / (sin(alpha) dA_min (chi + 1/chi)) for the pseudo-Laplacian.

    The full Laplacian gives Psi = sin^2(alpha) * Psi~, equal where the grid is
    orthogonal.
    """
    operator = OperatorKind.parse(operator)
    _check_positive('area_min', area_min)
    chi = _array(metrics.chi)
    sin_alpha = _array(metrics.sin_alpha)
    pseudo = _array(metrics.area) / (sin_alpha * area_min * (chi + 1 / chi))
    if operator is OperatorKind.FULL:
        return (pseudo * sin_alpha ** 2)[()]
    return pseudo[()]


def stability_field(metrics: CellMetrics, stagger: Staggering, operator=OperatorKind.PSEUDO,
                    area_min: Optional[float] = None, panels: Tuple[int, ...] = PANEL_IDS) -> StabilityField:
    operator = OperatorKind.parse(operator)
    if area_min is None:
        area_min = float(np.min(metrics.area))
    values = np.asarray(grid_stability_function(metrics, area_min, operator))
    quantity = 'psi' if operator is OperatorKind.FULL else 'psi_tilde'
    return StabilityField(values=values, stagger=Staggering.parse(stagger), quantity=quantity, panels=tuple(panels))


def grid_stability_field(grid: PanelGrid, stagger: Staggering, operator=OperatorKind.PSEUDO,
                         ghosts: GhostMode = GhostMode.EXTENDED):
    """Evaluate metrics over all six panels and the stability function on them.

    Returns (field, metrics, area_min); dA_min is the smallest cell of the
    staggering over the whole sphere.
    """
    metrics = metric_field(grid, stagger, ghosts)
    area_min = float(np.min(metrics.area))
    field = stability_field(metrics, stagger, operator, area_min)
    return field, metrics, area_min


def psi_min(field: StabilityField) -> Tuple[float, Location]:
    """Global minimum; ties go to the lowest panel id, then row-major order."""
    if field.values.size == 0:
        raise ValueError("stability field is empty")
    return field.minimum, field.argmin


def _damping_rate(spec: DampingSpec, metrics: CellMetrics, area_min, k_dx, l_dy):
    """Per-mode damping of one Laplacian application, scaled by dA_min.

    This is dA_min * (-eigenvalue of the discrete operator); never negative.
    """
    half_k, half_l = np.asarray(k_dx) / 2, np.asarray(l_dy) / 2
    sx, cx = np.sin(half_k), np.cos(half_k)
    sy, cy = np.sin(half_l), np.cos(half_l)
    chi = _array(metrics.chi)
    sin_alpha = _array(metrics.sin_alpha)
    area = _array(metrics.area)
    if spec.operator is OperatorKind.PSEUDO:
        rate = 4 * area_min * sin_alpha / area * (chi * sx ** 2 + sy ** 2 / chi)
    else:
        bracket = chi * sx ** 2 - 2 * np.cos(_array(metrics.alpha)) * sx * sy * cx * cy + sy ** 2 / chi
        rate = 4 * area_min / (area * sin_alpha) * bracket
    return np.maximum(rate, 0.0)


def amplification_factor(spec: DampingSpec, metrics: CellMetrics, area_min: float, k_dx, l_dy):
    """Vectorized Gamma over wavenumber arrays and/or metric lattices.

    With a Laplacian coefficient C2 the factors superpose:
    Gamma = 1 - C2 * r - (C * r)^q.
    """
    _check_positive('area_min', area_min)
    rate = _damping_rate(spec, metrics, area_min, k_dx, l_dy)
    return (1 - spec.coef2 * rate - (spec.coef * rate) ** spec.q)[()]


def amplification(spec: DampingSpec, metrics: CellMetrics, area_min: float, w: WaveNumber):
    return amplification_factor(spec, metrics, area_min, w.k_dx, w.l_dy)


def two_dx_amplification(spec: DampingSpec, metrics: CellMetrics, area_min: float):
    """Gamma(pi, pi) = 1 - 4 C2 / Psi - (4 C / Psi)^q.

    The full operator's cross term vanishes for the 2dx wave, so Psi carries
    all of the grid dependence.
    """
    psi = _array(grid_stability_function(metrics, area_min, spec.operator))
    return (1 - 4 * spec.coef2 / psi - (4 * spec.coef / psi) ** spec.q)[()]


def max_stable_coefficient(psi_min_value: float, q: int) -> float:
    """Largest C keeping Gamma(pi, pi) >= -1: 2^(1/q) Psi_min / 4."""
    _check_positive('psi_min', psi_min_value)
    _check_order(q)
    return 2 ** (1 / q) * psi_min_value / 4


def oscillation_free_coefficient(psi_min_value: float) -> float:
    _check_positive('psi_min', psi_min_value)
    return psi_min_value / 4


def mixed_order_two_dx(coef2: float, coef2q: float, q: int, psi_min_value: float) -> float:
    """2dx amplification when Laplacian and order-2q damping act together."""
    _check_positive('psi_min', psi_min_value)
    _check_order(q)
    return 1 - 4 * coef2 / psi_min_value - (4 * coef2q / psi_min_value) ** q


def mixed_order_limit(coef2: float, q: int, psi_min_value: float) -> float:
    """Largest order-2q coefficient that stays stable alongside a Laplacian coefficient C2."""
    _check_positive('psi_min', psi_min_value)
    _check_order(q)
    if coef2 < 0:
        raise ValueError(f"coef2 must be non-negative, got {coef2}")
    if coef2 > psi_min_value / 2:
        raise NoStableCoefficientError(
            f"coef2={coef2} exceeds Psi_min/2={psi_min_value / 2}: no hyperviscosity is stable")
    return psi_min_value / 4 * (2 - 4 * coef2 / psi_min_value) ** (1 / q)


def flow_dependent_nu(c_star: float, area_min: float, divergence, vorticity):
    """Smagorinsky-like Laplacian viscosity nu = C* dA_min sqrt(D^2 + zeta^2)."""
    if c_star < 0:
        raise ValueError(f"c_star must be non-negative, got {c_star}")
    return (c_star * area_min * np.hypot(divergence, vorticity))[()]


def flow_dependent_c2(c_star: float, dt: float, divergence, vorticity):
    """Nondimensional C2 equivalent to the flow-dependent viscosity: nu dt / dA_min."""
    if c_star < 0:
        raise ValueError(f"c_star must be non-negative, got {c_star}")
    _check_positive('dt', dt)
    return (c_star * dt * np.hypot(divergence, vorticity))[()]


def dimensional_viscosity(coef: float, q: int, area_min: float, dt: float) -> float:
    """nu_2q = (C dA_min)^q / dt, in m^2q / s."""
    _check_order(q)
    _check_positive('dt', dt)
    return (coef * area_min) ** q / dt


def nondimensional_coefficient(nu: float, q: int, area_min: float, dt: float) -> float:
    _check_order(q)
    _check_positive('area_min', area_min)
    return (nu * dt) ** (1 / q) / area_min


def round_down(value: float, places: int = 3) -> float:
    """Floor to a number of decimal places, exactly on the shortest decimal form."""
    quantum = Decimal(1).scaleb(-places)
    return float(Decimal(repr(float(value))).quantize(quantum, rounding=ROUND_FLOOR))


def limits_table(psi_min_value: float, orders: Iterable[int] = ORDERS,
                 coef2: Optional[float] = None) -> Dict:
    """Stability limits per order, with full precision and rounded-down columns."""
    rows = []
    for q in orders:
        limit = max_stable_coefficient(psi_min_value, q)
        row = {
            'q': q,
            'order': 2 * q,
            'max_stable': limit,
            'max_stable_rounded': round_down(limit),
        }
        if coef2 is not None:
            mixed = mixed_order_limit(coef2, q, psi_min_value)
            row['mixed_limit'] = mixed
            row['mixed_limit_rounded'] = round_down(mixed)
        rows.append(row)
    osc_free = oscillation_free_coefficient(psi_min_value)
    return {
        'psi_min': psi_min_value,
        'psi_min_rounded': round_down(psi_min_value),
        'oscillation_free': osc_free,
        'oscillation_free_rounded': round_down(osc_free),
        'coef2': coef2,
        'rows': rows,
    }


def default_coefficient_check(psi_min_value: float, coef: float = DEFAULT_FV3_COEFFICIENT,
                              orders: Iterable[int] = ORDERS, coef2: float = 0.0) -> List[Dict]:
    """2dx amplification of a fixed coefficient at the weakest cell, per order."""
    rows = []
    for q in orders:
        gamma = mixed_order_two_dx(coef2, coef, q, psi_min_value)
        rows.append({'q': q, 'order': 2 * q, 'coef': coef, 'coef2': coef2,
                     'gamma_2dx': gamma, 'stable': bool(gamma >= -1)})
        if gamma < -1:
            logger.info(f"Coefficient {coef} is unstable at order {2 * q} (Gamma={gamma:.4f})")
    return rows


def diagonal_sweep(spec: DampingSpec, metrics: CellMetrics, area_min: float, n_samples: int):
    """Gamma along k dx = l dy from 0 to pi at one cell; returns (k_dx, gamma)."""
    if n_samples < 2:
        raise ValueError(f"n_samples must be at least 2, got {n_samples}")
    if not metrics.is_uniform:
        raise ValueError("diagonal_sweep needs the metrics of a single cell")
    k = np.linspace(0.0, math.pi, n_samples)
    return k, np.asarray(amplification_factor(spec, metrics, area_min, k, k))


def two_dx_field(spec: DampingSpec, metrics: CellMetrics, stagger: Staggering,
                 area_min: Optional[float] = None, panels: Tuple[int, ...] = PANEL_IDS) -> StabilityField:
    """Gamma(pi, pi) at every point of a metric lattice."""
    if area_min is None:
        area_min = float(np.min(metrics.area))
    values = np.asarray(two_dx_amplification(spec, metrics, area_min))
    field = StabilityField(values=values, stagger=Staggering.parse(stagger), quantity='gamma_2dx',
                           panels=tuple(panels))
    logger.debug(f"2dx amplification over {values.size} points: min {field.minimum:.4f}, max {field.maximum:.4f}")
    return field


def edge_profile(grid: PanelGrid, stagger: Staggering, ghosts: GhostMode = GhostMode.EXTENDED) -> List[Dict]:
    """Psi~ and Psi along the south edge of panel 1."""
    stagger = Staggering.parse(stagger)
    metrics = metric_field(grid, stagger, ghosts)
    area_min = float(np.min(metrics.area))
    pseudo = np.asarray(grid_stability_function(metrics, area_min, OperatorKind.PSEUDO))[0, :, 0]
    full = np.asarray(grid_stability_function(metrics, area_min, OperatorKind.FULL))[0, :, 0]
    chi = np.asarray(metrics.chi)[0, :, 0]
    sin_alpha = np.asarray(metrics.sin_alpha)[0, :, 0]
    return [
        {'i': i, 'label': location_label(grid.spec.ne, stagger, i, 0), 'chi': chi[i],
         'sin_alpha': sin_alpha[i], 'psi_tilde': pseudo[i], 'psi': full[i]}
        for i in range(len(pseudo))
    ]
