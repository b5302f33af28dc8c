"""
Command-line front end.

Every command builds its grid from --mapping/--ne, writes a report whose
metadata echoes the resolved configuration, and exits with 0 on success,
1 on invalid input and 2 on runtime failures (see ``main``).
"""

import json
import logging
from pathlib import Path

import click
import numpy as np

from app import TOOL_NAME, configure_logging, load_config
from diffusion_sim import (EXCESS_LADDER, checkerboard, empirical_threshold, escalate_panel_run, panel_run,
                           random_field, uniform_patch)
from gnomonic_grid import build_grid, grid_summary, metric_field
from models import (PANEL_IDS, BracketError, CubeSphereError, CustomEncoder, DampingSpec, GhostMode,
                    GridSpec, MappingKind, NoStableCoefficientError, OperatorKind, ReportDocument,
                    Staggering, parse_location, save_csv, save_report)
from stability import (DEFAULT_FV3_COEFFICIENT, ORDERS, default_coefficient_check, diagonal_sweep,
                       dimensional_viscosity, edge_profile, flow_dependent_c2, flow_dependent_nu,
                       grid_stability_field, limits_table, max_stable_coefficient, oscillation_free_coefficient,
                       psi_min, two_dx_field)

logger = logging.getLogger(__name__)

METRIC_COLUMNS = ['panel_id', 'i', 'j', 'lon_deg', 'lat_deg', 'dx_m', 'dy_m', 'chi', 'sin_alpha', 'area_m2']
CURVE_COLUMNS = ['k_dx', 'gamma']
PROFILE_COLUMNS = ['i', 'label', 'chi', 'sin_alpha', 'psi_tilde', 'psi']
OSC_FREE = 'osc-free'


class ResolutionParamType(click.ParamType):
    """Cubed-sphere resolution as 'C96' or '96'."""
    name = 'resolution'

    def convert(self, value, param, ctx):
        if isinstance(value, int):
            return value
        text = str(value).strip().upper()
        if text.startswith('C'):
            text = text[1:]
        try:
            return int(text)
        except ValueError:
            self.fail(f"'{value}' is not a resolution like C96 or 96", param, ctx)


class CoefficientParamType(click.ParamType):
    """A non-negative float or 'osc-free'."""
    name = 'coefficient'

    def convert(self, value, param, ctx):
        if isinstance(value, float) or value == OSC_FREE:
            return value
        try:
            return float(value)
        except ValueError:
            self.fail(f"'{value}' is neither a number nor '{OSC_FREE}'", param, ctx)


class LocationParamType(click.ParamType):
    name = 'location'

    def convert(self, value, param, ctx):
        try:
            return parse_location(value)
        except ValueError as e:
            self.fail(str(e), param, ctx)


RESOLUTION = ResolutionParamType()
COEFFICIENT = CoefficientParamType()
LOCATION = LocationParamType()


def grid_options(f):
    """--mapping, --ne and --radius, shared by every command."""
    f = click.option('--radius', type=float, default=None, help='Sphere radius in metres (default RADIUS).')(f)
    f = click.option('--ne', type=RESOLUTION, default='C96', show_default=True, help='Cells per panel edge.')(f)
    return click.option('--mapping', type=click.Choice(MappingKind.names()), default=MappingKind.EQUI_EDGE.value,
                        show_default=True, help='Gnomonic mapping.')(f)


def stagger_option(default):
    return click.option('--stagger', type=click.Choice(Staggering.names()), default=default, show_default=True,
                        help='offset for divergence damping, primary for vorticity damping.')


operator_option = click.option('--operator', type=click.Choice(OperatorKind.names()),
                               default=OperatorKind.PSEUDO.value, show_default=True)
format_option = click.option('--format', 'fmt', type=click.Choice(['csv', 'json']), default='csv',
                             show_default=True)


def _grid(ctx, mapping, ne, radius):
    config = ctx.obj['config']
    spec = GridSpec(mapping=mapping, ne=ne, radius=radius if radius is not None else config['RADIUS'])
    return build_grid(spec)


def _echo_config(ctx, **resolved):
    """Input options plus every value resolved from configuration."""
    echoed = {'ghosts': ctx.obj['ghosts'].value}
    for name, value in ctx.params.items():
        echoed[name] = str(value) if isinstance(value, Path) else value
    for name, value in resolved.items():
        echoed[name] = str(value) if isinstance(value, Path) else value
    return echoed


def _emit(document, out):
    if out is None:
        click.echo(json.dumps(document, cls=CustomEncoder, indent=2, sort_keys=True))
    else:
        save_report(document, out)


def _emit_rows(document, header, rows, out, fmt):
    """CSV rows plus a JSON summary next to them, or one JSON report with the rows inside."""
    if fmt == 'json' or out is None:
        document.payload['rows'] = [dict(zip(header, row)) for row in rows]
        _emit(document, out)
        return
    save_csv(out, header, rows)
    save_report(document, Path(out).with_suffix('.json'))


def _metric_rows(grid, stagger, metrics, extra=None):
    lon, lat = grid.lonlat(stagger)
    lon_deg, lat_deg = np.degrees(lon), np.degrees(lat)
    m = grid.size(stagger)
    for slot, pid in enumerate(PANEL_IDS):
        for i in range(m):
            for j in range(m):
                index = (slot, i, j)
                row = [pid, i, j, lon_deg[index], lat_deg[index], metrics.dx[index], metrics.dy[index],
                       metrics.chi[index], metrics.sin_alpha[index], metrics.area[index]]
                if extra is not None:
                    row.append(extra[index])
                yield row


def _cell(ctx, field, metrics, location):
    """Location and frozen metrics of the chosen cell; None picks the field's argmin."""
    if location is None:
        location = field.argmin
    pid, i, j = location
    m = field.values.shape[-1]
    if not (0 <= i < m and 0 <= j < m):
        raise click.BadParameter(f"cell ({i}, {j}) outside the {m}x{m} lattice", ctx=ctx, param_hint='--location')
    return location, metrics.at((pid - 1, i, j))


def _resolve_coef(coef, psi_value):
    if coef == OSC_FREE:
        return oscillation_free_coefficient(psi_value)
    return coef


@click.group()
@click.option('--log-level', type=click.Choice(['DEBUG', 'INFO', 'WARNING', 'ERROR'], case_sensitive=False),
              default=None, help='Overrides LOG_LEVEL.')
@click.option('--ghosts', type=click.Choice(GhostMode.names()), default=None,
              help='Ghost corners of offset edge cells; overrides GHOSTS.')
@click.pass_context
def cli(ctx, log_level, ghosts):
    """Stability of divergence and vorticity damping on gnomonic cubed-sphere grids."""
    config = load_config()
    configure_logging(log_level or config['LOG_LEVEL'])
    ctx.obj = {'config': config, 'ghosts': GhostMode.parse(ghosts or config['GHOSTS'])}


@cli.command('grid-metrics')
@grid_options
@stagger_option(Staggering.OFFSET.value)
@click.option('--out', type=click.Path(dir_okay=False, path_type=Path), required=True)
@format_option
@click.pass_context
def grid_metrics(ctx, mapping, ne, radius, stagger, out, fmt):
    """Per-point metrics of one staggering, with the area/aspect summary."""
    grid = _grid(ctx, mapping, ne, radius)
    ghosts = ctx.obj['ghosts']
    metrics = metric_field(grid, stagger, ghosts)
    primary = metrics if stagger == Staggering.PRIMARY.value else None
    summary = grid_summary(grid, ghosts, primary=primary)
    document = ReportDocument('grid-metrics', _echo_config(ctx, radius=grid.spec.radius), {'summary': summary})
    _emit_rows(document, METRIC_COLUMNS, list(_metric_rows(grid, stagger, metrics)), out, fmt)


@cli.command()
@grid_options
@stagger_option(Staggering.OFFSET.value)
@operator_option
@click.option('--order', 'orders', type=click.IntRange(min=1), multiple=True, help='Repeatable; default 1-4.')
@click.option('--coef2', type=click.FloatRange(min=0), default=None, help='Laplacian coefficient for mixed-order limits.')
@click.option('--out', type=click.Path(dir_okay=False, path_type=Path), default=None)
@click.pass_context
def limits(ctx, mapping, ne, radius, stagger, operator, orders, coef2, out):
    """Maximum stable and oscillation-free coefficients from the grid's weakest point."""
    grid = _grid(ctx, mapping, ne, radius)
    field, _, area_min = grid_stability_field(grid, stagger, operator, ctx.obj['ghosts'])
    value, location = psi_min(field)
    table = limits_table(value, orders or ORDERS, coef2)
    payload = {'psi_min_location': location, 'area_min_m2': area_min, 'field': field, **table}
    _emit(ReportDocument('limits', _echo_config(ctx, radius=grid.spec.radius), payload), out)


@cli.command()
@grid_options
@stagger_option(Staggering.OFFSET.value)
@operator_option
@click.option('--order', 'q', type=click.IntRange(min=1), default=1, show_default=True)
@click.option('--coef', type=COEFFICIENT, default=OSC_FREE, show_default=True)
@click.option('--coef2', type=click.FloatRange(min=0), default=0.0, show_default=True)
@click.option('--location', type=LOCATION, default='argmin', show_default=True, help="'argmin' or 'panel,i,j'.")
@click.option('--samples', type=click.IntRange(min=2), default=None, help='Sweep points (default SAMPLES).')
@click.option('--out', type=click.Path(dir_okay=False, path_type=Path), required=True)
@format_option
@click.pass_context
def amplification(ctx, mapping, ne, radius, stagger, operator, q, coef, coef2, location, samples, out, fmt):
    """Amplification factor along k dx = l dy at one cell."""
    samples = samples or ctx.obj['config']['SAMPLES']
    grid = _grid(ctx, mapping, ne, radius)
    field, metrics, area_min = grid_stability_field(grid, stagger, operator, ctx.obj['ghosts'])
    location, cell = _cell(ctx, field, metrics, location)
    spec = DampingSpec(q=q, coef=_resolve_coef(coef, field.minimum), operator=operator, coef2=coef2)
    k, gamma = diagonal_sweep(spec, cell, area_min, samples)
    config = _echo_config(ctx, radius=grid.spec.radius, samples=samples, resolved_coef=spec.coef)
    document = ReportDocument('amplification', config, {'location': location, 'metrics': cell, 'damping': spec})
    _emit_rows(document, CURVE_COLUMNS, list(zip(k, gamma)), out, fmt)


@cli.command('two-dx-field')
@grid_options
@stagger_option(Staggering.OFFSET.value)
@operator_option
@click.option('--order', 'q', type=click.IntRange(min=1), default=1, show_default=True)
@click.option('--coef', type=COEFFICIENT, default=OSC_FREE, show_default=True)
@click.option('--coef2', type=click.FloatRange(min=0), default=0.0, show_default=True)
@click.option('--out', type=click.Path(dir_okay=False, path_type=Path), required=True)
@format_option
@click.pass_context
def two_dx(ctx, mapping, ne, radius, stagger, operator, q, coef, coef2, out, fmt):
    """2dx amplification factor at every point, appended to the metric rows."""
    grid = _grid(ctx, mapping, ne, radius)
    field, metrics, area_min = grid_stability_field(grid, stagger, operator, ctx.obj['ghosts'])
    spec = DampingSpec(q=q, coef=_resolve_coef(coef, field.minimum), operator=operator, coef2=coef2)
    gamma = two_dx_field(spec, metrics, stagger, area_min)
    config = _echo_config(ctx, radius=grid.spec.radius, resolved_coef=spec.coef)
    document = ReportDocument('two-dx-field', config, {'damping': spec, 'field': gamma, 'psi': field})
    rows = list(_metric_rows(grid, stagger, metrics, extra=gamma.values))
    _emit_rows(document, METRIC_COLUMNS + ['gamma_2dx'], rows, out, fmt)


@cli.command('empirical-limit')
@grid_options
@stagger_option(Staggering.OFFSET.value)
@operator_option
@click.option('--order', 'q', type=click.IntRange(min=1), default=1, show_default=True)
@click.option('--location', type=LOCATION, default='argmin', show_default=True)
@click.option('--tol', type=click.FloatRange(min=0, min_open=True), default=None, help='Bisection tolerance (default TOLERANCE).')
@click.option('--steps', type=click.IntRange(min=1), default=None, help='Steps per run (default BISECTION_STEPS).')
@click.option('--size', type=click.IntRange(min=4), default=8, show_default=True)
@click.option('--init', type=click.Choice(['noise', 'checkerboard']), default='noise', show_default=True)
@click.option('--seed', type=int, default=None)
@click.option('--out', type=click.Path(dir_okay=False, path_type=Path), default=None)
@click.pass_context
def empirical_limit(ctx, mapping, ne, radius, stagger, operator, q, location, tol, steps, size, init, seed, out):
    """Bisect the stability threshold of a patch frozen at one cell's metrics."""
    config = ctx.obj['config']
    tol = tol or config['TOLERANCE']
    steps = steps or config['BISECTION_STEPS']
    seed = config['SEED'] if seed is None else seed
    grid = _grid(ctx, mapping, ne, radius)
    field, metrics, area_min = grid_stability_field(grid, stagger, operator, ctx.obj['ghosts'])
    location, cell = _cell(ctx, field, metrics, location)
    psi_value = float(field.values[(location[0] - 1,) + location[1:]])
    analytic = max_stable_coefficient(psi_value, q)
    template = uniform_patch(cell, n=size, area_min=area_min, operator=operator, q=q, n_steps=steps,
                             blowup_factor=config['BLOWUP_FACTOR'])
    initial = checkerboard(size, size) if init == 'checkerboard' else random_field(size, size, seed)
    empirical = empirical_threshold(template, (0.9 * analytic, 1.1 * analytic), tol, initial)
    payload = {
        'location': location,
        'psi': psi_value,
        'analytic_limit': analytic,
        'empirical_limit': empirical,
        'relative_gap': (empirical - analytic) / analytic,
    }
    resolved = _echo_config(ctx, radius=grid.spec.radius, tol=tol, steps=steps, seed=seed)
    _emit(ReportDocument('empirical-limit', resolved, payload), out)


@cli.command('panel-run')
@grid_options
@stagger_option(Staggering.OFFSET.value)
@operator_option
@click.option('--order', 'q', type=click.IntRange(min=1), default=3, show_default=True)
@click.option('--coef', type=click.FloatRange(min=0), default=None,
              help='Run once at this coefficient instead of escalating over --excess.')
@click.option('--excess', type=click.FloatRange(min=0), multiple=True, default=EXCESS_LADDER, show_default=True,
              help='Excesses over the limit, tried in turn until one blows up.')
@click.option('--steps', type=click.IntRange(min=1), default=None, help='Default PANEL_RUN_STEPS.')
@click.option('--seed', type=int, default=None)
@click.option('--out', type=click.Path(dir_okay=False, path_type=Path), default=None)
@click.pass_context
def panel_run_command(ctx, mapping, ne, radius, stagger, operator, q, coef, excess, steps, seed, out):
    """Damp seeded noise on panel 1 and report where it blows up."""
    config = ctx.obj['config']
    steps = steps or config['PANEL_RUN_STEPS']
    seed = config['SEED'] if seed is None else seed
    grid = _grid(ctx, mapping, ne, radius)
    field, _, _ = grid_stability_field(grid, stagger, operator, ctx.obj['ghosts'])
    limit = max_stable_coefficient(field.minimum, q)
    options = dict(seed=seed, ghosts=ctx.obj['ghosts'], blowup_factor=config['BLOWUP_FACTOR'])
    payload = {'analytic_limit': limit}
    if coef is None:
        escalation = escalate_panel_run(grid, stagger, DampingSpec(q=q, coef=limit, operator=operator), limit,
                                        steps, excesses=sorted(excess), **options)
        tried = escalation.attempts[-1][0]
        spec = DampingSpec(q=q, coef=limit + tried, operator=operator)
        outcome = escalation.outcome
        payload.update(excess=escalation.excess, blew_up=escalation.blew_up,
                       attempts=escalation.to_dict()['attempts'])
    else:
        spec = DampingSpec(q=q, coef=coef, operator=operator)
        outcome = panel_run(grid, stagger, spec, steps, **options)
        payload.update(excess=coef - limit, blew_up=not outcome.stable)
    if not outcome.stable:
        logger.warning(f"Panel run blew up after {outcome.steps_taken} steps at {outcome.argmax}")
    payload.update(damping=spec, outcome=outcome)
    resolved = _echo_config(ctx, radius=grid.spec.radius, steps=steps, seed=seed, resolved_coef=spec.coef)
    _emit(ReportDocument('panel-run', resolved, payload), out)


@cli.command('default-check')
@grid_options
@stagger_option(Staggering.OFFSET.value)
@operator_option
@click.option('--coef', type=click.FloatRange(min=0), default=DEFAULT_FV3_COEFFICIENT, show_default=True)
@click.option('--coef2', type=click.FloatRange(min=0), default=0.0, show_default=True)
@click.option('--order', 'orders', type=click.IntRange(min=1), multiple=True)
@click.option('--out', type=click.Path(dir_okay=False, path_type=Path), default=None)
@click.pass_context
def default_check(ctx, mapping, ne, radius, stagger, operator, coef, coef2, orders, out):
    """2dx amplification of a fixed coefficient at the weakest point, per order."""
    grid = _grid(ctx, mapping, ne, radius)
    field, _, _ = grid_stability_field(grid, stagger, operator, ctx.obj['ghosts'])
    rows = default_coefficient_check(field.minimum, coef, orders or ORDERS, coef2)
    payload = {'psi_min': field.minimum, 'psi_min_location': field.argmin, 'rows': rows}
    _emit(ReportDocument('default-check', _echo_config(ctx, radius=grid.spec.radius), payload), out)


@cli.command('flow-damping')
@grid_options
@stagger_option(Staggering.OFFSET.value)
@operator_option
@click.option('--c-star', type=click.FloatRange(min=0), default=0.2, show_default=True)
@click.option('--dt', type=click.FloatRange(min=0, min_open=True), default=225.0, show_default=True,
              help='Time step in seconds.')
@click.option('--divergence', type=float, default=1e-4, show_default=True, help='D in 1/s.')
@click.option('--vorticity', type=float, default=1e-4, show_default=True, help='zeta in 1/s.')
@click.option('--order', 'orders', type=click.IntRange(min=1), multiple=True)
@click.option('--out', type=click.Path(dir_okay=False, path_type=Path), default=None)
@click.pass_context
def flow_damping(ctx, mapping, ne, radius, stagger, operator, c_star, dt, divergence, vorticity, orders, out):
    """Limits of hyperviscosity running alongside a flow-dependent Laplacian viscosity."""
    grid = _grid(ctx, mapping, ne, radius)
    field, _, area_min = grid_stability_field(grid, stagger, operator, ctx.obj['ghosts'])
    coef2 = float(flow_dependent_c2(c_star, dt, divergence, vorticity))
    stable = True
    try:
        table = limits_table(field.minimum, orders or ORDERS, coef2)
    except NoStableCoefficientError as e:
        logger.warning(f"⚠️ {e}")
        table = limits_table(field.minimum, orders or ORDERS)
        stable = False
    for row in table['rows']:
        limit = row.get('mixed_limit', row['max_stable'])
        row['nu_limit'] = dimensional_viscosity(limit, row['q'], area_min, dt)
    payload = {
        **table,
        'coef2': coef2,
        'nu2_m2_per_s': float(flow_dependent_nu(c_star, area_min, divergence, vorticity)),
        'area_min_m2': area_min,
        'no_stable_hyperviscosity': not stable,
    }
    _emit(ReportDocument('flow-damping', _echo_config(ctx, radius=grid.spec.radius), payload), out)


@cli.command('edge-profile')
@grid_options
@stagger_option(Staggering.OFFSET.value)
@click.option('--out', type=click.Path(dir_okay=False, path_type=Path), default=None)
@format_option
@click.pass_context
def edge_profile_command(ctx, mapping, ne, radius, stagger, out, fmt):
    """Psi~ and Psi along the south edge of panel 1."""
    grid = _grid(ctx, mapping, ne, radius)
    profile = edge_profile(grid, stagger, ctx.obj['ghosts'])
    rows = [[entry[name] for name in PROFILE_COLUMNS] for entry in profile]
    document = ReportDocument('edge-profile', _echo_config(ctx, radius=grid.spec.radius), {})
    _emit_rows(document, PROFILE_COLUMNS, rows, out, fmt)


def main(argv=None) -> int:
    """Run one command and map the outcome to an exit code."""
    try:
        cli.main(args=argv, prog_name=TOOL_NAME, standalone_mode=False)
    except click.ClickException as e:
        e.show()
        return 1
    except click.Abort:
        logger.error("Aborted")
        return 1
    except BracketError as e:
        logger.error(f"❌ Bisection bracket failed: {e}")
        return 2
    except ValueError as e:
        logger.error(f"❌ Invalid input: {e}")
        return 1
    except (CubeSphereError, OSError) as e:
        logger.error(f"❌ {type(e).__name__}: {e}")
        return 2
    return 0
