import logging
import math
import sys
from functools import wraps

import click

from bounds import awgn_upper_bound, bounds_frame, bounds_sweep, cube_capacity_bounds, make_nu_grid
from constraint_geometry import SigmaRhoParams
from steiner_cube import bpsk_high_noise_capacity, ell_cube, high_noise_series
from subconvolutive import (
    check_alexandrov_fenchel,
    check_subconvolutive,
    ell_general_argmax,
    lambda_star_estimate,
)
from utils.errors import ConvergenceError, ValidationError
from utils.helpers import UNITS, format_line, to_units
from utils.sequence_io import load_sequence
from volume_growth import mc_log_volume, v, v1

EXIT_VALIDATION = 2
EXIT_CONVERGENCE = 3

units_option = click.option(
    '--units', type=click.Choice(UNITS), default=None,
    help='Units for printed rates (default from config).',
)
gamma_option = click.option('--gamma', type=float, default=None, help='Kernel truncation γ (default from config).')
strict_option = click.option(
    '--strict/--lenient', default=None,
    help='Exit with code 3 when the grid ladder does not converge, or report the finest value with converged=False '
         '(default from config, strict).',
)


def handle_errors(func):
    """Map package errors to CLI exit codes: 2 for invalid input, 3 for non-convergence."""
    @wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except ValidationError as e:
            logging.error(f"Invalid input: {e}")
            click.echo(f"error: {e}", err=True)
            sys.exit(EXIT_VALIDATION)
        except ConvergenceError as e:
            logging.error(f"Numerical method did not converge: {e}")
            click.echo(f"error: {e}", err=True)
            sys.exit(EXIT_CONVERGENCE)
    return wrapper


def _settings(ctx, units=None, gamma=None):
    config = ctx.obj['config']
    return (
        ctx.obj['tol'],
        units or config['units'],
        config['gamma'] if gamma is None else gamma,
    )


def _ladder_options(ctx, ladder_tol=None, strict=None):
    config = ctx.obj['config']
    if strict is None:
        strict = bool(config['strict_ladder'])
    return {
        'ladder': tuple(config['grid_ladder']),
        'ladder_tol': config['ladder_tol'] if ladder_tol is None else ladder_tol,
        'rule': config['discretization_rule'],
        'strict': strict,
    }


def _growth_fields(result, units):
    return {
        'value': to_units(result.value, units),
        'converged': result.converged,
        'grids': ','.join(str(n) for n in result.grid_sizes_used) or '-',
        'rule': result.rule,
        'sandwich_lower': to_units(result.sandwich[0], units),
        'sandwich_upper': to_units(result.sandwich[1], units),
        'richardson': to_units(result.richardson, units),
        'units': units,
    }


def v1_command(cli):

    @cli.command('v1')
    @click.option('--sigma', type=float, required=True, help='Battery size σ (ρ = 1).')
    @gamma_option
    @click.option('--tol', 'ladder_tol', type=float, default=None,
                  help='Stop the grid ladder when successive values differ by at most this.')
    @strict_option
    @units_option
    @click.pass_context
    @handle_errors
    def _v1(ctx, sigma, gamma, ladder_tol, strict, units):
        """Volume growth rate v1(σ) = v(σ, 1)."""
        tol, units, gamma = _settings(ctx, units, gamma)
        result = v1(sigma, gamma, tol, **_ladder_options(ctx, ladder_tol, strict))
        click.echo(format_line({'sigma': sigma, 'gamma': gamma, **_growth_fields(result, units)}))


def growth_command(cli):

    @cli.command('growth')
    @click.option('--sigma', type=float, required=True)
    @click.option('--rho', type=float, required=True)
    @gamma_option
    @strict_option
    @units_option
    @click.pass_context
    @handle_errors
    def _growth(ctx, sigma, rho, gamma, strict, units):
        """Volume growth rate v(σ, ρ)."""
        tol, units, gamma = _settings(ctx, units, gamma)
        params = SigmaRhoParams(sigma, rho)
        result = v(params, gamma, tol, **_ladder_options(ctx, strict=strict))
        click.echo(format_line({'sigma': sigma, 'rho': rho, 'gamma': gamma, **_growth_fields(result, units)}))


def bounds_command(cli):

    @cli.command('bounds')
    @click.option('--sigma', type=float, required=True)
    @click.option('--rho', type=float, required=True)
    @click.option('--nu-min', type=float, required=True)
    @click.option('--nu-max', type=float, required=True)
    @click.option('--nu-steps', type=int, required=True)
    @click.option('--log-grid', is_flag=True, help='Space the noise powers geometrically.')
    @click.option('--lambda-input', type=click.Path(exists=True, dir_okay=False), default=None,
                  help='Intrinsic-volume sequence (JSON) whose Λ* estimate fills the Minkowski column.')
    @gamma_option
    @units_option
    @click.pass_context
    @handle_errors
    def _bounds(ctx, sigma, rho, nu_min, nu_max, nu_steps, log_grid, lambda_input, gamma, units):
        """Capacity bounds over a grid of noise powers, as CSV."""
        tol, units, gamma = _settings(ctx, units, gamma)
        params = SigmaRhoParams(sigma, rho)
        lambda_star = None
        if lambda_input:
            seq = load_sequence(lambda_input)
            lambda_star = lambda_star_estimate(seq, ctx.obj['config']['conjugate_grid_points'], tol)
        nu_grid = make_nu_grid(nu_min, nu_max, nu_steps, log_grid)
        rows = bounds_sweep(params, nu_grid, gamma, tol, lambda_star=lambda_star, **_ladder_options(ctx))
        bounds_frame(rows, units).to_csv(sys.stdout, index=False, na_rep='', float_format='%.10g')


def cube_ell_command(cli):

    @cli.command('cube-ell')
    @click.option('--amplitude', type=float, required=True, help='Peak amplitude A.')
    @click.option('--nu', type=float, required=True, help='Noise power ν.')
    @units_option
    @click.pass_context
    @handle_errors
    def _cube_ell(ctx, amplitude, nu, units):
        """θ*, ℓ(ν) and the capacity bounds under a peak constraint."""
        tol, units, _ = _settings(ctx, units)
        result = ell_cube(amplitude, nu, tol)
        row = cube_capacity_bounds(amplitude, nu, tol).in_units(units)
        click.echo(format_line({
            'amplitude': amplitude,
            'nu': nu,
            'theta_star': result.theta_star,
            'ell': to_units(result.ell, units),
            'epi_lower': row.epi_lower,
            'minkowski_upper': row.minkowski_upper,
            'variance_upper': row.awgn_upper,
            'active_upper': row.active_upper,
            'units': units,
        }, digits=12))


def mc_volume_command(cli):

    @cli.command('mc-volume')
    @click.option('--sigma', type=float, required=True)
    @click.option('--rho', type=float, required=True)
    @click.option('--n', 'n', type=int, required=True, help='Block length.')
    @click.option('--samples', type=int, default=None, help='Monte-Carlo samples (default from config).')
    @click.option('--seed', type=int, default=None, help='Random seed (default from config, 0).')
    @units_option
    @click.pass_context
    @handle_errors
    def _mc_volume(ctx, sigma, rho, n, samples, seed, units):
        """Monte-Carlo estimate of (1/n) ln Vol(S_n(σ, ρ))."""
        config = ctx.obj['config']
        _, units, _ = _settings(ctx, units)
        samples = config['mc_samples'] if samples is None else samples
        seed = config['seed'] if seed is None else seed
        estimate, std_error = mc_log_volume(SigmaRhoParams(sigma, rho), n, samples, seed)
        click.echo(format_line({
            'sigma': sigma,
            'rho': rho,
            'n': n,
            'samples': samples,
            'seed': seed,
            'estimate': to_units(estimate, units),
            'std_error': to_units(std_error, units),
            'units': units,
        }))


def subconv_command(cli):

    @cli.command('subconv')
    @click.option('--input', 'input_path', type=click.Path(exists=True, dir_okay=False), required=True)
    @click.option('--check', type=click.Choice(['all', 'af', 'subc']), default='all')
    @click.option('--ell-nu', type=float, default=None, help='Also report ℓ(ν) from the Λ* estimate.')
    @units_option
    @click.pass_context
    @handle_errors
    def _subconv(ctx, input_path, check, ell_nu, units):
        """Checks and Λ*-based ℓ(ν) for an intrinsic-volume sequence file."""
        tol, units, _ = _settings(ctx, units)
        seq = load_sequence(input_path)
        fields = {'n_max': seq.n_max}

        if check in ('all', 'subc'):
            failures = [
                (m, n)
                for total in range(2, seq.n_max + 1)
                for m in range(1, total // 2 + 1)
                for n in (total - m,)
                if not check_subconvolutive(seq, m, n)
            ]
            if failures:
                logging.warning(f"sub-convolutivity fails for (m, n) in {failures[:10]}")
            fields['subconvolutive'] = not failures
        if check in ('all', 'af'):
            failures = [n for n in range(2, seq.n_max + 1) if not check_alexandrov_fenchel(seq, n)]
            if failures:
                logging.warning(f"Alexandrov-Fenchel inequality fails for n in {failures[:10]}")
            fields['alexandrov_fenchel'] = not failures

        if ell_nu is not None:
            lambda_star = lambda_star_estimate(seq, ctx.obj['config']['conjugate_grid_points'], tol)
            theta, ell = ell_general_argmax(lambda_star, ell_nu, tol)
            fields.update({'nu': ell_nu, 'theta_star': theta, 'ell': to_units(ell, units), 'units': units})

        click.echo(format_line(fields))


def bpsk_command(cli):

    @cli.command('bpsk')
    @click.option('--amplitude', type=float, required=True)
    @click.option('--nu', type=float, required=True)
    @units_option
    @click.pass_context
    @handle_errors
    def _bpsk(ctx, amplitude, nu, units):
        """Capacity of the ±A input by quadrature, next to its small-α series."""
        tol, units, _ = _settings(ctx, units)
        capacity = bpsk_high_noise_capacity(amplitude, nu, tol)
        alpha = amplitude / math.sqrt(nu)
        awgn_upper = awgn_upper_bound(amplitude * amplitude, nu) if amplitude > 0 else 0.0
        click.echo(format_line({
            'amplitude': amplitude,
            'nu': nu,
            'alpha': alpha,
            'capacity': to_units(capacity, units),
            'series': to_units(high_noise_series(alpha), units),
            'awgn_upper': to_units(awgn_upper, units),
            'units': units,
        }, digits=12))
