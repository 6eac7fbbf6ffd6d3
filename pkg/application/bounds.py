import logging
import math
from dataclasses import dataclass, replace

import numpy as np
import pandas as pd

from constraint_geometry import SigmaRhoParams
from steiner_cube import bpsk_high_noise_capacity, ell_cube, variance_upper_bound
from subconvolutive import ell_general
from utils.errors import ValidationError
from utils.helpers import check_units, to_units
from utils.numerics import LOG_2PIE, ToleranceConfig
from volume_growth import DEFAULT_GAMMA, v

CSV_COLUMNS = ['sigma', 'rho', 'nu', 'epi_lower', 'awgn_upper', 'minkowski_upper', 'active_upper', 'units']

ORDER_TOL = 1e-9


@dataclass(frozen=True)
class BoundsRow:
    sigma: float
    rho: float
    nu: float
    epi_lower: float
    awgn_upper: float
    minkowski_upper: float = None
    active_upper: str = 'awgn'
    units: str = 'nats'

    @property
    def upper(self):
        if self.minkowski_upper is None:
            return self.awgn_upper
        return min(self.awgn_upper, self.minkowski_upper)

    def is_ordered(self, tol=ORDER_TOL):
        return self.epi_lower <= self.upper + tol

    def in_units(self, units):
        """Row with every rate expressed in `units` (rows are built in nats)."""
        check_units(units)
        if units == self.units:
            return self
        if self.units != 'nats':
            raise ValidationError(f"can only convert rows held in nats, this row is in {self.units}")
        return replace(
            self,
            epi_lower=to_units(self.epi_lower, units),
            awgn_upper=to_units(self.awgn_upper, units),
            minkowski_upper=to_units(self.minkowski_upper, units),
            units=units,
        )


def _check_nu(nu):
    if not math.isfinite(nu) or nu <= 0:
        raise ValidationError(f"noise power nu must be finite and > 0, got {nu}")


def epi_lower_bound(v_value, nu):
    """½ ln(1 + e^{2v}/(2πeν))."""
    _check_nu(nu)
    if not math.isfinite(v_value):
        raise ValidationError(f"growth rate must be finite, got {v_value}")
    return 0.5 * float(np.logaddexp(0.0, 2.0 * v_value - LOG_2PIE - math.log(nu)))


def awgn_upper_bound(rho, nu):
    """½ ln(1 + ρ/ν)."""
    _check_nu(nu)
    if not math.isfinite(rho) or rho <= 0:
        raise ValidationError(f"rho must be finite and > 0, got {rho}")
    return 0.5 * math.log1p(rho / nu)


def minkowski_upper_bound(ell, nu):
    """ℓ(ν) - ½ ln 2πeν."""
    _check_nu(nu)
    return ell - 0.5 * (LOG_2PIE + math.log(nu))


def low_noise_capacity_estimate(v_value, nu):
    """v - ½ ln 2πeν, the small-noise behaviour shared by the lower and Minkowski bounds."""
    _check_nu(nu)
    return v_value - 0.5 * (LOG_2PIE + math.log(nu))


def _row(params, nu, epi_lower, awgn_upper, minkowski_upper):
    active = 'awgn'
    if minkowski_upper is not None and minkowski_upper < awgn_upper:
        active = 'minkowski'
    row = BoundsRow(params.sigma, params.rho, nu, epi_lower, awgn_upper, minkowski_upper, active)
    if not row.is_ordered():
        logging.warning(f"bounds out of order at σ={params.sigma}, ρ={params.rho}, ν={nu}: {row}")
    return row


def cube_capacity_bounds(A, nu, tol=None):
    """
    Bounds for the amplitude constraint |x| <= A. The average-power upper bound
    here is the variance bound ½ ln(1 + A²/ν); active_upper names the smaller
    of it and the Minkowski bound.
    """
    _check_nu(nu)
    ell = ell_cube(A, nu, tol).ell
    lower = epi_lower_bound(math.log(2.0 * A), nu)
    minkowski = minkowski_upper_bound(ell, nu)
    variance = variance_upper_bound(A, nu)
    row = _row(SigmaRhoParams(0.0, A * A), nu, lower, variance, minkowski)
    return replace(row, active_upper='minkowski' if minkowski < variance else 'variance')


def make_nu_grid(nu_min, nu_max, steps, log_grid=True):
    if steps < 1:
        raise ValidationError(f"nu grid needs at least one step, got {steps}")
    if not 0 < nu_min <= nu_max:
        raise ValidationError(f"need 0 < nu_min <= nu_max, got [{nu_min}, {nu_max}]")
    if log_grid:
        return np.geomspace(nu_min, nu_max, steps)
    return np.linspace(nu_min, nu_max, steps)


def bounds_sweep(params, nu_grid, gamma=DEFAULT_GAMMA, tol=None, lambda_star=None, **ladder_options):
    """
    One BoundsRow per ν, in grid order. v(σ, ρ) is computed once. The
    Minkowski column is filled for σ = 0 from the cube's ℓ(ν) at A = √ρ, or
    from ℓ(ν) of a supplied Λ* estimate.
    """
    tol = tol or ToleranceConfig()
    nu_values = [float(nu) for nu in nu_grid]
    if not nu_values:
        return []
    for nu in nu_values:
        _check_nu(nu)

    growth = v(params, gamma, tol, **ladder_options).value
    logging.info(f"sweeping {len(nu_values)} noise powers at σ={params.sigma}, ρ={params.rho} (v={growth:.6f})")

    rows = []
    for nu in nu_values:
        if lambda_star is not None:
            minkowski = minkowski_upper_bound(ell_general(lambda_star, nu, tol), nu)
        elif params.sigma == 0:
            minkowski = minkowski_upper_bound(ell_cube(math.sqrt(params.rho), nu, tol).ell, nu)
        else:
            minkowski = None
        rows.append(_row(params, nu, epi_lower_bound(growth, nu), awgn_upper_bound(params.rho, nu), minkowski))
    return rows


def high_noise_sandwich(params, nu, tol=None):
    """
    (lower, upper) for large ν: the capacity of the ±√ρ input, which every
    (σ, ρ) constraint admits, and the average-power bound.
    """
    _check_nu(nu)
    return bpsk_high_noise_capacity(math.sqrt(params.rho), nu, tol), awgn_upper_bound(params.rho, nu)


def bounds_frame(rows, units='nats'):
    """Rows as a DataFrame in the CSV column order; absent Minkowski values are NaN."""
    check_units(units)
    records = []
    for row in rows:
        converted = row.in_units(units)
        records.append({
            'sigma': converted.sigma,
            'rho': converted.rho,
            'nu': converted.nu,
            'epi_lower': converted.epi_lower,
            'awgn_upper': converted.awgn_upper,
            'minkowski_upper': np.nan if converted.minkowski_upper is None else converted.minkowski_upper,
            'active_upper': converted.active_upper,
            'units': converted.units,
        })
    return pd.DataFrame.from_records(records, columns=CSV_COLUMNS)
