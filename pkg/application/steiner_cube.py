import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import signal, special, stats

from utils.errors import ConvergenceError, ValidationError
from utils.numerics import (
    LOG_2PIE,
    ToleranceConfig,
    adaptive_quadrature,
    binary_entropy,
    bisection_root,
    gaussian_entropy,
    log_sum_exp,
    log_unit_ball_volume,
)

THETA_BRACKET = (1e-15, 1.0 - 1e-15)

# θ* is located to this absolute accuracy so the relative cubic residual stays below 1e-10
THETA_ABS_TOL = 1e-14

# Tail cut of the output support, in noise standard deviations
SUPPORT_SIGMAS = 8.0

CONVOLUTION_TOL = 1e-6
MAX_REFINEMENTS = 6


def _check_amplitude(A):
    if not math.isfinite(A) or A <= 0:
        raise ValidationError(f"amplitude A must be finite and > 0, got {A}")


def _check_noise(nu, allow_zero=True):
    if not math.isfinite(nu) or nu < 0 or (nu == 0 and not allow_zero):
        bound = ">= 0" if allow_zero else "> 0"
        raise ValidationError(f"noise power nu must be finite and {bound}, got {nu}")


def _steiner_terms(A, nu, n, j):
    log_binomial = special.gammaln(n + 1.0) - special.gammaln(j + 1.0) - special.gammaln(n - j + 1.0)
    return log_binomial + (n - j) * math.log(2.0 * A) + log_unit_ball_volume(j) + 0.5 * j * math.log(n * nu)


def log_parallel_volume_cube(A, nu, n):
    """(1/n)·ln Vol([-A, A]^n ⊕ B_n(√(nν))), summed exactly in the log domain."""
    _check_amplitude(A)
    _check_noise(nu)
    if int(n) != n or n < 1:
        raise ValidationError(f"n must be a positive integer, got {n}")
    if nu == 0:
        return math.log(2.0 * A)
    n = int(n)
    terms = _steiner_terms(A, nu, n, np.arange(n + 1, dtype=float))
    return log_sum_exp(terms) / n


def f_nu_n(A, nu, n, j):
    """Normalised j-th Steiner exponent (1/n)·ln[C(n,j)(2A)^{n-j} ε_j (nν)^{j/2}]."""
    _check_amplitude(A)
    _check_noise(nu, allow_zero=False)
    j_arr = np.asarray(j, dtype=float)
    if np.any((j_arr < 0) | (j_arr > n)):
        raise ValidationError(f"j must lie in [0, {n}], got {j}")
    result = _steiner_terms(A, nu, float(n), j_arr) / n
    return float(result) if np.ndim(result) == 0 else result


def f_nu(A, nu, theta):
    """Limit exponent H(θ) + (1 - θ) ln 2A + (θ/2) ln(2πeν/θ), continuous at θ = 0."""
    _check_amplitude(A)
    _check_noise(nu, allow_zero=False)
    theta_arr = np.asarray(theta, dtype=float)
    result = (
        binary_entropy(theta_arr)
        + (1.0 - theta_arr) * math.log(2.0 * A)
        + 0.5 * theta_arr * (LOG_2PIE + math.log(nu))
        - 0.5 * special.xlogy(theta_arr, theta_arr)
    )
    return float(result) if np.ndim(result) == 0 else result


def _log_cubic_gap(A, nu):
    log_rhs = math.log(2.0 * A * A / (math.pi * nu))

    def gap(theta):
        return 2.0 * math.log1p(-theta) - 3.0 * math.log(theta) - log_rhs

    return gap


def theta_star(A, nu, tol=None):
    """
    Unique root in (0, 1) of (1 - θ)²/θ³ = 2A²/(πν). The left side decreases
    strictly from +∞ to 0, so bisection on its logarithm always brackets.
    """
    _check_amplitude(A)
    _check_noise(nu, allow_zero=False)
    tol = tol or ToleranceConfig()
    tol = tol.with_overrides(abs_tol=min(tol.abs_tol, THETA_ABS_TOL))
    return bisection_root(_log_cubic_gap(A, nu), *THETA_BRACKET, tol)


def cubic_residual(A, nu, theta):
    """Relative plug-back residual |(1 - θ)²/θ³ · πν/(2A²) - 1|."""
    return abs(math.expm1(2.0 * math.log1p(-theta) - 3.0 * math.log(theta) + math.log(math.pi * nu / (2.0 * A * A))))


@dataclass(frozen=True)
class CubeEllResult:
    amplitude: float
    noise_power: float
    theta_star: float
    ell: float
    residual: float = 0.0


def ell_cube(A, nu, tol=None):
    """ℓ(ν) for the cube: f^ν at θ*, and ln 2A at ν = 0."""
    _check_amplitude(A)
    _check_noise(nu)
    if nu == 0:
        return CubeEllResult(amplitude=A, noise_power=0.0, theta_star=0.0, ell=math.log(2.0 * A))

    theta = theta_star(A, nu, tol)
    residual = cubic_residual(A, nu, theta)
    if residual > 1e-10:
        logging.warning(f"theta_star(A={A}, ν={nu}) = {theta!r} has cubic residual {residual:.2e}")
    return CubeEllResult(amplitude=A, noise_power=nu, theta_star=theta, ell=f_nu(A, nu, theta), residual=residual)


def low_noise_constant(A):
    """c = (π/(2A²))^{1/3}."""
    _check_amplitude(A)
    return (math.pi / (2.0 * A * A)) ** (1.0 / 3.0)


def low_noise_expansion(A, nu):
    """Capacity upper bound expansion ln 2A - ½ ln 2πeν + (3c/2)ν^{1/3}."""
    _check_noise(nu, allow_zero=False)
    c = low_noise_constant(A)
    return math.log(2.0 * A) - 0.5 * (LOG_2PIE + math.log(nu)) + 1.5 * c * nu ** (1.0 / 3.0)


def high_noise_series(alpha):
    """α²/2 - α⁴/4 + α⁶/6 - 5α⁸/24."""
    a2 = alpha * alpha
    return a2 / 2.0 - a2 ** 2 / 4.0 + a2 ** 3 / 6.0 - 5.0 * a2 ** 4 / 24.0


def _log_cosh(y):
    y = abs(y)
    if y < 20.0:
        # cosh y - 1 = 2 sinh²(y/2), accurate for small y
        return math.log1p(2.0 * math.sinh(0.5 * y) ** 2)
    return y + math.log1p(math.exp(-2.0 * y)) - math.log(2.0)


def bpsk_high_noise_capacity(A, nu, tol=None):
    """
    Capacity of the equiprobable ±A input in Gaussian noise of power ν, nats:

        C = α² - (2/(√(2π)α))·e^{-α²/2}·∫_0^∞ e^{-y²/2α²} cosh(y) ln cosh(y) dy,  α = A/√ν.

    The integral is cut at y_max = max(40, 12α² + 40), past which the integrand
    is negligible, and evaluated after the substitution y = αs so the peak
    width does not depend on α. The e^{-α²/2} factor is folded into the
    exponent of the integrand.
    """
    _check_noise(nu, allow_zero=False)
    if not math.isfinite(A) or A < 0:
        raise ValidationError(f"amplitude A must be finite and >= 0, got {A}")
    tol = tol or ToleranceConfig()
    alpha = A / math.sqrt(nu)
    if alpha == 0:
        return 0.0

    def integrand(s):
        y = alpha * s
        log_cosh = _log_cosh(y)
        if log_cosh <= 0:
            return 0.0
        return math.exp(-0.5 * (s * s + alpha * alpha) + log_cosh) * log_cosh

    y_max = max(40.0, 12.0 * alpha * alpha + 40.0)
    upper = y_max / alpha
    breakpoints = [alpha + k for k in (-4.0, 0.0, 4.0, 10.0, 20.0)]
    integral = adaptive_quadrature(integrand, 0.0, upper, tol, points=breakpoints)
    return alpha * alpha - 2.0 / math.sqrt(2.0 * math.pi) * integral


def variance_upper_bound(A, nu):
    """½ ln(1 + A²/ν): the Gaussian-maximum-entropy capacity bound."""
    _check_amplitude(A)
    _check_noise(nu, allow_zero=False)
    return 0.5 * math.log1p(A * A / nu)


def minkowski_cube_upper_bound(A, nu, tol=None):
    """ℓ(ν) - ½ ln 2πeν for the cube."""
    _check_noise(nu, allow_zero=False)
    return ell_cube(A, nu, tol).ell - 0.5 * (LOG_2PIE + math.log(nu))


def cube_bound_crossover(A, nu_lo=1e-3, nu_hi=1e3, tol=None):
    """
    Noise power at which the Minkowski and variance upper bounds coincide,
    located by bisection in ln ν. Below it the Minkowski bound is tighter.
    """
    _check_amplitude(A)
    tol = tol or ToleranceConfig()
    if not 0 < nu_lo < nu_hi:
        raise ValidationError(f"need 0 < nu_lo < nu_hi, got [{nu_lo}, {nu_hi}]")

    def gap(log_nu):
        nu = math.exp(log_nu)
        return minkowski_cube_upper_bound(A, nu, tol) - variance_upper_bound(A, nu)

    log_nu = bisection_root(gap, math.log(nu_lo), math.log(nu_hi), tol.with_overrides(abs_tol=1e-9))
    return math.exp(log_nu)


KINDS = ('uniform', 'two-point', 'gaussian')


@dataclass(frozen=True)
class DensitySpec:
    """
    Distribution of one summand. `amplitude` is the half-width for the
    uniform and two-point kinds, `variance` the variance of a Gaussian.
    Amplitude 0 and variance 0 are point masses at the origin.
    """
    kind: str
    amplitude: float = 0.0
    variance: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unsupported density kind {self.kind!r}; expected one of {KINDS}")
        if not math.isfinite(self.amplitude) or self.amplitude < 0:
            raise ValidationError(f"amplitude must be finite and >= 0, got {self.amplitude}")
        if not math.isfinite(self.variance) or self.variance < 0:
            raise ValidationError(f"variance must be finite and >= 0, got {self.variance}")

    @classmethod
    def uniform(cls, amplitude):
        return cls('uniform', amplitude=amplitude)

    @classmethod
    def two_point(cls, amplitude):
        return cls('two-point', amplitude=amplitude)

    @classmethod
    def gaussian(cls, variance):
        return cls('gaussian', variance=variance)

    @property
    def is_point_mass(self):
        return self.amplitude == 0 if self.kind != 'gaussian' else self.variance == 0

    @property
    def is_atomic(self):
        return self.is_point_mass or self.kind == 'two-point'

    @property
    def half_width(self):
        """Half-width of the support, with Gaussians cut at SUPPORT_SIGMAS deviations."""
        if self.kind == 'gaussian':
            return SUPPORT_SIGMAS * math.sqrt(self.variance)
        return self.amplitude

    def atoms(self):
        if self.is_point_mass:
            return [(0.0, 1.0)]
        return [(-self.amplitude, 0.5), (self.amplitude, 0.5)]

    def continuous_entropy(self):
        if self.kind == 'gaussian':
            return gaussian_entropy(self.variance)
        return math.log(2.0 * self.amplitude)


def _shifted_pdf(spec, shift):
    if spec.kind == 'gaussian':
        scale = math.sqrt(spec.variance)
        return lambda s: stats.norm.pdf(s - shift, scale=scale)
    A = spec.amplitude
    return lambda s: (1.0 / (2.0 * A)) if abs(s - shift) <= A else 0.0


def _uniform_plus_gaussian_pdf(amplitude, variance):
    scale = math.sqrt(variance)

    def pdf(s):
        return (stats.norm.cdf((s + amplitude) / scale) - stats.norm.cdf((s - amplitude) / scale)) / (2.0 * amplitude)

    return pdf


def _cell_average_uniform(nodes, h, amplitude):
    covered = np.clip(nodes + h / 2, -amplitude, amplitude) - np.clip(nodes - h / 2, -amplitude, amplitude)
    return covered / (h * 2.0 * amplitude)


def _numeric_uniform_sum_entropy(a, b, grid_points):
    # cell-averaged densities on a common grid, convolved by FFT; entropy by the midpoint sum
    previous = None
    points = grid_points
    for _ in range(MAX_REFINEMENTS + 1):
        half = max(a, b)
        h = 2.0 * half / (points - 1)
        nodes = h * (np.arange(points) - (points - 1) / 2.0)
        density = signal.fftconvolve(_cell_average_uniform(nodes, h, a), _cell_average_uniform(nodes, h, b)) * h
        density = np.clip(density, 0.0, None)
        entropy = float(h * np.sum(special.entr(density)))
        logging.debug(f"uniform sum entropy on {points} points: {entropy:.10f}")
        if previous is not None and abs(entropy - previous) < CONVOLUTION_TOL:
            return entropy
        previous = entropy
        points *= 2
    raise ConvergenceError(f"convolution entropy did not settle to {CONVOLUTION_TOL} within {points // 2} points")


def _entropy_of_pdf(pdf, lo, hi, breakpoints, tol):
    return adaptive_quadrature(lambda s: float(special.entr(pdf(s))), lo, hi, tol, points=breakpoints)


def entropy_of_sum(x_spec, z_spec, tol=None, grid_points=4096):
    """
    Differential entropy h(X + Z) in nats for independent X and Z.

    Gaussian Z gives closed-form mixture densities (uniform X through the
    normal CDF, two-point X as a pair of shifted normals); a uniform ⊕ uniform
    sum is convolved numerically. The entropy integral runs over
    [-A - 8√ν, A + 8√ν].
    """
    tol = tol or ToleranceConfig()
    if grid_points < 4096:
        raise ValidationError(f"grid_points must be at least 4096, got {grid_points}")

    if x_spec.is_atomic and z_spec.is_atomic:
        if x_spec.is_point_mass and z_spec.is_point_mass:
            raise ValidationError("X + Z is a point mass and has no differential entropy")
        raise ValidationError("X + Z is discrete and has no differential entropy")

    if z_spec.is_atomic:
        x_spec, z_spec = z_spec, x_spec
    # from here z_spec has a density

    if x_spec.is_point_mass:
        return z_spec.continuous_entropy()

    half = x_spec.half_width + z_spec.half_width

    if x_spec.kind == 'two-point':
        components = [(_shifted_pdf(z_spec, loc), weight) for loc, weight in x_spec.atoms()]
        breakpoints = sorted({loc + d for loc, _ in x_spec.atoms() for d in (-z_spec.amplitude, 0.0, z_spec.amplitude)})

        def pdf(s):
            return sum(weight * component(s) for component, weight in components)

        return _entropy_of_pdf(pdf, -half, half, breakpoints, tol)

    if x_spec.kind == 'gaussian' and z_spec.kind == 'gaussian':
        return gaussian_entropy(x_spec.variance + z_spec.variance)

    if x_spec.kind == 'gaussian':
        x_spec, z_spec = z_spec, x_spec

    if z_spec.kind == 'gaussian':
        pdf = _uniform_plus_gaussian_pdf(x_spec.amplitude, z_spec.variance)
        breakpoints = [-x_spec.amplitude, 0.0, x_spec.amplitude]
        return _entropy_of_pdf(pdf, -half, half, breakpoints, tol)

    return _numeric_uniform_sum_entropy(x_spec.amplitude, z_spec.amplitude, grid_points)
