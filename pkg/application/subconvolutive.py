import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from utils.errors import ValidationError
from utils.numerics import LOG_2PIE, ToleranceConfig, golden_section_max, log_sum_exp

# Relative slack allowed in the sub-convolutivity comparison
SUBC_REL_TOL = 1e-10

SANDWICH_TOL = 1e-9

# Default allowance for piecewise-linear interpolation of Λ* in the large-deviation check
INTERPOLATION_SLACK = 1e-2

MIN_GRID_POINTS = 16

PROVENANCES = ('finite-n conjugate', 'lambda-star estimate', 'closed-form')


@dataclass(frozen=True, eq=False)
class IntrinsicVolumeSequence:
    """log_mu[n - 1] holds ln μ_n(0), ..., ln μ_n(n)."""
    n_max: int
    log_mu: tuple

    def __post_init__(self):
        if int(self.n_max) != self.n_max or self.n_max < 1:
            raise ValidationError(f"n_max must be a positive integer, got {self.n_max}")
        if len(self.log_mu) != self.n_max:
            raise ValidationError(f"expected {self.n_max} rows of log_mu, got {len(self.log_mu)}")

        rows = []
        for n, row in enumerate(self.log_mu, start=1):
            arr = np.array(row, dtype=float)
            if arr.shape != (n + 1,):
                raise ValidationError(f"row n={n} must have {n + 1} entries, got shape {arr.shape}")
            if np.any(np.isnan(arr)) or np.any(arr == np.inf):
                raise ValidationError(f"row n={n} contains NaN or +inf")
            if not (np.isfinite(arr[0]) and np.isfinite(arr[-1])):
                raise ValidationError(f"row n={n}: μ_n(0) and μ_n(n) must be positive")
            arr.setflags(write=False)
            rows.append(arr)
        object.__setattr__(self, 'log_mu', tuple(rows))

    def row(self, n):
        if not 1 <= n <= self.n_max:
            raise ValidationError(f"n must lie in [1, {self.n_max}], got {n}")
        return self.log_mu[n - 1]

    @property
    def alpha_hat(self):
        """(1/n_max)·ln μ_{n_max}(n_max)."""
        return float(self.log_mu[-1][-1]) / self.n_max

    @property
    def beta_hat(self):
        """(1/n_max)·ln μ_{n_max}(0)."""
        return float(self.log_mu[-1][0]) / self.n_max


@dataclass(frozen=True, eq=False)
class ConjugateFunction:
    grid: np.ndarray
    values: np.ndarray
    provenance: str
    n_max: int = None
    exact: object = None
    search_intervals: dict = field(default_factory=dict)

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if grid.ndim != 1 or grid.size < 2 or grid.shape != values.shape:
            raise ValidationError("a conjugate needs matching 1-D grid and values with at least two points")
        if np.any(np.diff(grid) <= 0) or grid[0] < 0 or grid[-1] > 1:
            raise ValidationError("conjugate grid must be increasing within [0, 1]")
        if self.provenance not in PROVENANCES:
            raise ValidationError(f"unknown provenance {self.provenance!r}; expected one of {PROVENANCES}")
        object.__setattr__(self, 'grid', grid)
        object.__setattr__(self, 'values', values)

    def evaluate(self, x):
        """Exact value when a closed form is attached, otherwise linear interpolation on the grid."""
        x_arr = np.asarray(x, dtype=float)
        if np.any((x_arr < self.grid[0]) | (x_arr > self.grid[-1])):
            raise ValidationError(f"x={x} is outside the conjugate's domain [{self.grid[0]}, {self.grid[-1]}]")
        result = self.exact(x_arr) if self.exact is not None else np.interp(x_arr, self.grid, self.values)
        return float(result) if np.ndim(result) == 0 else result

    def is_convex(self, tol=SANDWICH_TOL):
        slopes = np.diff(self.values) / np.diff(self.grid)
        return bool(np.all(np.diff(slopes) >= -tol))

    def conjugate_at(self, t):
        """max over grid nodes of t·x - value: the conjugate of the piecewise-linear interpolant."""
        return float(np.max(t * self.grid - self.values))


def cube_intrinsic_sequence(A, n_max):
    """ln μ_n(j) = ln C(n, j) + j ln 2A, the intrinsic volumes of [-A, A]^n."""
    if not math.isfinite(A) or A <= 0:
        raise ValidationError(f"amplitude A must be finite and > 0, got {A}")
    rows = []
    for n in range(1, int(n_max) + 1):
        j = np.arange(n + 1, dtype=float)
        log_binomial = special.gammaln(n + 1.0) - special.gammaln(j + 1.0) - special.gammaln(n - j + 1.0)
        rows.append(log_binomial + j * math.log(2.0 * A))
    return IntrinsicVolumeSequence(int(n_max), tuple(rows))


def degenerate_sequence(n_max):
    """μ_n(j) = 1 for j in {0, n} and 0 otherwise, for which Λ(t) = max(0, t) is not differentiable."""
    rows = []
    for n in range(1, int(n_max) + 1):
        row = np.full(n + 1, -np.inf)
        row[0] = row[-1] = 0.0
        rows.append(row)
    return IntrinsicVolumeSequence(int(n_max), tuple(rows))


def _log_convolve(a, b):
    if a.size > b.size:
        a, b = b, a
    # row i holds ln a_k + ln b_{i-k} for every k, -inf where i - k falls outside b
    i = np.arange(a.size + b.size - 1)[:, None]
    j = i - np.arange(a.size)[None, :]
    inside = (j >= 0) & (j < b.size)
    terms = np.where(inside, a[None, :] + b[np.clip(j, 0, b.size - 1)], -np.inf)
    with np.errstate(divide='ignore'):
        return special.logsumexp(terms, axis=1)


def check_subconvolutive(seq, m, n):
    """True iff (μ_m ⋆ μ_n)(i) >= μ_{m+n}(i)·(1 - 1e-10) for every i."""
    if m < 1 or n < 1 or m + n > seq.n_max:
        raise ValidationError(f"need m, n >= 1 and m + n <= {seq.n_max}, got m={m}, n={n}")
    convolution = _log_convolve(seq.row(m), seq.row(n))
    target = seq.row(m + n)
    slack = math.log1p(-SUBC_REL_TOL)
    with np.errstate(invalid='ignore'):
        ok = (target == -np.inf) | (convolution >= target + slack)
    return bool(np.all(ok))


def check_alexandrov_fenchel(seq, n):
    """μ_n(j)² >= ((j + 1)/j)·μ_n(j - 1)·μ_n(j + 1) for 1 <= j <= n - 1."""
    if n < 2:
        raise ValidationError(f"the Alexandrov-Fenchel check needs n >= 2, got {n}")
    row = seq.row(n)
    j = np.arange(1, n, dtype=float)
    rhs = np.log((j + 1.0) / j) + row[:-2] + row[2:]
    lhs = 2.0 * row[1:-1]
    with np.errstate(invalid='ignore'):
        ok = (rhs == -np.inf) | (lhs - rhs >= -SUBC_REL_TOL * np.maximum(1.0, np.abs(rhs)))
    return bool(np.all(ok))


def g_n_eval(seq, n, t):
    """g_n(t) = (1/n) ln Σ_j μ_n(j) e^{jt}; t may be an array."""
    row = seq.row(n)
    t_arr = np.asarray(t, dtype=float)
    exponents = row[:, None] + np.arange(n + 1)[:, None] * t_arr.ravel()[None, :]
    with np.errstate(divide='ignore'):
        result = special.logsumexp(exponents, axis=0).reshape(t_arr.shape) / n
    return float(result) if result.ndim == 0 else result


def search_interval(x, alpha, beta, g1_at_0):
    """Interval [(β - g_1(0))/x, (g_1(0) - α)/(1 - x)] holding the maximiser of xt - g(t)."""
    return (beta - g1_at_0) / x, (g1_at_0 - alpha) / (1.0 - x)


def conjugate_on_interval(g, x, alpha, beta, g1_at_0, tol=None):
    """g*(x) = sup_t [xt - g(t)] for 0 < x < 1, searched on the bounded interval only."""
    tol = tol or ToleranceConfig()
    if not 0 < x < 1:
        raise ValidationError(f"conjugate_on_interval needs 0 < x < 1, got {x}; use -β or -α at the endpoints")
    lo, hi = search_interval(x, alpha, beta, g1_at_0)
    if lo > hi:
        raise ValidationError(
            f"search interval [{lo}, {hi}] is inverted at x={x}; α={alpha}, β={beta}, g1(0)={g1_at_0} are inconsistent"
        )
    _, value = golden_section_max(lambda t: x * t - g(t), lo, hi, tol)
    return value


def finite_n_conjugate(seq, n, grid_points=129, tol=None, provenance='finite-n conjugate'):
    """g_n* on a uniform grid of [0, 1], with the endpoints -β_n and -α_n taken exactly."""
    tol = tol or ToleranceConfig()
    if int(grid_points) != grid_points or grid_points < MIN_GRID_POINTS:
        raise ValidationError(f"grid_points must be an integer >= {MIN_GRID_POINTS}, got {grid_points}")

    row = seq.row(n)
    alpha, beta = float(row[-1]) / n, float(row[0]) / n
    g1_at_0 = g_n_eval(seq, 1, 0.0)
    grid = np.linspace(0.0, 1.0, int(grid_points))
    values = np.empty_like(grid)
    values[0], values[-1] = -beta, -alpha
    intervals = {}
    for k, x in enumerate(grid[1:-1], start=1):
        intervals[float(x)] = search_interval(x, alpha, beta, g1_at_0)
        values[k] = conjugate_on_interval(lambda t: g_n_eval(seq, n, t), x, alpha, beta, g1_at_0, tol)

    conjugate = ConjugateFunction(grid, values, provenance, n_max=n, search_intervals=intervals)
    if not conjugate.is_convex():
        logging.warning(f"g_{n}* is not convex on the grid; the sequence may not be sub-convolutive")
    return conjugate


def lambda_star_estimate(seq, grid_points=129, tol=None):
    """Λ* estimated as g_{n_max}*, with α and β taken at n_max."""
    logging.info(f"estimating Λ* from g_{seq.n_max}* on {grid_points} grid points")
    return finite_n_conjugate(seq, seq.n_max, grid_points, tol, provenance='lambda-star estimate')


def cube_lambda_star(A, grid_points=129):
    """Closed form Λ*(x) = x ln x + (1 - x) ln(1 - x) - x ln 2A for the cube."""
    if not math.isfinite(A) or A <= 0:
        raise ValidationError(f"amplitude A must be finite and > 0, got {A}")
    log_2a = math.log(2.0 * A)

    def exact(x):
        return special.xlogy(x, x) + special.xlogy(1.0 - x, 1.0 - x) - x * log_2a

    grid = np.linspace(0.0, 1.0, int(grid_points))
    return ConjugateFunction(grid, exact(grid), 'closed-form', exact=exact)


def lambda_sandwich_check(seq, t_grid):
    """max(β̂, t + α̂) <= g_{n_max}(t) <= g_1(t) at every t, within 1e-9."""
    t = np.asarray(t_grid, dtype=float)
    g_top = g_n_eval(seq, seq.n_max, t)
    g_one = g_n_eval(seq, 1, t)
    lower = np.maximum(seq.beta_hat, t + seq.alpha_hat)
    return bool(np.all(lower - SANDWICH_TOL <= g_top) and np.all(g_top <= g_one + SANDWICH_TOL))


def _min_on_interval(lambda_star, lo, hi, tol):
    if lambda_star.exact is not None:
        _, best = golden_section_max(lambda x: -lambda_star.evaluate(x), lo, hi, tol)
        return -best
    inside = lambda_star.grid[(lambda_star.grid > lo) & (lambda_star.grid < hi)]
    candidates = np.concatenate(([lo, hi], inside))
    return float(np.min(lambda_star.evaluate(candidates)))


def ldp_upper_check(seq, interval, n, lambda_star, tol=None, interpolation_slack=INTERPOLATION_SLACK):
    """
    Finite-n large-deviation upper bound: (1/n) ln μ_n({j : j/n ∈ I}) against
    -inf_I Λ*, allowing ln(n + 1)/n plus an interpolation allowance.
    Returns (lhs, rhs, ok).
    """
    tol = tol or ToleranceConfig()
    lo, hi = interval
    if not 0 <= lo <= hi <= 1:
        raise ValidationError(f"interval must be a closed subinterval of [0, 1], got {interval}")
    row = seq.row(n)
    j = np.arange(math.ceil(lo * n - 1e-12), math.floor(hi * n + 1e-12) + 1)
    if j.size == 0:
        raise ValidationError(f"interval {interval} contains no point j/{n}")

    lhs = log_sum_exp(row[j]) / n
    rhs = -_min_on_interval(lambda_star, lo, hi, tol)
    slack = math.log(n + 1) / n + (0.0 if lambda_star.exact is not None else interpolation_slack)
    return lhs, rhs, bool(lhs <= rhs + slack)


def _ell_objective(lambda_star, nu):
    log_2pien = LOG_2PIE + math.log(nu)

    def objective(theta):
        return -lambda_star.evaluate(1.0 - theta) + 0.5 * (theta * log_2pien - float(special.xlogy(theta, theta)))

    return objective


def ell_general_argmax(lambda_star, nu, tol=None):
    """(θ*, ℓ(ν)) for ℓ(ν) = sup_θ [-Λ*(1 - θ) + (θ/2) ln(2πeν/θ)]."""
    tol = tol or ToleranceConfig()
    if not math.isfinite(nu) or nu <= 0:
        raise ValidationError(f"noise power nu must be finite and > 0, got {nu}")
    if lambda_star.grid[0] > 0 or lambda_star.grid[-1] < 1:
        raise ValidationError("Λ* must be defined on all of [0, 1]")
    return golden_section_max(_ell_objective(lambda_star, nu), 0.0, 1.0, tol)


def ell_general(lambda_star, nu, tol=None):
    return ell_general_argmax(lambda_star, nu, tol)[1]
