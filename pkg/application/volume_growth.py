import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from constraint_geometry import feasible_mask, shard_sizes
from utils.config_loading import get_cache
from utils.errors import ConvergenceError, ValidationError
from utils.numerics import LOG_2PIE, ToleranceConfig, philox_generator, power_iteration

LN2 = math.log(2.0)

DEFAULT_GAMMA = 1e-6
DEFAULT_LADDER = (128, 256, 512, 1024)
DEFAULT_LADDER_TOL = 1e-4
DEFAULT_RULE = 'product'
RULES = ('left', 'product')

MIN_GRID = 8

# Power-iteration budget per squared unit of state-interval length; the spectral gap closes like 1/(σ + 1)²
POWER_BUDGET_PER_UNIT2 = 20


@dataclass(frozen=True)
class KernelSpec:
    sigma: float
    gamma: float = DEFAULT_GAMMA

    def __post_init__(self):
        if not math.isfinite(self.sigma) or self.sigma < 0:
            raise ValidationError(f"sigma must be finite and >= 0, got {self.sigma}")
        if not 0 <= self.gamma < 1:
            raise ValidationError(f"gamma must lie in [0, 1), got {self.gamma}")

    @property
    def length(self):
        """Length σ + 1 - γ of the state interval."""
        return self.sigma + 1.0 - self.gamma


@dataclass(frozen=True)
class DiscretizedOperator:
    grid_step: float
    size: int
    matrix: np.ndarray
    rule: str = 'left'


@dataclass(frozen=True)
class GrowthRateResult:
    value: float
    grid_sizes_used: list = field(default_factory=list)
    per_grid_values: list = field(default_factory=list)
    gamma: float = DEFAULT_GAMMA
    converged: bool = True
    rule: str = DEFAULT_RULE
    sandwich: tuple = (math.nan, math.nan)
    richardson: float = None

    def shifted(self, offset):
        """The same result with every rate moved by `offset` nats."""
        return replace(
            self,
            value=self.value + offset,
            per_grid_values=[value + offset for value in self.per_grid_values],
            sandwich=(self.sandwich[0] + offset, self.sandwich[1] + offset),
            richardson=None if self.richardson is None else self.richardson + offset,
        )


def kernel_eval(spec, x, t):
    """
    Kernel A(x, t) of the state-density operator.

    A(x, t) = 1/√(x + 1 - t) for 0 <= x < σ and 0 <= t <= x + 1 - γ,
    A(x, t) = 1/√(σ + 1 - t) for σ <= x <= σ + 1 - γ,
    and 0 elsewhere. With γ > 0 the value is bounded by 1/√γ.
    """
    upper = spec.length
    if not (0 <= x <= upper and 0 <= t <= upper):
        raise ValidationError(f"kernel arguments must lie in [0, {upper}]², got x={x}, t={t}")

    if x < spec.sigma:
        if t > x + 1.0 - spec.gamma:
            return 0.0
        level = x + 1.0
    else:
        level = spec.sigma + 1.0
    gap = level - t
    if gap <= 0:
        # only reachable with γ = 0, on the singular line
        return math.inf
    return 1.0 / math.sqrt(gap)


def _kernel_grid(spec, xs, ts):
    x = xs[:, None]
    t = ts[None, :]
    level = np.where(x < spec.sigma, x + 1.0, spec.sigma + 1.0)
    support = np.where(x < spec.sigma, t <= x + 1.0 - spec.gamma, True)
    gap = level - t
    with np.errstate(divide='ignore', invalid='ignore'):
        values = np.where(support & (gap > 0), 1.0 / np.sqrt(np.where(gap > 0, gap, 1.0)), 0.0)
    return values


def _cell_integrals(spec, xs, edges):
    # exact ∫ A(x_i, t) dt over [edges[j], edges[j+1]], using ∫ (u - t)^{-1/2} dt = -2√(u - t)
    x = xs[:, None]
    a = edges[None, :-1]
    b = edges[None, 1:]
    below = x < spec.sigma
    level = np.where(below, x + 1.0, spec.sigma + 1.0)
    cap = np.where(below, x + 1.0 - spec.gamma, spec.length)
    top = np.minimum(b, cap)
    inside = a < top
    safe_top = np.where(inside, top, a)
    values = 2.0 * (np.sqrt(np.maximum(level - a, 0.0)) - np.sqrt(np.maximum(level - safe_top, 0.0)))
    return np.where(inside, values, 0.0)


def discretize_operator(spec, grid_n, rule='left'):
    """
    Matrix approximation of the operator on a uniform grid with step
    h = (σ + 1 - γ)/grid_n.

    rule="left" samples the kernel at the grid_n + 1 nodes i·h, giving the
    (grid_n + 1)-square matrix with entries h·A(i·h, j·h). With γ = 0 the
    singular node on the line t = σ + 1 carries no weight.

    rule="product" uses grid_n cells with midpoint nodes; entry (i, j) is the
    exact integral of A(x_i, ·) over cell j, so the square-root singularity
    and the γ-truncated support are integrated exactly.
    """
    if int(grid_n) != grid_n or grid_n < MIN_GRID:
        raise ValidationError(f"grid_n must be an integer >= {MIN_GRID}, got {grid_n}")
    if rule not in RULES:
        raise ValidationError(f"unknown discretization rule {rule!r}; expected one of {RULES}")

    grid_n = int(grid_n)
    h = spec.length / grid_n
    if rule == 'left':
        nodes = h * np.arange(grid_n + 1)
        values = _kernel_grid(spec, nodes, nodes)
        matrix = h * values
    else:
        edges = h * np.arange(grid_n + 1)
        midpoints = h * (np.arange(grid_n) + 0.5)
        matrix = _cell_integrals(spec, midpoints, edges)

    logging.debug(f"discretized kernel σ={spec.sigma}, γ={spec.gamma}: {matrix.shape[0]} nodes, rule={rule}")
    return DiscretizedOperator(grid_step=h, size=matrix.shape[0], matrix=matrix, rule=rule)


def dominant_eigenpair(operator, tol):
    """
    Dominant eigenvalue and left eigenvector of the discretised operator.
    The eigenvector, normalised to unit sum, is the direction of the
    stationary state density on the grid.
    """
    length = operator.grid_step * operator.size
    budget = max(tol.max_iterations, math.ceil(POWER_BUDGET_PER_UNIT2 * length * length))
    eigenvalue, vector = power_iteration(operator.matrix.T, tol.with_overrides(max_iterations=budget))
    return eigenvalue, vector / vector.sum()


def spectral_growth_rate(spec, grid_n, tol, rule=DEFAULT_RULE):
    """ln of the dominant eigenvalue of the grid_n discretisation."""
    eigenvalue, _ = dominant_eigenpair(discretize_operator(spec, grid_n, rule), tol)
    if not eigenvalue > 0:
        raise ConvergenceError(f"dominant eigenvalue {eigenvalue} is not positive")
    return math.log(eigenvalue)


def sandwich_eta(sigma, gamma):
    return gamma + 2.0 * math.sqrt(sigma + 1.0) * math.sqrt(gamma)


def gamma_sandwich(sigma, gamma, v1_fn):
    """
    Bounds on the γ-truncated rate in terms of the untruncated one:
    v1(σ/(1 - η)) + ½ ln(1 - η) <= v1_γ(σ) <= v1(σ), η = γ + 2√(σ + 1)·√γ.
    """
    eta = sandwich_eta(sigma, gamma)
    if eta >= 1:
        raise ValidationError(f"gamma={gamma} is too large for sigma={sigma}: eta={eta:.4g} >= 1")
    lower = v1_fn(sigma / (1.0 - eta)) + 0.5 * math.log1p(-eta)
    upper = v1_fn(sigma)
    return lower, upper


def _cache_key(sigma, gamma, ladder, ladder_tol, rule, tol):
    return f"v1:{sigma!r}:{gamma!r}:{tuple(ladder)}:{ladder_tol!r}:{rule}:{tol.abs_tol!r}:{tol.rel_tol!r}:{tol.max_iterations}"


def v1(sigma, gamma=DEFAULT_GAMMA, tol=None, ladder=DEFAULT_LADDER, ladder_tol=DEFAULT_LADDER_TOL,
       rule=DEFAULT_RULE, strict=True):
    """
    Growth rate v1(σ) = v(σ, 1).

    Runs spectral_growth_rate over the grid ladder until two successive
    values differ by at most ladder_tol. An exhausted ladder raises
    ConvergenceError, or with strict=False logs a warning and returns the
    finest value flagged converged=False. The reported sandwich is the
    interval that must contain the untruncated v1(σ): since v1 increases,
    v1_γ(σ) <= v1(σ) <= v1_γ(σ) - ½ ln(1 - η).
    """
    tol = tol or ToleranceConfig()
    if not math.isfinite(sigma) or sigma < 0:
        raise ValidationError(f"sigma must be finite and >= 0, got {sigma}")
    if not 0 <= gamma < 1:
        raise ValidationError(f"gamma must lie in [0, 1), got {gamma}")

    if sigma == 0:
        return GrowthRateResult(value=LN2, gamma=gamma, converged=True, rule='analytic', sandwich=(LN2, LN2))

    cache = get_cache()
    key = _cache_key(sigma, gamma, ladder, ladder_tol, rule, tol)
    result = cache.get(key)
    if result is None:
        result = _run_ladder(sigma, gamma, tol, ladder, ladder_tol, rule)
        cache.set(key, result)

    if not result.converged:
        values = result.per_grid_values
        gap = abs(values[-1] - values[-2]) if len(values) >= 2 else math.nan
        message = (
            f"v1(σ={sigma}) grid ladder {list(ladder)} exhausted; "
            f"last successive difference {gap:.3e} > {ladder_tol:.1e}"
        )
        if strict:
            raise ConvergenceError(message)
        logging.warning(message)
    return result


def _run_ladder(sigma, gamma, tol, ladder, ladder_tol, rule):
    eta = sandwich_eta(sigma, gamma)
    if eta >= 1:
        raise ValidationError(f"gamma={gamma} is too large for sigma={sigma}: eta={eta:.4g} >= 1")

    spec = KernelSpec(sigma, gamma)
    sizes, values = [], []
    converged = False
    for grid_n in sorted(ladder):
        value = spectral_growth_rate(spec, grid_n, tol, rule)
        sizes.append(grid_n)
        values.append(value)
        logging.info(f"v1(σ={sigma}) grid {grid_n}: {value:.8f}")
        if len(values) >= 2 and abs(values[-1] - values[-2]) <= ladder_tol:
            converged = True
            break

    value = values[-1]
    return GrowthRateResult(
        value=value,
        grid_sizes_used=sizes,
        per_grid_values=values,
        gamma=gamma,
        converged=converged,
        rule=rule,
        sandwich=(value, value - 0.5 * math.log1p(-eta)),
        richardson=2.0 * values[-1] - values[-2] if len(values) >= 2 else None,
    )


def v(params, gamma=DEFAULT_GAMMA, tol=None, **ladder_options):
    """v(σ, ρ) = ½ ln ρ + v1(σ/ρ)."""
    result = v1(params.sigma / params.rho, gamma, tol, **ladder_options)
    return result.shifted(0.5 * math.log(params.rho))


def simple_v_bounds(params):
    """Cube and ball bounds ln 2√ρ <= v(σ, ρ) <= ½ ln 2πeρ."""
    return LN2 + 0.5 * math.log(params.rho), 0.5 * (LOG_2PIE + math.log(params.rho))


def mc_log_volume(params, n, samples, seed=0):
    """
    Rejection-sampling estimate of (1/n)·ln Vol(S_n(σ, ρ)).

    Points are drawn uniformly from the box [-√(σ+ρ), √(σ+ρ)]^n, which
    contains the set since every single symbol obeys x_i² <= σ + ρ. Returns
    the estimate and its delta-method standard error √((1 - p)/(p·N))/n.
    """
    if int(n) != n or n < 1:
        raise ValidationError(f"n must be a positive integer, got {n}")
    if int(samples) != samples or samples < 1:
        raise ValidationError(f"samples must be a positive integer, got {samples}")
    if samples < 10_000:
        logging.warning(f"mc_log_volume with only {samples} samples; the standard error will be large")
    if n > 16:
        logging.warning(f"mc_log_volume at n={n}: the hit rate decays exponentially in n")

    n, samples = int(n), int(samples)
    half_width = math.sqrt(params.sigma + params.rho)
    hits = 0
    for shard, size in enumerate(shard_sizes(samples, n)):
        rng = philox_generator(seed, shard)
        batch = rng.uniform(-half_width, half_width, (size, n))
        hits += int(np.count_nonzero(feasible_mask(params, batch)))

    if hits == 0:
        raise ConvergenceError(f"no feasible samples out of {samples} at n={n}; increase samples")

    rate = hits / samples
    estimate = (math.log(rate) + n * math.log(2.0 * half_width)) / n
    std_error = math.sqrt((1.0 - rate) / (rate * samples)) / n
    logging.debug(f"mc_log_volume n={n}: hit rate {rate:.5f}, estimate {estimate:.5f} ± {std_error:.5f}")
    return estimate, std_error
