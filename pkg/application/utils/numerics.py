import logging
import math
import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy import integrate, optimize, special
from tenacity import Retrying, before_sleep_log, retry_if_exception_type, stop_after_attempt

from utils.errors import ConvergenceError, ValidationError

LOG_PI = math.log(math.pi)
LOG_2PIE = math.log(2 * math.pi * math.e)


@dataclass(frozen=True)
class ToleranceConfig:
    """Stopping rule shared by every iterative routine."""
    abs_tol: float = 1e-10
    rel_tol: float = 0.0
    max_iterations: int = 500

    def __post_init__(self):
        if not self.abs_tol > 0:
            raise ValidationError(f"abs_tol must be positive, got {self.abs_tol}")
        if not self.rel_tol >= 0:
            raise ValidationError(f"rel_tol must be nonnegative, got {self.rel_tol}")
        if int(self.max_iterations) != self.max_iterations or self.max_iterations < 1:
            raise ValidationError(f"max_iterations must be a positive integer, got {self.max_iterations}")

    @classmethod
    def from_config(cls, config):
        """Build the default tolerance from a loaded config dict."""
        return cls(
            abs_tol=float(config.get('abs_tol', cls.abs_tol)),
            rel_tol=float(config.get('rel_tol', cls.rel_tol)),
            max_iterations=int(config.get('max_iterations', cls.max_iterations)),
        )

    def with_overrides(self, **changes):
        return replace(self, **{k: v for k, v in changes.items() if v is not None})


def log_gamma(x):
    """ln Γ(x) for x > 0."""
    x_arr = np.asarray(x, dtype=float)
    if np.any(~(x_arr > 0)):
        raise ValidationError(f"log_gamma is defined for x > 0 only, got {x}")
    result = special.gammaln(x_arr)
    return float(result) if result.ndim == 0 else result


def log_unit_ball_volume(j):
    """ln ε_j, the log-volume of the j-dimensional unit ball."""
    j_arr = np.asarray(j)
    if np.any(j_arr < 0):
        raise ValidationError(f"dimension must be nonnegative, got {j}")
    j_arr = j_arr.astype(float)
    result = 0.5 * j_arr * LOG_PI - special.gammaln(0.5 * j_arr + 1.0)
    return float(result) if result.ndim == 0 else result


def log_sum_exp(values):
    """
    ln Σ exp(v_i), shifted by the maximum. Entries equal to -inf stand for log 0;
    an all -inf input returns -inf.
    """
    arr = np.asarray(values, dtype=float).ravel()
    if arr.size == 0:
        raise ValidationError("log_sum_exp needs at least one value")
    if np.any(np.isnan(arr)):
        raise ValidationError("log_sum_exp received NaN")
    with np.errstate(divide='ignore'):
        return float(special.logsumexp(arr))


def binary_entropy(theta):
    """H(θ) in nats, with the continuous extension 0·ln 0 = 0."""
    theta_arr = np.asarray(theta, dtype=float)
    if np.any((theta_arr < 0) | (theta_arr > 1)):
        raise ValidationError(f"binary entropy needs θ in [0, 1], got {theta}")
    result = special.entr(theta_arr) + special.entr(1.0 - theta_arr)
    return float(result) if result.ndim == 0 else result


def gaussian_entropy(variance):
    """Differential entropy ½ ln(2πe·variance) of a Gaussian, nats."""
    if not variance > 0:
        raise ValidationError(f"Gaussian entropy needs positive variance, got {variance}")
    return 0.5 * (LOG_2PIE + math.log(variance))


def philox_generator(seed, shard=0):
    """
    Counter-based Philox generator for (seed, shard). Shards of one seed are
    independent streams, so a Monte-Carlo budget can be split and recombined
    without changing the result.
    """
    seq = np.random.SeedSequence(int(seed), spawn_key=(int(shard),))
    return np.random.Generator(np.random.Philox(seq))


def bisection_root(f, lo, hi, tol):
    """Root of a continuous monotone f on [lo, hi] by bisection."""
    if not lo < hi:
        raise ValidationError(f"bisection bracket must satisfy lo < hi, got [{lo}, {hi}]")
    f_lo, f_hi = f(lo), f(hi)
    if f_lo == 0:
        return lo
    if f_hi == 0:
        return hi
    if np.sign(f_lo) == np.sign(f_hi):
        raise ValidationError(f"no sign change on [{lo}, {hi}]: f(lo)={f_lo}, f(hi)={f_hi}")

    root, info = optimize.bisect(
        f, lo, hi,
        xtol=tol.abs_tol,
        maxiter=tol.max_iterations,
        full_output=True,
        disp=False,
    )
    if not info.converged:
        raise ConvergenceError(
            f"bisection did not converge in {tol.max_iterations} iterations (last bracket midpoint {root})"
        )
    return float(root)


def golden_section_max(f, lo, hi, tol):
    """
    Maximise a unimodal f on [lo, hi]. Uses the bounded Brent search
    (golden-section steps with parabolic acceleration); the endpoints are
    compared explicitly because the search never evaluates them.
    """
    if lo > hi:
        raise ValidationError(f"search interval must satisfy lo <= hi, got [{lo}, {hi}]")
    if lo == hi:
        return float(lo), float(f(lo))

    result = optimize.minimize_scalar(
        lambda x: -f(x),
        bounds=(lo, hi),
        method='bounded',
        options={'xatol': tol.abs_tol, 'maxiter': tol.max_iterations},
    )
    if not result.success:
        raise ConvergenceError(f"maximisation on [{lo}, {hi}] failed: {result.message}")

    candidates = [(float(result.x), -float(result.fun)), (float(lo), float(f(lo))), (float(hi), float(f(hi)))]
    return max(candidates, key=lambda pair: pair[1])


def _truncation_point(f, a, tol):
    # Walk outwards until the integrand drops below abs_tol * 1e-3 of its running maximum
    running_max = abs(f(a))
    step = 1.0
    for _ in range(64):
        for c in np.linspace(a + step / 2, a + step, 4):
            running_max = max(running_max, abs(f(c)))
        if running_max > 0 and abs(f(a + step)) < tol.abs_tol * 1e-3 * running_max:
            return a + step
        step *= 2
    raise ConvergenceError("integrand does not decay; cannot truncate the infinite upper limit")


def adaptive_quadrature(f, a, b, tol, points=None):
    """
    Integral of f over [a, b] by adaptive Gauss-Kronrod subdivision (QUADPACK),
    with max_iterations as the subinterval budget. An infinite upper limit is
    truncated where the integrand has decayed, and the truncation is confirmed
    by integrating to twice the endpoint.
    """
    if not a < b:
        raise ValidationError(f"quadrature needs a < b, got [{a}, {b}]")

    def _quad(upper):
        inner_points = None
        if points is not None:
            inner_points = [p for p in points if a < p < upper] or None
        with warnings.catch_warnings():
            warnings.simplefilter('error', integrate.IntegrationWarning)
            try:
                value, _ = integrate.quad(
                    f, a, upper,
                    epsabs=tol.abs_tol,
                    epsrel=tol.rel_tol,
                    limit=tol.max_iterations,
                    points=inner_points,
                )
            except integrate.IntegrationWarning as e:
                raise ConvergenceError(f"quadrature on [{a}, {upper}] did not converge: {e}") from e
        return value

    if math.isinf(b):
        upper = _truncation_point(f, a, tol)
        value = _quad(upper)
        check = _quad(a + 2 * (upper - a))
        allowed = max(tol.abs_tol, tol.rel_tol * abs(check))
        if abs(check - value) > allowed:
            raise ConvergenceError(
                f"truncated integral moved by {abs(check - value):.3e} when the endpoint was doubled"
            )
        return check

    return _quad(b)


def _power_iterate(matrix, start, tol):
    v = start / np.linalg.norm(start)
    previous = None
    for _ in range(tol.max_iterations):
        w = matrix @ v
        eigenvalue = float(v @ w)
        norm = np.linalg.norm(w)
        if norm == 0:
            raise ConvergenceError("matrix maps the iterate to zero")
        v = w / norm
        if previous is not None and abs(eigenvalue - previous) <= max(tol.abs_tol, tol.rel_tol * abs(eigenvalue)):
            return float(v @ (matrix @ v)), v
        previous = eigenvalue
    raise ConvergenceError(
        f"power iteration did not converge in {tol.max_iterations} iterations "
        "(dominant eigenvalue may be nearly degenerate)"
    )


def power_iteration(matrix, tol, seed=0, restarts=2):
    """
    Dominant eigenpair of a nonnegative square matrix.

    The first attempt starts from the all-ones vector. A failed attempt is
    retried from a positive random vector drawn from philox_generator(seed, attempt).
    """
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
        raise ValidationError(f"power iteration needs a non-empty square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)) or np.any(m < 0):
        raise ValidationError("power iteration needs a finite, entrywise nonnegative matrix")

    size = m.shape[0]
    for attempt in Retrying(
        stop=stop_after_attempt(restarts + 1),
        retry=retry_if_exception_type(ConvergenceError),
        before_sleep=before_sleep_log(logging.getLogger(), logging.WARNING),
        reraise=True,
    ):
        with attempt:
            number = attempt.retry_state.attempt_number
            if number == 1:
                start = np.ones(size)
            else:
                start = philox_generator(seed, number - 1).uniform(0.5, 1.5, size)
            eigenvalue, eigenvector = _power_iterate(m, start, tol)
            return eigenvalue, np.abs(eigenvector)
