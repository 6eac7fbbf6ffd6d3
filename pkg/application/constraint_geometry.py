import logging
import math
from dataclasses import dataclass

import numpy as np

from utils.errors import ValidationError
from utils.numerics import philox_generator

# Above this length prefix sums of x² are accumulated with compensated summation
KAHAN_THRESHOLD = 1000

# Upper bound on floats held per Monte-Carlo shard
SHARD_BUDGET = 2_000_000


@dataclass(frozen=True)
class SigmaRhoParams:
    sigma: float
    rho: float

    def __post_init__(self):
        if not math.isfinite(self.sigma) or self.sigma < 0:
            raise ValidationError(f"sigma must be finite and >= 0, got {self.sigma}")
        if not math.isfinite(self.rho) or self.rho <= 0:
            raise ValidationError(f"rho must be finite and > 0, got {self.rho}")

    def scaled(self, alpha):
        """Parameters of the √α-scaled set: (ασ, αρ)."""
        return SigmaRhoParams(alpha * self.sigma, alpha * self.rho)


@dataclass(frozen=True)
class Codeword:
    symbols: np.ndarray

    def __post_init__(self):
        arr = np.array(self.symbols, dtype=float).ravel()
        if arr.size < 1:
            raise ValidationError("a codeword needs at least one symbol")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("codeword symbols must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, 'symbols', arr)

    def __len__(self):
        return self.symbols.size

    @property
    def energy(self):
        return float(np.sum(self.symbols ** 2))


@dataclass(frozen=True)
class StateTrace:
    states: np.ndarray

    @property
    def minimum(self):
        return float(self.states.min())


def _as_codeword(cw):
    return cw if isinstance(cw, Codeword) else Codeword(cw)


def state_trace(params, cw):
    """Battery states σ_0..σ_n under the min-recursion; states may go negative."""
    cw = _as_codeword(cw)
    states = np.empty(len(cw) + 1)
    state = params.sigma
    states[0] = state
    for i, x in enumerate(cw.symbols):
        state = min(params.sigma, state + params.rho - x * x)
        states[i + 1] = state
    return StateTrace(states)


def is_feasible(params, cw):
    """True iff no battery state is negative."""
    return bool(np.all(state_trace(params, cw).states >= 0))


def _prefix_energy(symbols):
    squares = symbols * symbols
    if squares.size <= KAHAN_THRESHOLD:
        return np.concatenate(([0.0], np.cumsum(squares)))

    prefix = np.empty(squares.size + 1)
    prefix[0] = 0.0
    total = 0.0
    compensation = 0.0
    for i, value in enumerate(squares):
        y = value - compensation
        t = total + y
        compensation = (t - total) - y
        total = t
        prefix[i + 1] = total
    return prefix


def window_check(params, cw):
    """Direct check of every window constraint, O(n²) comparisons over prefix sums."""
    cw = _as_codeword(cw)
    prefix = _prefix_energy(cw.symbols)
    n = len(cw)
    for k in range(n):
        window_energy = prefix[k + 1:] - prefix[k]
        allowance = params.sigma + params.rho * np.arange(1, n - k + 1)
        if np.any(window_energy > allowance):
            return False
    return True


def feasible_mask(params, batch):
    """Row-wise feasibility of a (samples, n) array of codewords."""
    x = np.asarray(batch, dtype=float)
    if x.ndim != 2:
        raise ValidationError(f"expected a 2-D batch of codewords, got shape {x.shape}")
    state = np.full(x.shape[0], params.sigma)
    ok = np.ones(x.shape[0], dtype=bool)
    for column in x.T:
        state = np.minimum(params.sigma, state + params.rho - column * column)
        ok &= state >= 0
    return ok


def peak_power_cube_contained(params, cw):
    """True when every |x_i| <= √ρ, which alone guarantees feasibility."""
    cw = _as_codeword(cw)
    return bool(np.all(cw.symbols * cw.symbols <= params.rho))


def burstiness(cw):
    """
    Largest window excess Σ x_j² - (l - k) over 0 <= k < l <= n (ρ = 1 normalisation).
    Never below -1.
    """
    cw = _as_codeword(cw)
    walk = np.concatenate(([0.0], np.cumsum(cw.symbols * cw.symbols - 1.0)))
    lowest_before = np.minimum.accumulate(walk[:-1])
    return float(np.max(walk[1:] - lowest_before))


def in_burstiness_set(cw, sigma):
    """Membership in A_n(σ): total energy at most n and burstiness at most σ."""
    cw = _as_codeword(cw)
    return cw.energy <= len(cw) and burstiness(cw) <= sigma


def pad_and_concat(params, blocks):
    """
    Concatenate feasible blocks, each followed by ⌈σ/ρ⌉ zeros so the battery
    is full again before the next block starts.
    """
    if not blocks:
        raise ValidationError("pad_and_concat needs at least one block")
    padding = math.ceil(params.sigma / params.rho)
    pieces = []
    for index, block in enumerate(blocks):
        block = _as_codeword(block)
        if not is_feasible(params, block):
            raise ValidationError(f"block {index} is infeasible under (σ={params.sigma}, ρ={params.rho})")
        pieces.append(block.symbols)
        pieces.append(np.zeros(padding))
    return Codeword(np.concatenate(pieces))


def shard_sizes(samples, n):
    """Split a Monte-Carlo budget into shards of at most SHARD_BUDGET floats each."""
    per_shard = max(1, SHARD_BUDGET // n)
    sizes = [per_shard] * (samples // per_shard)
    if samples % per_shard:
        sizes.append(samples % per_shard)
    return sizes


def burstiness_walk_probability(n, alpha, samples, seed=0):
    """
    Monte-Carlo estimate of P(burstiness <= α√n and Σ X_i² <= n) for i.i.d.
    standard normal X_1..X_n. Shard s draws from philox_generator(seed, s), so the
    estimate depends only on (n, alpha, samples, seed).
    """
    if n < 1 or samples < 1:
        raise ValidationError(f"need n >= 1 and samples >= 1, got n={n}, samples={samples}")

    threshold = alpha * math.sqrt(n)
    hits = 0
    for shard, size in enumerate(shard_sizes(samples, n)):
        rng = philox_generator(seed, shard)
        x = rng.standard_normal((size, n))
        walk = np.cumsum(x * x - 1.0, axis=1)
        walk = np.concatenate((np.zeros((size, 1)), walk), axis=1)
        lowest_before = np.minimum.accumulate(walk[:, :-1], axis=1)
        excess = np.max(walk[:, 1:] - lowest_before, axis=1)
        # walk[:, -1] <= 0  <=>  Σ x² <= n
        hits += int(np.count_nonzero((excess <= threshold) & (walk[:, -1] <= 0)))
        logging.debug(f"burstiness walk shard {shard}: {size} samples, {hits} hits so far")

    return hits / samples
