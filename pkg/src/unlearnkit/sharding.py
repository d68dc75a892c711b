"""Probability that uniformly sharded training leaves no shard untouched.

With n points assigned to s shards uniformly i.i.d., the probability that a
random n-point change set hits every shard is, by inclusion-exclusion over
the shards it misses,

    p(s, n) = sum_{i=0}^{s} (-1)^i C(s, i) * ((s - i) / s)^n.

When p is close to 1, sharding buys nothing: every member must retrain.
"""

import math
from fractions import Fraction

import numpy as np

_EXACT_SHARD_LIMIT = 64


def prob_all_affected(s: int, n: int) -> float:
    """Exact for s <= 64 via rational arithmetic. Above that, an
    occupied-shard-count recurrence with nonnegative terms avoids the
    catastrophic cancellation of the alternating sum; the compensated float
    sum remains only for sizes where the recurrence is too slow (there the
    alternating terms decay and cancellation is mild)."""
    if s < 1 or n < 0:
        raise ValueError(f"need s >= 1 and n >= 0, got s={s}, n={n}")
    if n < s:
        return 0.0
    if s == 1:
        return 1.0
    if s <= _EXACT_SHARD_LIMIT:
        total = Fraction(0)
        for i in range(s + 1):
            total += (-1) ** i * math.comb(s, i) * Fraction(s - i, s) ** n
        return float(total)
    if n * s <= 500_000_000:
        occ = np.zeros(s + 1)
        occ[0] = 1.0
        stay = np.arange(s + 1) / s
        grow = 1.0 - stay[:-1]
        for _ in range(n):
            occ[1:] = occ[1:] * stay[1:] + occ[:-1] * grow
            occ[0] = 0.0
        return float(occ[s])
    terms = [(-1.0) ** i * math.comb(s, i) * ((s - i) / s) ** n
             for i in range(s + 1)]
    return min(1.0, max(0.0, math.fsum(terms)))


def monte_carlo_all_affected(s: int, n: int, trials: int, seed: int = 0,
                             chunk: int = 4096) -> float:
    """Empirical estimate: draw `trials` assignments of n points to s shards
    and count how often all shards are hit."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if s < 1 or n < 0:
        raise ValueError(f"need s >= 1 and n >= 0, got s={s}, n={n}")
    rng = np.random.default_rng(seed)
    hits = 0
    done = 0
    while done < trials:
        b = min(chunk, trials - done)
        draws = rng.integers(0, s, size=(b, n))
        occupied = np.zeros((b, s), dtype=bool)
        occupied[np.arange(b)[:, None], draws] = True
        hits += int(occupied.all(axis=1).sum())
        done += b
    return hits / trials


def min_points_for_threshold(s: int, threshold: float) -> int:
    """Smallest n with prob_all_affected(s, n) >= threshold.

    Uses the monotonicity of p(s, n) in n: doubling search for an upper
    bracket, then binary search.
    """
    if not 0.0 < threshold <= 1.0:
        raise ValueError(f"threshold must lie in (0, 1], got {threshold}")
    if s == 1:
        return 1
    hi = s
    while prob_all_affected(s, hi) < threshold:
        hi *= 2
        if hi > 10 ** 9:
            raise ValueError(
                f"threshold {threshold} not reached below n=1e9 for s={s}")
    lo = s - 1  # p(s, s-1) = 0 < threshold
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if prob_all_affected(s, mid) >= threshold:
            hi = mid
        else:
            lo = mid
    return hi
