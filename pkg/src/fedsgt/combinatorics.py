"""Exact combinatorial primitives: harmonic numbers, binomials, Stirling
partition numbers.

Everything here is exact. Harmonic numbers are rationals, binomials and
Stirling numbers are arbitrary-precision integers. Callers convert to float
only at the very end of a closed-form evaluation, which keeps the alternating
sums downstream free of cancellation error.
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache

# Stirling values are memoized; the table is bounded so a buggy caller cannot
# silently grow an unbounded cache.
MAX_STIRLING_N = 256


def harmonic(n: int) -> Fraction:
    """H_n = 1 + 1/2 + ... + 1/n as an exact rational. n must be >= 1."""
    if not isinstance(n, int) or isinstance(n, bool):
        raise TypeError(f"harmonic: n must be an int, got {type(n).__name__}")
    if n < 1:
        raise ValueError(f"harmonic: n must be >= 1, got {n}")
    return sum((Fraction(1, i) for i in range(1, n + 1)), Fraction(0))


def binomial(n: int, k: int) -> int:
    """C(n, k); zero when k > n. Both arguments must be nonnegative."""
    if n < 0 or k < 0:
        raise ValueError(f"binomial: arguments must be nonnegative, got ({n}, {k})")
    return math.comb(n, k)


@lru_cache(maxsize=None)
def _stirling2(r: int, m: int) -> int:
    if m == 0:
        return 1 if r == 0 else 0
    if m > r:
        return 0
    if m == r:
        return 1
    # S(r, m) = m * S(r-1, m) + S(r-1, m-1)
    return m * _stirling2(r - 1, m) + _stirling2(r - 1, m - 1)


def stirling2(r: int, m: int) -> int:
    """Stirling number of the second kind: partitions of r items into m
    nonempty unlabeled blocks. Zero when m > r; S(0, 0) = 1."""
    if r < 0 or m < 0:
        raise ValueError(f"stirling2: arguments must be nonnegative, got ({r}, {m})")
    if r > MAX_STIRLING_N:
        raise ValueError(f"stirling2: r is capped at {MAX_STIRLING_N}, got {r}")
    return _stirling2(r, m)
