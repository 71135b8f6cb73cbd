"""Monte Carlo estimators that cross-check every closed form.

Each estimator simulates the mechanism directly (draw requests, watch
coverage) and never reuses the formula it is checking. Trials are split into
fixed-size chunks; chunk i draws from a PCG64 stream keyed by (seed, tag,
params, i) and chunk statistics are merged in index order, so estimates are
bit-reproducible for a given (seed, trials) no matter how many workers ran
the chunks.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import analytics
from .sequencing import cyclic_span

CHUNK_TRIALS = 8192
_BLOCK = 64  # draws per vectorized coverage step

_TAG_DELETION_SGT = 1
_TAG_DELETION_CIO = 2
_TAG_SPAN = 3
_TAG_REMAINING = 4
_TAG_COMM = 5


@dataclass(frozen=True)
class MCConfig:
    trials: int = 200_000
    seed: int = 0
    confidence_k: float = 3.0

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if self.confidence_k <= 0:
            raise ValueError(f"confidence_k must be positive, got {self.confidence_k}")


@dataclass(frozen=True)
class MCEstimate:
    mean: float
    stderr: float
    trials: int

    def zscore(self, reference: float) -> float:
        """Standardized distance to a reference value; 0 when the estimate
        matches a zero-variance quantity exactly, inf when it cannot."""
        diff = self.mean - reference
        if self.stderr == 0 or not np.isfinite(self.stderr):
            if diff == 0:
                return 0.0
            return float("inf") if self.stderr == 0 else 0.0
        return diff / self.stderr

    def consistent_with(self, reference: float, k: float = 3.0) -> bool:
        return abs(self.zscore(reference)) <= k


def _estimate(key: tuple[int, ...], cfg: MCConfig, workers: int,
              sampler: Callable[[np.random.Generator, int], np.ndarray]) -> MCEstimate:
    chunks = []
    done = 0
    while done < cfg.trials:
        n = min(CHUNK_TRIALS, cfg.trials - done)
        chunks.append((len(chunks), n))
        done += n

    def run(spec: tuple[int, int]) -> tuple[float, float, int]:
        index, n = spec
        rng = np.random.Generator(np.random.PCG64(
            np.random.SeedSequence((cfg.seed, *key, index))))
        values = np.asarray(sampler(rng, n), dtype=np.float64)
        return float(values.sum()), float(np.square(values).sum()), n

    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            stats = list(pool.map(run, chunks))
    else:
        stats = [run(c) for c in chunks]

    total = sum(s for s, _, _ in stats)
    total_sq = sum(q for _, q, _ in stats)
    n = sum(m for _, _, m in stats)
    mean = total / n
    if n < 2:
        return MCEstimate(mean=mean, stderr=float("inf"), trials=n)
    var = max(0.0, (total_sq - n * mean * mean) / (n - 1))
    return MCEstimate(mean=mean, stderr=float(np.sqrt(var / n)), trials=n)


# ---------------------------------------------------------------------------
# Coverage samplers
# ---------------------------------------------------------------------------


def _coverage_times(rng: np.random.Generator, n: int, universe: int,
                    heads: list[int]) -> np.ndarray:
    """Per trial: uniform draws over [0, universe) until every head has been
    seen; returns the number of draws needed."""
    head_bit = np.zeros(universe, dtype=np.int64)
    for i, h in enumerate(heads):
        head_bit[h] = 1 << i
    full = (1 << len(heads)) - 1
    times = np.zeros(n, dtype=np.int64)
    seen = np.zeros(n, dtype=np.int64)
    active = np.arange(n)
    base = 0
    while active.size:
        draws = rng.integers(0, universe, size=(active.size, _BLOCK))
        bits = head_bit[draws]
        np.bitwise_or.accumulate(bits, axis=1, out=bits)
        bits |= seen[active, None]
        covered = bits == full
        done = covered[:, -1]
        first = covered.argmax(axis=1)
        times[active[done]] = base + first[done] + 1
        seen[active] = bits[:, -1]
        active = active[~done]
        base += _BLOCK
    return times.astype(np.float64)


def _finite_coverage_times(rng: np.random.Generator, n: int, group_count: int,
                           slices_per_group: int, heads: list[int]) -> np.ndarray:
    """Finite-population variant: draw slices without replacement; a head is
    covered once any of its slices is drawn."""
    m = group_count * slices_per_group
    order = np.tile(np.arange(m), (n, 1))
    order = rng.permuted(order, axis=1)
    groups = order // slices_per_group
    head_bit = np.zeros(group_count, dtype=np.int64)
    for i, h in enumerate(heads):
        head_bit[h] = 1 << i
    full = (1 << len(heads)) - 1
    bits = head_bit[groups]
    np.bitwise_or.accumulate(bits, axis=1, out=bits)
    return (bits == full).argmax(axis=1).astype(np.float64) + 1.0


def _rotation_heads(group_count: int, budget: int) -> list[int]:
    return [(-t) % group_count for t in range(min(group_count, budget))]


def mc_deletion_rate_fedsgt(group_count: int, budget: int, cfg: MCConfig,
                            workers: int = 1,
                            slices_per_group: int | None = None) -> MCEstimate:
    """Requests until every rotation-head group is hit. The default draws
    groups uniformly (infinite-population model); ``slices_per_group``
    switches to drawing that many slices per group without replacement."""
    heads = _rotation_heads(group_count, budget)
    if slices_per_group is None:
        sampler = lambda rng, n: _coverage_times(rng, n, group_count, heads)
    else:
        sampler = lambda rng, n: _finite_coverage_times(
            rng, n, group_count, slices_per_group, heads)
    return _estimate((_TAG_DELETION_SGT, group_count, budget,
                      slices_per_group or 0), cfg, workers, sampler)


def mc_deletion_rate_fedcio(clusters: int, cfg: MCConfig,
                            workers: int = 1) -> MCEstimate:
    """Requests until every cluster is hit: full coupon collection."""
    heads = list(range(clusters))
    return _estimate((_TAG_DELETION_CIO, clusters), cfg, workers,
                     lambda rng, n: _coverage_times(rng, n, clusters, heads))


# ---------------------------------------------------------------------------
# Span, remaining data, communication cost
# ---------------------------------------------------------------------------


def _span_table(group_count: int) -> np.ndarray:
    """cyclic_span for every occupancy bitmask; usable for small L."""
    table = np.zeros(1 << group_count, dtype=np.int64)
    for mask in range(1, 1 << group_count):
        deleted = [g for g in range(group_count) if mask >> g & 1]
        table[mask] = cyclic_span(group_count, deleted)
    return table


def _span_samples(rng: np.random.Generator, n: int, group_count: int,
                  requests: int, table: np.ndarray | None) -> np.ndarray:
    draws = rng.integers(0, group_count, size=(n, requests))
    if table is not None:
        masks = np.bitwise_or.reduce(1 << draws, axis=1)
        return table[masks].astype(np.float64)
    return np.array([cyclic_span(group_count, set(row)) for row in draws],
                    dtype=np.float64)


def mc_expected_span(group_count: int, requests: int, cfg: MCConfig,
                     workers: int = 1) -> MCEstimate:
    """Cyclic span of the set hit by uniform requests."""
    if requests < 1:
        raise ValueError(f"requests must be >= 1, got {requests}")
    table = _span_table(group_count) if group_count <= 16 else None
    return _estimate((_TAG_SPAN, group_count, requests), cfg, workers,
                     lambda rng, n: _span_samples(rng, n, group_count, requests, table))


def mc_expected_remaining(method: str, total_samples: int, units: int,
                          requests: int, cfg: MCConfig,
                          workers: int = 1) -> MCEstimate:
    """Remaining serviceable data after ``requests`` uniform deletions.

    FedSGT: best surviving prefix covers L - span groups of |D|/L samples.
    FedCIO: untouched clusters keep their full |D|/c shares.
    """
    if requests < 1:
        raise ValueError(f"requests must be >= 1, got {requests}")
    name = method.strip().lower()
    if name == analytics.METHOD_FEDSGT.lower():
        table = _span_table(units) if units <= 16 else None

        def sampler(rng: np.random.Generator, n: int) -> np.ndarray:
            spans = _span_samples(rng, n, units, requests, table)
            return total_samples / units * (units - spans)
    elif name == analytics.METHOD_FEDCIO.lower():
        def sampler(rng: np.random.Generator, n: int) -> np.ndarray:
            draws = rng.integers(0, units, size=(n, requests))
            hit = np.zeros((n, units), dtype=bool)
            hit[np.arange(n)[:, None], draws] = True
            return total_samples / units * (units - hit.sum(axis=1))
    else:
        raise ValueError(f"unknown method {method!r}")
    return _estimate((_TAG_REMAINING, 1 if name == "fedsgt" else 2, units,
                      requests, total_samples), cfg, workers, sampler)


def mc_comm_cost(group_count: int, slices_per_client: int, cfg: MCConfig,
                 workers: int = 1) -> MCEstimate:
    """Per-client rounds across all rotations: a client with slices assigned
    independently uniformly joins each rotation at its first owned group."""

    def sampler(rng: np.random.Generator, n: int) -> np.ndarray:
        draws = rng.integers(0, group_count, size=(n, slices_per_client))
        owned = np.zeros((n, group_count), dtype=bool)
        owned[np.arange(n)[:, None], draws] = True
        total = np.zeros(n, dtype=np.float64)
        positions = np.arange(group_count)
        for t in range(group_count):
            entry = np.where(owned, (positions[None, :] + t) % group_count + 1,
                             group_count + 1).min(axis=1)
            total += group_count - entry + 1
        return total

    return _estimate((_TAG_COMM, group_count, slices_per_client), cfg, workers,
                     sampler)


# ---------------------------------------------------------------------------
# Validation grid
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GridRow:
    quantity: str
    params: str
    closed_form: float
    estimate: MCEstimate

    @property
    def zscore(self) -> float:
        return self.estimate.zscore(self.closed_form)


def validation_grid(cfg: MCConfig, workers: int = 1,
                    total_samples: int = 50_000) -> list[GridRow]:
    """The standard closed-form-versus-simulation sweep: deletion rates,
    spans, remaining data, and communication cost over a small grid."""
    rows: list[GridRow] = []

    def add(quantity: str, params: str, closed: float, est: MCEstimate) -> None:
        rows.append(GridRow(quantity=quantity, params=params,
                            closed_form=closed, estimate=est))

    group_counts = (4, 6, 10)
    request_counts = (1, 3, 5, 10, 20)
    cluster_counts = (2, 5)
    slice_counts = (1, 2, 5)

    for L in group_counts:
        for B in sorted({2, L}):
            add("deletion_rate_fedsgt", f"L={L};B={B}",
                analytics.deletion_rate_fedsgt(L, B),
                mc_deletion_rate_fedsgt(L, B, cfg, workers))
    for c in cluster_counts:
        add("deletion_rate_fedcio", f"c={c}",
            analytics.deletion_rate_fedcio(c),
            mc_deletion_rate_fedcio(c, cfg, workers))
    for L in group_counts:
        for r in request_counts:
            add("expected_span", f"L={L};r={r}",
                analytics.expected_span(L, r),
                mc_expected_span(L, r, cfg, workers))
    for L in group_counts:
        for r in request_counts:
            add("expected_remaining_fedsgt", f"D={total_samples};L={L};r={r}",
                analytics.expected_remaining_fedsgt(total_samples, L, r),
                mc_expected_remaining("FedSGT", total_samples, L, r, cfg, workers))
    for c in cluster_counts:
        for r in request_counts:
            # The z-test needs the sample mean to be approximately normal.
            # Once expected surviving clusters c(1-1/c)^r drops below ~0.05
            # the estimate is a rare-event sum and the test is meaningless.
            if c * (1.0 - 1.0 / c) ** r < 0.05:
                continue
            add("expected_remaining_fedcio", f"D={total_samples};c={c};r={r}",
                analytics.expected_remaining_fedcio(total_samples, c, r),
                mc_expected_remaining("FedCIO", total_samples, c, r, cfg, workers))
    for L in group_counts:
        for S in slice_counts:
            add("expected_comm_cost", f"L={L};S={S}",
                analytics.expected_comm_cost(L, S),
                mc_comm_cost(L, S, cfg, workers))
    return rows
