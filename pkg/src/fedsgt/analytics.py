"""Closed-form expectations for the sequential-group unlearning protocol.

The serving system trains ``budget`` sequences over ``group_count`` groups;
the first ``min(group_count, budget)`` sequences are the cyclic rotations of
the identity order. Uniform deletion requests kill every sequence whose
prefix touches a deleted group, and the quantities below describe how long
the system lasts and how much data the surviving prefixes still cover.

All probability computations run on exact rationals (arbitrary-precision
integers underneath) and are converted to float only at the API boundary.
Request targets are modeled as uniform over groups, the infinite-population
limit of uniform-over-slices; the Monte Carlo module cross-checks every
formula here and also offers a finite-population mode.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .combinatorics import binomial, harmonic, stirling2
from .core import ClosedFormUnavailable

METHOD_FEDAVG = "FedAvg"
METHOD_FEDCIO = "FedCIO"
METHOD_FEDSGT = "FedSGT"


@dataclass(frozen=True)
class AnalyticParams:
    """Inputs for cost formulas, named for what they are.

    adapter_params is the trainable parameter count of one adapter module;
    the FedAvg / FedCIO baselines fine-tune the whole stack of
    ``group_count`` modules every round, FedSGT trains one module per phase.
    """

    group_count: int = 10
    budget: int = 10
    clusters: int = 5
    total_samples: int = 50_000
    slices_per_client: int = 2
    clients: int = 10
    rounds: int = 10
    epochs: int = 3
    adapter_params: int = 1

    @property
    def effective_budget(self) -> int:
        return min(self.group_count, self.budget)


def _check_positive(**kwargs: int) -> None:
    for name, value in kwargs.items():
        if value < 1:
            raise ValueError(f"{name} must be >= 1, got {value}")


def deletion_rate_fedsgt(group_count: int, budget: int) -> float:
    """Expected uniform deletion requests before every sequence is dead.

    The system fails once all min(group_count, budget) distinct head groups
    of the cyclic rotations have been hit: a partial coupon collection,
    group_count * H_min(group_count, budget).
    """
    _check_positive(group_count=group_count, budget=budget)
    effective = min(group_count, budget)
    return float(group_count * harmonic(effective))


def deletion_rate_fedcio(clusters: int) -> float:
    """Expected uniform deletion requests before every cluster is hit:
    the full coupon collection clusters * H_clusters."""
    _check_positive(clusters=clusters)
    return float(clusters * harmonic(clusters))


def prob_m_distinct(group_count: int, requests: int, distinct: int) -> Fraction:
    """P(exactly ``distinct`` groups are hit by ``requests`` uniform draws).

    Counting surjections: C(L, m) * m! * S(r, m) / L^r. Out-of-range
    ``distinct`` has probability zero; zero requests put all mass on zero
    distinct groups.
    """
    _check_positive(group_count=group_count)
    if requests < 0:
        raise ValueError(f"requests must be >= 0, got {requests}")
    if requests == 0:
        return Fraction(1) if distinct == 0 else Fraction(0)
    if distinct < 1 or distinct > min(requests, group_count):
        return Fraction(0)
    ways = binomial(group_count, distinct)
    onto = 1
    for i in range(1, distinct + 1):
        onto *= i
    onto *= stirling2(requests, distinct)
    return Fraction(ways * onto, group_count ** requests)


def prob_max_gap_le(group_count: int, occupied: int, gap_bound: int) -> Fraction:
    """P(max cyclic gap <= gap_bound | ``occupied`` distinct positions).

    Conditioned on m occupied positions on a cycle of length L, the gaps
    between cyclically consecutive occupied positions form a uniform positive
    composition of L into m parts; inclusion-exclusion over parts that exceed
    the bound gives

        (1 / C(L-1, m-1)) * sum_j (-1)^j C(m, j) C(L-1-j*s, m-1).
    """
    _check_positive(group_count=group_count)
    if occupied < 1 or occupied > group_count:
        raise ValueError(
            f"occupied must be in [1, {group_count}], got {occupied}")
    if gap_bound < 0:
        raise ValueError(f"gap_bound must be >= 0, got {gap_bound}")
    if gap_bound == 0:
        return Fraction(0)
    total = binomial(group_count - 1, occupied - 1)
    acc = 0
    sign = 1
    for j in range((group_count - occupied) // gap_bound + 1):
        acc += sign * binomial(occupied, j) * binomial(
            group_count - 1 - j * gap_bound, occupied - 1)
        sign = -sign
    return Fraction(acc, total)


def _expected_span_given_m_exact(group_count: int, occupied: int) -> Fraction:
    # E[U | M=m] = 1 + sum_{s=1..L-1} P(max gap <= s | M=m), via
    # E[X] = sum P(X > s) applied to the max gap and U = L - maxgap + 1.
    acc = Fraction(1)
    for s in range(1, group_count):
        acc += prob_max_gap_le(group_count, occupied, s)
    return acc


def expected_span_given_m(group_count: int, occupied: int) -> float:
    """E[cyclic span of the deleted set | ``occupied`` distinct groups hit]."""
    return float(_expected_span_given_m_exact(group_count, occupied))


def expected_span(group_count: int, requests: int) -> float:
    """E[cyclic span of the hit set] after ``requests`` uniform draws.

    Mixture of the conditional spans over the distinct-count distribution;
    zero requests give span zero.
    """
    _check_positive(group_count=group_count)
    if requests < 0:
        raise ValueError(f"requests must be >= 0, got {requests}")
    if requests == 0:
        return 0.0
    acc = Fraction(0)
    for m in range(1, min(requests, group_count) + 1):
        acc += prob_m_distinct(group_count, requests, m) * \
            _expected_span_given_m_exact(group_count, m)
    return float(acc)


def expected_remaining_fedsgt(total_samples: int, group_count: int,
                              requests: int, budget: int | None = None) -> float:
    """E[samples still covered by the best surviving prefix] after
    ``requests`` uniform deletions, assuming balanced groups.

    With the full rotation family the longest surviving prefix has length
    L - U where U is the cyclic span of the deleted set, so the expectation
    is (|D|/L) * (L - E[U]). The identity needs a rotation for every group;
    pass ``budget`` to have regimes with budget < group_count rejected
    (use the Monte Carlo estimator there instead).
    """
    if total_samples < 0:
        raise ValueError(f"total_samples must be >= 0, got {total_samples}")
    _check_positive(group_count=group_count)
    if budget is not None and budget < group_count:
        raise ClosedFormUnavailable(
            f"remaining-data closed form requires budget >= group_count "
            f"({budget} < {group_count}); use mc_expected_remaining")
    return total_samples / group_count * (group_count - expected_span(group_count, requests))


def expected_remaining_fedcio(total_samples: int, clusters: int, requests: int) -> float:
    """E[data mass of untouched clusters] after ``requests`` uniform
    deletions with balanced clusters: |D| * (1 - 1/c)^r."""
    if total_samples < 0:
        raise ValueError(f"total_samples must be >= 0, got {total_samples}")
    _check_positive(clusters=clusters)
    if requests < 0:
        raise ValueError(f"requests must be >= 0, got {requests}")
    return total_samples * (1.0 - 1.0 / clusters) ** requests


def prob_k_groups(group_count: int, slices_per_client: int, occupied: int) -> Fraction:
    """P(a client's ``slices_per_client`` slices land in exactly ``occupied``
    distinct groups) under independent uniform assignment."""
    return prob_m_distinct(group_count, slices_per_client, occupied)


def expected_comm_cost(group_count: int, slices_per_client: int) -> float:
    """Expected per-client communication rounds across all group_count cyclic
    sequences.

    A client joins a sequence at the first position holding one of its K
    distinct groups; those K positions are a uniform K-subset, so the entry
    position averages (L+1)/(K+1) and the per-sequence cost L - V + 1 sums to
    L(L+1) * E[K/(K+1)] over the whole rotation family.
    """
    _check_positive(group_count=group_count, slices_per_client=slices_per_client)
    acc = Fraction(0)
    for k in range(1, min(slices_per_client, group_count) + 1):
        acc += prob_k_groups(group_count, slices_per_client, k) * Fraction(k, k + 1)
    return float(group_count * (group_count + 1) * acc)


def matched_budget(rounds: int, group_count: int) -> float:
    """Sequence budget that matches the FedAvg training budget of ``rounds``
    rounds: B = 2*T*L / (L+1), from equating B * (L+1)/2 phase-rounds with
    T * L."""
    _check_positive(rounds=rounds, group_count=group_count)
    return 2.0 * rounds * group_count / (group_count + 1)


def training_cost(method: str, params: AnalyticParams) -> float:
    """Total parameter-update count for one full training run.

    FedAvg and FedCIO fine-tune the whole module stack on all data every
    round: T * E * |D| * P * L (FedCIO partitions clients, which leaves the
    total unchanged). FedSGT trains one module per phase on the cumulative
    prefix, which telescopes to B * E * (L+1)/2 * |D| * P with balanced
    groups.
    """
    name = method.strip().lower()
    p = params
    _check_positive(group_count=p.group_count, budget=p.budget,
                    rounds=p.rounds, adapter_params=p.adapter_params)
    if p.epochs < 0 or p.total_samples < 0:
        raise ValueError("epochs and total_samples must be nonnegative")
    base = p.epochs * p.total_samples * p.adapter_params
    if name == METHOD_FEDAVG.lower() or name == METHOD_FEDCIO.lower():
        return float(p.rounds * base * p.group_count)
    if name == METHOD_FEDSGT.lower():
        return float(p.budget * base * (p.group_count + 1) / 2.0)
    raise ValueError(f"unknown method {method!r}; expected FedAvg, FedCIO, or FedSGT")
