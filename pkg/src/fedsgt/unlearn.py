"""Deletion-request processing for the three serving regimes.

FedSGT deactivates every module downstream of the deleted group; deletion is
a metadata update and the exactness audit can certify, by retraining from
scratch, that what is still served never saw the deleted data. FedCIO (in
its default no-retrain mode) marks the whole affected cluster dead, which is
what makes quantitative comparisons fair: neither side retrains. FedRetrain
retrains a single global model and pays full downtime for every request.

Record-level requests are conservative: deleting any records from a slice
invalidates everything dependent on the slice's group, while the
remaining-sample accounting subtracts only the records actually deleted.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .core import ServiceStatus, ServiceUnavailable, TrainingError
from .dataset import Dataset
from .fltrain import (CostMeter, ToyModel, TrainConfig, evaluate, fedavg_train,
                      matrix_accuracy, train_sequence)
from .grouping import GroupingPlan, SliceRef, group_of
from .sequencing import (SequenceSet, SequenceState, apply_deletion,
                         fresh_state, state_from_deleted)

METHOD_FEDSGT = "FedSGT"
METHOD_FEDCIO = "FedCIO"
METHOD_FEDRETRAIN = "FedRetrain"

TIMELINE_HEADER = ("step", "method", "affected_unit", "status", "utility",
                   "surviving", "notes")


@dataclass(frozen=True)
class UnlearnRequest:
    """Delete ``record_count`` records from one client slice."""

    target: SliceRef
    record_count: int = 100

    def __post_init__(self):
        if self.record_count < 1:
            raise ValueError(f"record_count must be >= 1, got {self.record_count}")


@dataclass
class TimelineRecord:
    step: int
    method: str
    affected_unit: str
    status: ServiceStatus
    utility: float | None
    notes: str = ""

    @property
    def surviving(self) -> int:
        return self.status.surviving


def write_timeline(path: str | Path, records: Iterable[TimelineRecord]) -> None:
    """RFC-4180 CSV with one row per timeline record."""
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TIMELINE_HEADER)
        for r in records:
            writer.writerow([r.step, r.method, r.affected_unit,
                             r.status.tag.value,
                             "" if r.utility is None else repr(r.utility),
                             r.surviving, r.notes])


def timeline_summary(records: list[TimelineRecord]) -> dict:
    """Failure step (first step with zero survivors) and mean utility over
    the steps that produced one."""
    failure = next((r.step for r in records if r.status.failed), None)
    utilities = [r.utility for r in records if r.utility is not None]
    return {
        "failure_step": failure,
        "mean_utility": float(np.mean(utilities)) if utilities else None,
        "steps": max((r.step for r in records), default=0),
    }


# ---------------------------------------------------------------------------
# Request streams
# ---------------------------------------------------------------------------


def request_stream(catalog: list[tuple[SliceRef, int]], seed: int,
                   record_count: int = 100) -> Iterator[UnlearnRequest]:
    """Infinite stream of uniform requests over the slice catalog. Record
    counts are capped at the slice size so every request is valid."""
    if not catalog:
        raise ValueError("empty slice catalog")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, 0xDE1))))
    while True:
        ref, size = catalog[int(rng.integers(len(catalog)))]
        yield UnlearnRequest(target=ref, record_count=min(record_count, size))


def uniform_requests(catalog: list[tuple[SliceRef, int]], count: int, seed: int,
                     record_count: int = 100) -> list[UnlearnRequest]:
    stream = request_stream(catalog, seed, record_count)
    return [next(stream) for _ in range(count)]


# ---------------------------------------------------------------------------
# FedSGT serving system
# ---------------------------------------------------------------------------


@dataclass
class FedSGTSystem:
    """Mutable shell around immutable deletion snapshots. ``model`` and
    ``dataset`` are optional: without them the system still tracks service
    structure (survivors, failure), it just cannot report utility."""

    plan: GroupingPlan
    seqs: SequenceSet
    state: SequenceState
    strategy: str = "allseq"
    model: ToyModel | None = None
    dataset: Dataset | None = None
    removed: dict[SliceRef, int] = field(default_factory=dict)
    steps: int = 0

    @property
    def slice_sizes(self) -> dict[SliceRef, int]:
        return self.plan.sizes

    @property
    def remaining_samples(self) -> int:
        return self.plan.total_samples - sum(self.removed.values())

    def status(self) -> ServiceStatus:
        surviving = self.state.surviving
        note = "" if surviving else "all sequences dead"
        return ServiceStatus(surviving=surviving, note=note)

    def utility(self) -> float | None:
        if self.model is None or self.dataset is None or self.state.all_dead:
            return None
        return evaluate(self.model, self.state, self.strategy,
                        self.dataset.test_x, self.dataset.test_y)


def fedsgt_system(plan: GroupingPlan, seqs: SequenceSet, strategy: str = "allseq",
                  model: ToyModel | None = None,
                  dataset: Dataset | None = None) -> FedSGTSystem:
    return FedSGTSystem(plan=plan, seqs=seqs, state=fresh_state(seqs),
                        strategy=strategy, model=model, dataset=dataset)


def process_request(system: FedSGTSystem, req: UnlearnRequest) -> TimelineRecord:
    """Apply one deletion request. Invalid targets are rejected (raised)
    before any state changes."""
    sizes = system.slice_sizes
    if req.target not in sizes:
        raise KeyError(f"unknown slice {req.target}")
    if req.record_count > sizes[req.target]:
        raise ValueError(
            f"request for {req.record_count} records exceeds slice size "
            f"{sizes[req.target]}")
    gid = group_of(system.plan, req.target)
    system.state = apply_deletion(system.state, system.seqs, gid)
    already = system.removed.get(req.target, 0)
    system.removed[req.target] = min(sizes[req.target], already + req.record_count)
    system.steps += 1
    return TimelineRecord(
        step=system.steps, method=METHOD_FEDSGT, affected_unit=f"group:{gid}",
        status=system.status(), utility=system.utility(),
        notes=f"slice=({req.target.client_id},{req.target.slice_idx}) "
              f"records={req.record_count} remaining={system.remaining_samples}")


def run_stream(system: FedSGTSystem,
               requests: Iterable[UnlearnRequest]) -> list[TimelineRecord]:
    """Baseline evaluation row (step 0) followed by one row per request."""
    records = [TimelineRecord(step=0, method=METHOD_FEDSGT, affected_unit="",
                              status=system.status(), utility=system.utility(),
                              notes="baseline")]
    for req in requests:
        records.append(process_request(system, req))
    return records


# ---------------------------------------------------------------------------
# FedCIO baseline
# ---------------------------------------------------------------------------


def cluster_of(client: int, clusters: int) -> int:
    """Round-robin cluster assignment by client id."""
    return client % clusters


def _cluster_members(client_count: int, clusters: int) -> list[list[int]]:
    members: list[list[int]] = [[] for _ in range(clusters)]
    for c in range(client_count):
        members[cluster_of(c, clusters)].append(c)
    return members


def _client_full_data(dataset: Dataset, client: int,
                      removed: dict[SliceRef, int] | None = None
                      ) -> tuple[np.ndarray, np.ndarray] | None:
    xs, ys = [], []
    for s in range(dataset.slices_of(client)):
        x, y = dataset.slice_data(SliceRef(client, s))
        drop = 0 if removed is None else removed.get(SliceRef(client, s), 0)
        if drop < len(y):
            xs.append(x[drop:])
            ys.append(y[drop:])
    if not ys:
        return None
    return np.concatenate(xs), np.concatenate(ys)


def train_clusters(dataset: Dataset, clusters: int, cfg: TrainConfig,
                   rounds: int, meter: CostMeter | None = None,
                   adapter_stack: int = 1,
                   removed: dict[SliceRef, int] | None = None,
                   only: Iterable[int] | None = None) -> dict[int, np.ndarray]:
    """Per-cluster FedAvg models. ``adapter_stack`` books the cost of the
    jointly trained module stack the collapsed matrix stands in for."""
    members = _cluster_members(dataset.client_count, clusters)
    targets = range(clusters) if only is None else only
    models = {}
    for cid in targets:
        data = {}
        for client in members[cid]:
            pair = _client_full_data(dataset, client, removed)
            if pair is not None:
                data[client] = pair
        if not data:
            raise TrainingError(f"cluster {cid} has no data")
        models[cid] = fedavg_train(data, dataset.classes, dataset.dim, rounds,
                                   cfg, namespace=(0xC10, cid), meter=meter,
                                   cost_modules=adapter_stack)
    return models


def fedcio_simulate(dataset: Dataset, clusters: int, cfg: TrainConfig,
                    requests: Iterable[UnlearnRequest], rounds: int = 10,
                    retrain: bool = False, adapter_stack: int = 1,
                    meter: CostMeter | None = None) -> list[TimelineRecord]:
    """Clustered baseline under the same request stream.

    Default mode never retrains: a request kills the containing cluster and
    service fails once every cluster is hit. With ``retrain=True`` the
    affected cluster is retrained on its remaining records instead, charging
    ``rounds`` rounds of downtime per request.
    """
    models = train_clusters(dataset, clusters, cfg, rounds, meter=meter,
                            adapter_stack=adapter_stack)
    alive = set(range(clusters))
    removed: dict[SliceRef, int] = {}
    sizes = dict(dataset.slice_catalog())

    def status() -> ServiceStatus:
        note = "" if alive else "all clusters dead"
        return ServiceStatus(surviving=len(alive), note=note)

    def utility() -> float | None:
        if not alive:
            return None
        return matrix_accuracy([models[c] for c in sorted(alive)],
                               dataset.test_x, dataset.test_y)

    records = [TimelineRecord(step=0, method=METHOD_FEDCIO, affected_unit="",
                              status=status(), utility=utility(),
                              notes="baseline")]
    for step, req in enumerate(requests, start=1):
        if req.target not in sizes:
            raise KeyError(f"unknown slice {req.target}")
        cid = cluster_of(req.target.client_id, clusters)
        already = removed.get(req.target, 0)
        removed[req.target] = min(sizes[req.target], already + req.record_count)
        if retrain:
            models.update(train_clusters(dataset, clusters, cfg, rounds,
                                         meter=meter, adapter_stack=adapter_stack,
                                         removed=removed, only=[cid]))
            notes = f"retrained cluster (downtime {rounds} rounds)"
        else:
            alive.discard(cid)
            notes = "cluster marked dead"
        records.append(TimelineRecord(
            step=step, method=METHOD_FEDCIO, affected_unit=f"cluster:{cid}",
            status=status(), utility=utility(), notes=notes))
    return records


# ---------------------------------------------------------------------------
# FedRetrain baseline
# ---------------------------------------------------------------------------


def fedretrain_simulate(dataset: Dataset, cfg: TrainConfig,
                        requests: Iterable[UnlearnRequest], eval_every: int = 5,
                        rounds: int = 10, adapter_stack: int = 1,
                        meter: CostMeter | None = None) -> list[TimelineRecord]:
    """Full retraining baseline: every request charges a complete retraining
    (``rounds`` rounds of downtime); the model is re-fit and evaluated every
    ``eval_every``-th request. Zero requests reduce to plain FedAvg."""
    if eval_every < 1:
        raise ValueError(f"eval_every must be >= 1, got {eval_every}")
    sizes = dict(dataset.slice_catalog())
    removed: dict[SliceRef, int] = {}

    def refit() -> float:
        data = {}
        for client in range(dataset.client_count):
            pair = _client_full_data(dataset, client, removed)
            if pair is not None:
                data[client] = pair
        if not data:
            raise TrainingError("no records left to retrain on")
        w = fedavg_train(data, dataset.classes, dataset.dim, rounds, cfg,
                         namespace=(0x2E7,), meter=meter,
                         cost_modules=adapter_stack)
        return matrix_accuracy([w], dataset.test_x, dataset.test_y)

    status = ServiceStatus(surviving=1)  # never fails, it always retrains
    records = [TimelineRecord(step=0, method=METHOD_FEDRETRAIN, affected_unit="",
                              status=status, utility=refit(), notes="baseline")]
    downtime = 0
    for step, req in enumerate(requests, start=1):
        if req.target not in sizes:
            raise KeyError(f"unknown slice {req.target}")
        already = removed.get(req.target, 0)
        removed[req.target] = min(sizes[req.target], already + req.record_count)
        downtime += rounds
        if step % eval_every == 0:
            utility = refit()
            notes = f"retrained (cumulative downtime {downtime} rounds)"
        else:
            utility = None
            notes = f"retraining charged (cumulative downtime {downtime} rounds)"
        records.append(TimelineRecord(
            step=step, method=METHOD_FEDRETRAIN,
            affected_unit=f"slice:({req.target.client_id},{req.target.slice_idx})",
            status=status, utility=utility, notes=notes))
    return records


# ---------------------------------------------------------------------------
# Exactness audit
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AuditReport:
    passed: bool
    sequences_checked: int
    modules_checked: int
    first_mismatch: tuple[int, int] | None = None

    def __bool__(self) -> bool:
        return self.passed


def exactness_audit(model: ToyModel, plan: GroupingPlan, cfg: TrainConfig,
                    dataset: Dataset, deleted: Iterable[int]) -> AuditReport:
    """Certify that the served model is exactly what retraining without the
    deleted groups would produce.

    For every surviving sequence the active prefix is retrained from scratch
    with the same seeds and compared byte-for-byte (weights, group ids,
    sample counts) against the bank. Any influence of a deleted group on a
    served module would surface as a mismatch.
    """
    seqs = model.sequences
    state = state_from_deleted(seqs, deleted)
    sequences_checked = 0
    modules_checked = 0
    for sid, active in enumerate(state.active_len):
        if active == 0:
            continue
        sequences_checked += 1
        fresh = train_sequence(dataset, plan, seqs.perms[sid], cfg,
                               sequence_index=sid, upto_phase=active,
                               backbone=model.backbone)
        for p in range(active):
            modules_checked += 1
            served = model.modules[sid][p]
            redone = fresh[p]
            same = (served.group == redone.group
                    and served.samples == redone.samples
                    and served.weights.tobytes() == redone.weights.tobytes())
            if not same:
                return AuditReport(passed=False,
                                   sequences_checked=sequences_checked,
                                   modules_checked=modules_checked,
                                   first_mismatch=(sid, p))
    return AuditReport(passed=True, sequences_checked=sequences_checked,
                       modules_checked=modules_checked)


# ---------------------------------------------------------------------------
# Structure-only failure race
# ---------------------------------------------------------------------------


def race_failure_steps(plan: GroupingPlan, seqs: SequenceSet, clusters: int,
                       seed: int, record_count: int = 100,
                       cap: int = 1_000_000) -> tuple[int, int]:
    """Failure steps of FedSGT and FedCIO (no-retrain) under one shared
    uniform request stream. No models involved: failure is structural."""
    catalog = [(ref, plan.sizes[ref]) for members in plan.groups for ref in members]
    catalog.sort()
    heads = {perm[0] for perm in seqs.perms}
    all_clusters = {cluster_of(c, clusters) for c in plan.clients()}
    deleted: set[int] = set()
    hit: set[int] = set()
    sgt_step = cio_step = None
    stream = request_stream(catalog, seed, record_count)
    for step in range(1, cap + 1):
        req = next(stream)
        deleted.add(group_of(plan, req.target))
        hit.add(cluster_of(req.target.client_id, clusters))
        if sgt_step is None and heads <= deleted:
            sgt_step = step
        if cio_step is None and hit >= all_clusters:
            cio_step = step
        if sgt_step is not None and cio_step is not None:
            return sgt_step, cio_step
    raise RuntimeError(f"race did not finish within {cap} requests")
