"""Deterministic toy federated trainer.

The model is linear: a frozen zero backbone (k x d) plus one additive adapter
module (k x d) per sequence position. Phase p of a sequence zero-initializes
a fresh module and fits it by federated mini-batch gradient descent on the
cumulative data of the first p+1 groups, with every earlier module frozen.
Additivity means the composite starts phase p+1 computing exactly the same
function it ended phase p with.

Determinism is the point, not a nicety: the exactness audit recomputes
modules from scratch and compares bytes. Every stochastic choice (batch
order) is drawn from a PCG64 stream keyed by (seed, sequence, phase, round),
independent of anything later in the run; client updates are aggregated in
ascending client id with a fixed summation order. Training the prefix of a
sequence therefore reproduces the full run's leading modules bit for bit on
the same platform (cross-platform equality is not promised).
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import ServiceUnavailable, TrainingError
from .dataset import Dataset
from .grouping import GroupingPlan, SliceRef
from .sequencing import (SequenceSet, SequenceState, select_allseq,
                         select_longseq, select_minseq)


@dataclass(frozen=True)
class TrainConfig:
    """Trainer hyperparameters. epochs may be zero (modules stay zero), all
    other fields are positive."""

    epochs: int = 3
    lr: float = 0.1
    batch_size: int = 32
    seed: int = 0
    rounds_per_phase: int = 1

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if self.lr <= 0:
            raise ValueError(f"lr must be positive, got {self.lr}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.rounds_per_phase < 1:
            raise ValueError(f"rounds_per_phase must be >= 1, got {self.rounds_per_phase}")


@dataclass
class AdapterModule:
    """One trained position: the group it appended, the cumulative sample
    count it saw, and its weight matrix."""

    group: int
    samples: int
    weights: np.ndarray  # (classes, dim) float64


@dataclass
class ToyModel:
    """Frozen backbone plus per-sequence module stacks; carries its sequence
    family so serving needs no extra context."""

    backbone: np.ndarray
    sequences: SequenceSet
    modules: list[list[AdapterModule]]  # [sequence][phase]

    @property
    def classes(self) -> int:
        return self.backbone.shape[0]

    @property
    def dim(self) -> int:
        return self.backbone.shape[1]


@dataclass
class CostMeter:
    """Counts parameter updates: params * samples * epochs per module
    trained.

    The FedAvg / FedCIO baselines are represented by one collapsed matrix
    (jointly trained additive modules are function-equivalent to their sum),
    but they stand in for a full stack of ``group_count`` adapters, so their
    rounds are booked with ``modules=group_count``.
    """

    updates: int = 0

    def charge(self, samples: int, params: int, modules: int = 1,
               epochs: int = 1) -> None:
        if min(samples, params, modules, epochs) < 0:
            raise ValueError("cost components must be nonnegative")
        self.updates += samples * params * modules * epochs


def _round_rng(cfg: TrainConfig, round_key: tuple[int, ...]) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(
        np.random.SeedSequence((cfg.seed, *round_key))))


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _local_update(active: np.ndarray, frozen: np.ndarray, x: np.ndarray,
                  y: np.ndarray, cfg: TrainConfig,
                  rng: np.random.Generator) -> np.ndarray:
    """E epochs of mini-batch gradient descent on the cross-entropy of
    (frozen + active) @ x, updating only the active module."""
    a = active.copy()
    n = len(y)
    onehot = np.zeros((n, a.shape[0]))
    onehot[np.arange(n), y] = 1.0
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            xb = x[idx]
            probs = _softmax(xb @ (frozen + a).T)
            loss = -np.mean(np.log(probs[np.arange(len(idx)), y[idx]] + 1e-300))
            if not np.isfinite(loss):
                raise TrainingError(
                    f"non-finite loss (lr={cfg.lr}, batch={len(idx)} samples)")
            grad = (probs - onehot[idx]).T @ xb / len(idx)
            a -= cfg.lr * grad
    return a


def local_loss(active: np.ndarray, frozen: np.ndarray, x: np.ndarray,
               y: np.ndarray) -> float:
    """Mean cross-entropy of the composite model on (x, y)."""
    probs = _softmax(x @ (frozen + active).T)
    return float(-np.mean(np.log(probs[np.arange(len(y)), y] + 1e-300)))


def federated_round(active: np.ndarray, frozen: np.ndarray,
                    data: dict[int, tuple[np.ndarray, np.ndarray]],
                    cfg: TrainConfig, round_key: tuple[int, ...],
                    meter: CostMeter | None = None,
                    cost_modules: int = 1) -> np.ndarray:
    """One synchronous round: every participant copies the active module,
    runs local epochs, and the server returns the sample-count-weighted
    average, accumulated in ascending client id order.

    Each participant reads its batch order from a fresh stream keyed by
    (seed, *round_key); participants with identical data therefore produce
    identical updates.
    """
    if not data:
        raise TrainingError("federated_round: no participants")
    participants = sorted(data)
    counts = np.array([len(data[c][1]) for c in participants], dtype=np.float64)
    if np.any(counts == 0):
        raise TrainingError("federated_round: participant with empty data")
    updates = np.empty((len(participants),) + active.shape)
    for i, c in enumerate(participants):
        x, y = data[c]
        rng = _round_rng(cfg, round_key)
        updates[i] = _local_update(active, frozen, x, y, cfg, rng)
        if meter is not None:
            meter.charge(samples=len(y), params=active.size,
                         modules=cost_modules, epochs=cfg.epochs)
    weights = counts / counts.sum()
    return np.sum(weights[:, None, None] * updates, axis=0)


def _cumulative_client_data(dataset: Dataset, plan: GroupingPlan,
                            prefix: tuple[int, ...]) -> dict[int, tuple[np.ndarray, np.ndarray]]:
    """Per-client concatenation of all slices in the prefix groups, in group
    order then plan order. The order is part of the determinism contract."""
    parts: dict[int, list[SliceRef]] = {}
    for g in prefix:
        for ref in plan.groups[g]:
            parts.setdefault(ref.client_id, []).append(ref)
    data = {}
    for client, refs in parts.items():
        xs, ys = zip(*(dataset.slice_data(ref) for ref in refs))
        data[client] = (np.concatenate(xs), np.concatenate(ys))
    return data


def train_sequence(dataset: Dataset, plan: GroupingPlan, perm: tuple[int, ...],
                   cfg: TrainConfig, sequence_index: int = 0,
                   upto_phase: int | None = None,
                   backbone: np.ndarray | None = None,
                   meter: CostMeter | None = None) -> list[AdapterModule]:
    """Train the module stack of one sequence, phases 0..upto_phase-1.

    Truncation is exact: the modules returned for a prefix are bit-identical
    to the leading modules of a full run, because phase p consumes only
    (seed, sequence_index, p, round) streams and prefix data.
    """
    classes, dim = dataset.classes, dataset.dim
    if backbone is None:
        backbone = np.zeros((classes, dim))
    upto = len(perm) if upto_phase is None else upto_phase
    if not 0 <= upto <= len(perm):
        raise ValueError(f"upto_phase must be in [0, {len(perm)}], got {upto}")

    frozen = backbone.copy()
    modules: list[AdapterModule] = []
    for phase in range(upto):
        prefix = perm[:phase + 1]
        data = _cumulative_client_data(dataset, plan, prefix)
        if not data:
            raise TrainingError(f"phase {phase}: cumulative groups hold no data")
        active = np.zeros((classes, dim))
        for rnd in range(cfg.rounds_per_phase):
            active = federated_round(active, frozen, data, cfg,
                                     (sequence_index, phase, rnd), meter)
        total = sum(len(y) for _, y in data.values())
        modules.append(AdapterModule(group=perm[phase], samples=total,
                                     weights=active))
        frozen = frozen + active
    return modules


def train_fedsgt(dataset: Dataset, plan: GroupingPlan, seqs: SequenceSet,
                 cfg: TrainConfig, workers: int = 1,
                 meter: CostMeter | None = None) -> ToyModel:
    """Train every sequence in the family. Sequences are independent given
    their index, so they may run in parallel without changing results."""
    backbone = np.zeros((dataset.classes, dataset.dim))

    def job(sid: int) -> list[AdapterModule]:
        return train_sequence(dataset, plan, seqs.perms[sid], cfg,
                              sequence_index=sid, backbone=backbone, meter=meter)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            stacks = list(pool.map(job, range(len(seqs.perms))))
    else:
        stacks = [job(sid) for sid in range(len(seqs.perms))]
    return ToyModel(backbone=backbone, sequences=seqs, modules=stacks)


# ---------------------------------------------------------------------------
# Serving
# ---------------------------------------------------------------------------


def sequence_logits(model: ToyModel, seq_id: int, active_len: int,
                    x: np.ndarray) -> np.ndarray:
    w = model.backbone.copy()
    for module in model.modules[seq_id][:active_len]:
        w = w + module.weights
    return x @ w.T


def predict_proba(model: ToyModel, state: SequenceState, strategy: str,
                  x: np.ndarray) -> np.ndarray:
    """Class probabilities under a serving strategy.

    longseq: softmax of the single chosen sequence's truncated logits.
    minseq: uniform average of probabilities over inclusion-maximal
    sequences. allseq: prefix-length-weighted average over all survivors.
    Raises ServiceUnavailable when no sequence survives.
    """
    if state.all_dead:
        raise ServiceUnavailable("all sequences dead")
    seqs = model.sequences
    name = strategy.lower()
    if name == "longseq":
        sid = select_longseq(state, seqs)
        return _softmax(sequence_logits(model, sid, state.active_len[sid], x))
    if name == "minseq":
        chosen = sorted(select_minseq(state, seqs))
        probs = [_softmax(sequence_logits(model, sid, state.active_len[sid], x))
                 for sid in chosen]
        return np.mean(probs, axis=0)
    if name == "allseq":
        acc = None
        for sid, weight in select_allseq(state, seqs):
            p = _softmax(sequence_logits(model, sid, state.active_len[sid], x))
            acc = weight * p if acc is None else acc + weight * p
        return acc
    raise ValueError(f"unknown strategy {strategy!r}")


def predict(model: ToyModel, state: SequenceState, strategy: str,
            x: np.ndarray) -> tuple[int, np.ndarray]:
    """Label and per-class scores for a single feature vector. Ties break to
    the lowest label."""
    probs = predict_proba(model, state, strategy, np.asarray(x)[None, :])[0]
    return int(np.argmax(probs)), probs


def evaluate(model: ToyModel, state: SequenceState, strategy: str,
             x: np.ndarray, y: np.ndarray) -> float:
    """Accuracy on (x, y); deterministic, ties to the lowest label."""
    probs = predict_proba(model, state, strategy, x)
    return float(np.mean(np.argmax(probs, axis=1) == y))


# ---------------------------------------------------------------------------
# FedAvg baseline trainer (also the per-cluster trainer for FedCIO and the
# full-retrain trainer for FedRetrain)
# ---------------------------------------------------------------------------


def fedavg_train(data: dict[int, tuple[np.ndarray, np.ndarray]], classes: int,
                 dim: int, rounds: int, cfg: TrainConfig,
                 namespace: tuple[int, ...] = (), meter: CostMeter | None = None,
                 cost_modules: int = 1) -> np.ndarray:
    """T rounds of plain FedAvg on one weight matrix over the given clients.

    ``namespace`` keys the RNG streams so concurrent baselines (for example
    per-cluster models) stay independent and reproducible.
    """
    if rounds < 1:
        raise ValueError(f"rounds must be >= 1, got {rounds}")
    w = np.zeros((classes, dim))
    frozen = np.zeros((classes, dim))
    for t in range(rounds):
        w = federated_round(w, frozen, data, cfg, (*namespace, t), meter,
                            cost_modules=cost_modules)
    return w


def matrix_accuracy(weights: list[np.ndarray], x: np.ndarray,
                    y: np.ndarray) -> float:
    """Accuracy of a probability ensemble of plain linear models."""
    if not weights:
        raise ServiceUnavailable("no models to serve")
    probs = np.mean([_softmax(x @ w.T) for w in weights], axis=0)
    return float(np.mean(np.argmax(probs, axis=1) == y))
