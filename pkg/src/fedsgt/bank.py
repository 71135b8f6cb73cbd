"""Module-bank container: one file holding a trained system's weights.

Layout (all integers and floats little-endian):

    bytes 0..3   magic "FSGT"
    u32          format version (1)
    u32          group count L
    u32          sequence count B
    u32          feature dim d
    u32          class count k
    f64[k*d]     backbone, row-major
    then for each sequence (B of them), for each phase (L of them):
        u32      group id at this position
        u64      cumulative sample count the module saw
        f64[k*d] adapter weights, row-major

Weights round-trip bit-exactly; the per-position group ids reconstruct the
sequence permutations, so a bank plus its grouping plan is enough to resume
serving and to audit exactness.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .core import BankFormatError
from .fltrain import AdapterModule, ToyModel
from .sequencing import SequenceSet

MAGIC = b"FSGT"
VERSION = 1
_HEADER = struct.Struct("<4sIIIII")
_MODULE_HEAD = struct.Struct("<IQ")


def write_bank(path: str | Path, model: ToyModel) -> None:
    seqs = model.sequences
    k, d = model.backbone.shape
    blob = bytearray()
    blob += _HEADER.pack(MAGIC, VERSION, seqs.group_count, len(model.modules), d, k)
    blob += np.ascontiguousarray(model.backbone, dtype="<f8").tobytes()
    for stack in model.modules:
        if len(stack) != seqs.group_count:
            raise BankFormatError(
                f"can only store full stacks of {seqs.group_count} modules, "
                f"got {len(stack)}")
        for module in stack:
            blob += _MODULE_HEAD.pack(module.group, module.samples)
            blob += np.ascontiguousarray(module.weights, dtype="<f8").tobytes()
    Path(path).write_bytes(bytes(blob))


def read_bank(path: str | Path) -> ToyModel:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise BankFormatError("bank file shorter than its header")
    magic, version, group_count, budget, d, k = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise BankFormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise BankFormatError(f"unsupported bank version {version}")
    if min(group_count, budget, d, k) < 1:
        raise BankFormatError("bank header has nonpositive dimensions")
    matrix_bytes = 8 * k * d
    expected = (_HEADER.size + matrix_bytes +
                budget * group_count * (_MODULE_HEAD.size + matrix_bytes))
    if len(raw) != expected:
        raise BankFormatError(
            f"bank length {len(raw)} does not match header (expected {expected})")

    offset = _HEADER.size
    backbone = np.frombuffer(raw, dtype="<f8", count=k * d,
                             offset=offset).reshape(k, d).copy()
    offset += matrix_bytes
    modules: list[list[AdapterModule]] = []
    perms: list[tuple[int, ...]] = []
    for _ in range(budget):
        stack = []
        for _ in range(group_count):
            group, samples = _MODULE_HEAD.unpack_from(raw, offset)
            offset += _MODULE_HEAD.size
            weights = np.frombuffer(raw, dtype="<f8", count=k * d,
                                    offset=offset).reshape(k, d).copy()
            offset += matrix_bytes
            stack.append(AdapterModule(group=group, samples=samples,
                                       weights=weights))
        perm = tuple(m.group for m in stack)
        if sorted(perm) != list(range(group_count)):
            raise BankFormatError(f"stored order {perm} is not a permutation")
        perms.append(perm)
        modules.append(stack)
    seqs = SequenceSet(group_count=group_count, budget=budget,
                       perms=tuple(perms), seed=0,
                       rotation_count=min(group_count, budget))
    return ToyModel(backbone=backbone, sequences=seqs, modules=modules)
