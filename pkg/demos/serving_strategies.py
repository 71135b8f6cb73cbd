"""Watch the sequence set degrade as groups are deleted, and how the three
serving strategies pick from what survives.

Six groups, six rotated sequences. Deleting a group kills every module
trained at or after its phase, so each sequence keeps only the prefix that
never saw the deleted group.

Run: python demos/serving_strategies.py
"""

import numpy as np

from fedsgt.dataset import synth_dataset
from fedsgt.fltrain import TrainConfig, evaluate, train_fedsgt
from fedsgt.grouping import build_grouping
from fedsgt.sequencing import (apply_deletion, build_sequences, cyclic_span,
                               fresh_state, select_allseq, select_longseq,
                               select_minseq)

L = 6
ds = synth_dataset(clients=6, samples_per_client=90, dim=12, classes=4,
                   alpha=0.3, seed=13, slices_per_client=2, test_samples=240)
plan = build_grouping(ds.slice_catalog(), L, seed=13)
seqs = build_sequences(L, L, seed=13)
cfg = TrainConfig(epochs=3, lr=0.1, batch_size=16, seed=13)
model = train_fedsgt(ds, plan, seqs, cfg)

print("sequences (group visit order):")
for sid, perm in enumerate(seqs.perms):
    print(f"  s{sid}: {'-'.join(map(str, perm))}")


def show(state, label):
    print(f"\n--- {label} ---")
    print(f"surviving prefixes: {state.active_len} "
          f"(dead span {cyclic_span(L, state.deleted)}/{L})")
    long = select_longseq(state, seqs)
    mins = sorted(select_minseq(state, seqs))
    alls = select_allseq(state, seqs)
    print(f"LongSeq  -> s{long}" if long is not None else "LongSeq  -> none")
    print(f"MinSeq   -> {['s%d' % s for s in mins]}")
    print(f"AllSeq   -> " + ", ".join(f"s{s}:{w:.2f}" for s, w in alls))
    for strategy in ("longseq", "minseq", "allseq"):
        acc = evaluate(model, state, strategy, ds.test_x, ds.test_y)
        print(f"  {strategy:>7} test accuracy: {acc:.3f}")


state = fresh_state(seqs)
show(state, "nothing deleted")

for victim in (1, 5, 2):
    state = apply_deletion(state, seqs, victim)
    show(state, f"deleted group {victim} (total {sorted(state.deleted)})")

print("\nNote the duality: dead span + longest surviving prefix always "
      f"equals L={L} while all rotations are present.")
