"""Deletion streams, baselines, timelines, and the exactness audit."""

import csv

import numpy as np
import pytest

from fedsgt.analytics import deletion_rate_fedcio
from fedsgt.dataset import synth_dataset
from fedsgt.fltrain import TrainConfig, train_fedsgt
from fedsgt.grouping import SliceRef, build_grouping, group_of
from fedsgt.sequencing import build_sequences, state_from_deleted
from fedsgt.unlearn import (UnlearnRequest, cluster_of, exactness_audit,
                            fedcio_simulate, fedretrain_simulate,
                            fedsgt_system, process_request,
                            race_failure_steps, request_stream, run_stream,
                            timeline_summary, uniform_requests,
                            write_timeline)


def build(seed=0, epochs=1, clients=4, groups=4, budget=4):
    ds = synth_dataset(clients=clients, samples_per_client=40, dim=6,
                       classes=3, alpha=None, seed=seed, slices_per_client=2,
                       test_samples=90)
    plan = build_grouping(ds.slice_catalog(), groups, seed)
    seqs = build_sequences(groups, budget, seed)
    cfg = TrainConfig(epochs=epochs, lr=0.1, batch_size=16, seed=seed)
    model = train_fedsgt(ds, plan, seqs, cfg)
    return ds, plan, seqs, cfg, model


class TestRequests:
    def test_stream_is_deterministic_and_capped(self):
        ds, *_ = build()
        cat = ds.slice_catalog()
        a = uniform_requests(cat, 10, seed=3, record_count=1000)
        b = uniform_requests(cat, 10, seed=3, record_count=1000)
        assert a == b
        for req in a:
            assert req.record_count == dict(cat)[req.target]

    def test_stream_seed_sensitivity(self):
        ds, *_ = build()
        cat = ds.slice_catalog()
        a = uniform_requests(cat, 12, seed=1, record_count=5)
        b = uniform_requests(cat, 12, seed=2, record_count=5)
        assert a != b

    def test_infinite_stream_covers_catalog(self):
        ds, *_ = build()
        cat = ds.slice_catalog()
        seen = set()
        stream = request_stream(cat, seed=0, record_count=1)
        for _ in range(300):
            seen.add(next(stream).target)
        assert seen == {ref for ref, _ in cat}

    def test_record_count_validation(self):
        with pytest.raises(ValueError):
            UnlearnRequest(target=SliceRef(0, 0), record_count=0)


class TestProcessRequest:
    def test_deletion_propagates_to_group(self):
        ds, plan, seqs, cfg, model = build()
        system = fedsgt_system(plan, seqs, "allseq", model, ds)
        target = SliceRef(0, 0)
        rec = process_request(system, UnlearnRequest(target, record_count=5))
        gid = group_of(plan, target)
        assert rec.affected_unit == f"group:{gid}"
        assert gid in system.state.deleted
        assert rec.utility is not None
        assert rec.surviving == system.state.surviving

    def test_unknown_slice_rejected_without_mutation(self):
        ds, plan, seqs, cfg, model = build()
        system = fedsgt_system(plan, seqs, "allseq", model, ds)
        before = system.state
        with pytest.raises(KeyError):
            process_request(system, UnlearnRequest(SliceRef(50, 0), 1))
        assert system.state == before and system.steps == 0

    def test_oversized_request_rejected_without_mutation(self):
        ds, plan, seqs, cfg, model = build()
        system = fedsgt_system(plan, seqs, "allseq", model, ds)
        before = system.state
        with pytest.raises(ValueError):
            process_request(system, UnlearnRequest(SliceRef(0, 0), 10_000))
        assert system.state == before and system.removed == {}

    def test_repeat_deletion_is_idempotent_on_state(self):
        ds, plan, seqs, cfg, model = build()
        system = fedsgt_system(plan, seqs, "allseq", model, ds)
        req = UnlearnRequest(SliceRef(1, 0), record_count=3)
        process_request(system, req)
        state_after_one = system.state
        process_request(system, req)
        assert system.state == state_after_one
        # record accounting still advances, capped at the slice size
        assert system.removed[SliceRef(1, 0)] == 6

    def test_remaining_samples_accounting(self):
        ds, plan, seqs, cfg, model = build()
        system = fedsgt_system(plan, seqs, "allseq", model, ds)
        total = ds.total_samples
        process_request(system, UnlearnRequest(SliceRef(0, 0), 7))
        assert system.remaining_samples == total - 7


class TestTimeline:
    def test_baseline_row_then_one_per_request(self):
        ds, plan, seqs, cfg, model = build()
        system = fedsgt_system(plan, seqs, "allseq", model, ds)
        requests = uniform_requests(ds.slice_catalog(), 3, 0, 2)
        records = run_stream(system, requests)
        assert len(records) == 4
        assert records[0].step == 0 and records[0].notes == "baseline"
        assert [r.step for r in records] == [0, 1, 2, 3]

    def test_csv_shape(self, tmp_path):
        ds, plan, seqs, cfg, model = build()
        system = fedsgt_system(plan, seqs, "allseq", model, ds)
        records = run_stream(system, uniform_requests(ds.slice_catalog(), 2, 0, 2))
        path = tmp_path / "timeline.csv"
        write_timeline(path, records)
        with path.open() as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["step", "method", "affected_unit", "status",
                           "utility", "surviving", "notes"]
        assert len(rows) == 4
        assert rows[1][1] == "FedSGT"

    def test_summary(self):
        ds, plan, seqs, cfg, model = build()
        system = fedsgt_system(plan, seqs, "allseq", model, ds)
        # delete one slice from every group: all sequences die
        targets = [group[0] for group in plan.groups]
        records = run_stream(system, [UnlearnRequest(t, 1) for t in targets])
        summary = timeline_summary(records)
        assert summary["steps"] == 4
        assert summary["failure_step"] == 4
        assert summary["mean_utility"] is not None

    def test_no_failure_when_sequences_survive(self):
        ds, plan, seqs, cfg, model = build()
        system = fedsgt_system(plan, seqs, "allseq", model, ds)
        records = run_stream(system, [UnlearnRequest(plan.groups[0][0], 1)])
        assert timeline_summary(records)["failure_step"] is None


class TestFedCIO:
    def test_first_hit_kills_cluster(self):
        ds, plan, seqs, cfg, model = build()
        requests = [UnlearnRequest(SliceRef(2, 0), 1)]
        records = fedcio_simulate(ds, 2, cfg, requests, rounds=1)
        assert records[0].notes == "baseline"
        assert records[1].affected_unit == f"cluster:{cluster_of(2, 2)}"
        assert records[1].surviving == 1

    def test_mean_failure_step_matches_coupon_collector(self):
        # structure only (epochs=0): expected requests to kill all c=3
        # clusters is 3*H_3 = 5.5; average over seeds must sit nearby
        cfg = TrainConfig(epochs=0, lr=0.1, batch_size=16, seed=0)
        steps = []
        for seed in range(40):
            ds = synth_dataset(clients=6, samples_per_client=12, dim=4,
                               classes=2, alpha=None, seed=seed,
                               slices_per_client=1, test_samples=20)
            requests = uniform_requests(ds.slice_catalog(), 40, seed, 1)
            records = fedcio_simulate(ds, 3, cfg, requests, rounds=1)
            step = timeline_summary(records)["failure_step"]
            assert step is not None
            steps.append(step)
        mean = float(np.mean(steps))
        want = deletion_rate_fedcio(3)  # 5.5
        assert abs(mean - want) < 1.5, mean

    def test_retrain_mode_keeps_cluster_alive(self):
        ds, plan, seqs, cfg, model = build()
        requests = [UnlearnRequest(SliceRef(0, 0), 1)]
        records = fedcio_simulate(ds, 2, cfg, requests, rounds=2, retrain=True)
        assert records[1].surviving == 2
        assert "downtime" in records[1].notes


class TestFedRetrain:
    def test_stride_and_downtime(self):
        ds, plan, seqs, cfg, model = build()
        requests = uniform_requests(ds.slice_catalog(), 6, 1, 1)
        records = fedretrain_simulate(ds, cfg, requests, eval_every=3,
                                      rounds=2)
        assert len(records) == 7
        # utility is measured at the baseline and every third request
        measured = [r.step for r in records if r.utility is not None]
        assert measured == [0, 3, 6]
        assert all(r.surviving == 1 for r in records)
        assert "downtime" in records[1].notes


class TestAudit:
    def test_passes_after_deletions(self):
        ds, plan, seqs, cfg, model = build(seed=3)
        report = exactness_audit(model, plan, cfg, ds, frozenset({1}))
        assert report
        assert report.passed
        assert report.sequences_checked == 3
        assert report.first_mismatch is None

    def test_detects_tampering(self):
        ds, plan, seqs, cfg, model = build(seed=3)
        state = state_from_deleted(seqs, frozenset({1}))
        victim = next(sid for sid, length in enumerate(state.active_len)
                      if length > 0)
        model.modules[victim][0].weights[0, 0] += 1e-9
        report = exactness_audit(model, plan, cfg, ds, frozenset({1}))
        assert not report.passed
        assert report.first_mismatch is not None

    def test_full_survival_checks_everything(self):
        ds, plan, seqs, cfg, model = build(seed=2)
        report = exactness_audit(model, plan, cfg, ds, frozenset())
        assert report.passed
        assert report.sequences_checked == 4
        assert report.modules_checked == 16


class TestRace:
    def test_shared_stream_comparison(self):
        ds, plan, seqs, cfg, model = build(clients=10, groups=10, budget=10)
        sgt, cio = race_failure_steps(plan, seqs, clusters=5, seed=0)
        assert sgt >= 1 and cio >= 1

    def test_fedsgt_usually_outlasts_fedcio(self):
        ds, plan, seqs, cfg, model = build(clients=10, groups=10, budget=10)
        wins = sum(
            1 for seed in range(25)
            if (lambda r: r[0] > r[1])(
                race_failure_steps(plan, seqs, clusters=5, seed=seed)))
        assert wins >= 20, wins
