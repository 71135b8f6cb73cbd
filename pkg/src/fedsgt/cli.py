"""Command-line front end.

Subcommands:

    analyze    closed-form tables (deletion rates, remaining-data curves,
               communication cost, training cost, matched budget)
    validate   Monte Carlo cross-check of every closed form; fails the run
               when any |z| exceeds the confidence bound
    train      train a full system from a config file and write the module
               bank, grouping plan, and manifest
    unlearn    stream deletion requests against a trained bank and write the
               service timeline
    compare    run FedSGT, FedCIO, and FedRetrain under one request stream

Exit codes: 0 success, 2 configuration problem, 3 validation failure,
4 corrupt module bank, 5 training failure. Every command writes a manifest
echoing its resolved configuration; re-running ``train`` from a manifest
reproduces the bank byte for byte.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__, analytics, montecarlo
from .bank import read_bank, write_bank
from .core import (BankFormatError, ConfigurationError, CsvSpec, FedSGTError,
                   RunConfig, SyntheticSpec, TrainingError, validate_config)
from .dataset import Dataset, load_csv_dataset, synth_dataset
from .fltrain import CostMeter, TrainConfig, evaluate, train_fedsgt
from .grouping import SliceRef, build_grouping, plan_from_json, plan_to_json
from .montecarlo import MCConfig
from .sequencing import build_sequences, fresh_state, state_to_json
from .unlearn import (UnlearnRequest, exactness_audit, fedcio_simulate,
                      fedretrain_simulate, fedsgt_system, run_stream,
                      timeline_summary, uniform_requests, write_timeline)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_VALIDATION = 3
EXIT_BANK = 4
EXIT_TRAINING = 5


def _write_json(path: Path, doc: Any) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _write_manifest(outdir: Path, command: str, config: dict) -> None:
    _write_json(outdir / "manifest.json",
                {"tool": "fedsgt", "version": __version__,
                 "command": command, "config": config})


def _outdir(raw: str) -> Path:
    path = Path(raw)
    path.mkdir(parents=True, exist_ok=True)
    return path


def load_config_file(path: str | Path) -> RunConfig:
    """Read a config file; a manifest written by this tool is accepted too
    (its embedded config is used)."""
    path = Path(path)
    if not path.exists():
        raise ConfigurationError([f"config file not found: {path}"])
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigurationError([f"config file is not valid JSON: {exc}"]) from exc
    if isinstance(doc, dict) and doc.get("tool") == "fedsgt" and "config" in doc:
        doc = doc["config"]
    return validate_config(doc)


def build_dataset(cfg: RunConfig) -> Dataset:
    spec = cfg.dataset
    if isinstance(spec, SyntheticSpec):
        return synth_dataset(clients=cfg.clients,
                             samples_per_client=spec.samples_per_client,
                             dim=spec.dim, classes=spec.classes,
                             alpha=spec.alpha, seed=cfg.seed,
                             slices_per_client=cfg.slices_per_client,
                             test_samples=spec.test_samples)
    if isinstance(spec, CsvSpec):
        try:
            return load_csv_dataset(spec.path, spec.manifest)
        except FileNotFoundError as exc:
            raise ConfigurationError([str(exc)]) from exc
    raise ConfigurationError([f"unsupported dataset spec {spec!r}"])


def build_requests(cfg: RunConfig, catalog: list[tuple[SliceRef, int]]
                   ) -> list[UnlearnRequest]:
    spec = cfg.requests
    if spec.script is not None:
        sizes = dict(catalog)
        requests = []
        for client, sl, records in spec.script:
            ref = SliceRef(client, sl)
            if ref not in sizes:
                raise ConfigurationError([f"scripted request targets unknown slice "
                                          f"({client},{sl})"])
            requests.append(UnlearnRequest(target=ref,
                                           record_count=min(records, sizes[ref])))
        return requests
    return uniform_requests(catalog, spec.count, spec.seed, spec.record_count)


def trainer_config(cfg: RunConfig) -> TrainConfig:
    t = cfg.trainer
    return TrainConfig(epochs=t.epochs, lr=t.lr, batch_size=t.batch_size,
                       seed=cfg.seed, rounds_per_phase=t.rounds_per_phase)


# ---------------------------------------------------------------------------
# analyze
# ---------------------------------------------------------------------------


def cmd_analyze(args: argparse.Namespace) -> int:
    errors = []
    for name in ("groups", "budget", "clusters", "slices_per_client", "clients",
                 "rounds", "adapter_params", "t_cluster"):
        if getattr(args, name) < 1:
            errors.append(f"--{name.replace('_', '-')}: must be >= 1")
    if args.epochs < 0:
        errors.append("--epochs: must be >= 0")
    if args.data_size < 0:
        errors.append("--data-size: must be >= 0")
    if args.max_requests < 0:
        errors.append("--max-requests: must be >= 0")
    if errors:
        raise ConfigurationError(errors)

    start = time.perf_counter()
    outdir = _outdir(args.out)
    L, B, c, D, S = args.groups, args.budget, args.clusters, args.data_size, \
        args.slices_per_client

    rate_sgt = analytics.deletion_rate_fedsgt(L, B)
    rate_cio = analytics.deletion_rate_fedcio(c)
    _write_csv(outdir / "deletion_rates.csv",
               ("method", "params", "expected_requests_to_failure"),
               [("FedSGT", f"L={L};B={B}", repr(rate_sgt)),
                ("FedCIO", f"c={c}", repr(rate_cio))])

    curve = []
    closed_form_valid = B >= L
    for r in range(args.max_requests + 1):
        sgt = analytics.expected_remaining_fedsgt(D, L, r) if closed_form_valid else ""
        curve.append((r, repr(sgt) if sgt != "" else "",
                      repr(analytics.expected_remaining_fedcio(D, c, r))))
    _write_csv(outdir / "remaining_curve.csv",
               ("requests", "fedsgt_remaining", "fedcio_remaining"), curve)

    comm_sgt = analytics.expected_comm_cost(L, S)
    comm_cio = args.rounds + args.t_cluster
    _write_csv(outdir / "comm_cost.csv", ("metric", "value"),
               [("fedsgt_expected_client_rounds", repr(comm_sgt)),
                ("fedcio_client_rounds_incl_clustering", repr(float(comm_cio)))])

    params = analytics.AnalyticParams(
        group_count=L, budget=B, clusters=c, total_samples=D,
        slices_per_client=S, clients=args.clients, rounds=args.rounds,
        epochs=args.epochs, adapter_params=args.adapter_params)
    costs = {m: analytics.training_cost(m, params)
             for m in ("FedAvg", "FedCIO", "FedSGT")}
    _write_csv(outdir / "training_cost.csv", ("method", "updates", "ratio_vs_fedavg"),
               [(m, repr(v), repr(v / costs["FedAvg"] if costs["FedAvg"] else 1.0))
                for m, v in costs.items()])

    doc = {
        "deletion_rate": {"fedsgt": rate_sgt, "fedcio": rate_cio,
                          "ratio": rate_sgt / rate_cio},
        "deletion_rate_params": {"groups": L, "budget": B, "clusters": c},
        "remaining_curve": {
            "requests": list(range(args.max_requests + 1)),
            "fedsgt": [analytics.expected_remaining_fedsgt(D, L, r)
                       for r in range(args.max_requests + 1)] if closed_form_valid else None,
            "fedcio": [analytics.expected_remaining_fedcio(D, c, r)
                       for r in range(args.max_requests + 1)],
        },
        "comm_cost": {"fedsgt_expected_client_rounds": comm_sgt,
                      "fedcio_client_rounds_incl_clustering": comm_cio},
        "training_cost": costs,
        "matched_budget": analytics.matched_budget(args.rounds, L),
    }
    _write_json(outdir / "analyze.json", doc)
    _write_manifest(outdir, "analyze", {
        "groups": L, "budget": B, "clusters": c, "data_size": D,
        "slices_per_client": S, "clients": args.clients, "rounds": args.rounds,
        "epochs": args.epochs, "adapter_params": args.adapter_params,
        "t_cluster": args.t_cluster, "max_requests": args.max_requests,
        "out": str(outdir)})
    elapsed = time.perf_counter() - start
    print(f"analyze: FedSGT sustains {rate_sgt:.4f} expected requests, "
          f"FedCIO {rate_cio:.4f} ({rate_sgt / rate_cio:.2f}x); "
          f"tables in {outdir} ({elapsed:.2f}s)")
    return EXIT_OK


# ---------------------------------------------------------------------------
# validate
# ---------------------------------------------------------------------------


def cmd_validate(args: argparse.Namespace) -> int:
    if args.trials < 1:
        raise ConfigurationError(["--trials: must be >= 1"])
    if args.confidence_k <= 0:
        raise ConfigurationError(["--confidence-k: must be positive"])
    if args.workers < 1:
        raise ConfigurationError(["--workers: must be >= 1"])
    outdir = _outdir(args.out)
    cfg = MCConfig(trials=args.trials, seed=args.seed,
                   confidence_k=args.confidence_k)
    start = time.perf_counter()
    rows = montecarlo.validation_grid(cfg, workers=args.workers,
                                      total_samples=args.data_size)
    elapsed = time.perf_counter() - start

    _write_csv(outdir / "validation.csv",
               ("quantity", "params", "closed_form", "mc_mean", "mc_stderr",
                "zscore"),
               [(r.quantity, r.params, repr(r.closed_form), repr(r.estimate.mean),
                 repr(r.estimate.stderr), repr(r.zscore)) for r in rows])
    worst = max((abs(r.zscore) for r in rows), default=0.0)
    failures = [r for r in rows if abs(r.zscore) > cfg.confidence_k]
    doc = {
        "trials": cfg.trials, "seed": cfg.seed,
        "confidence_k": cfg.confidence_k, "rows": len(rows),
        "max_abs_z": worst, "failures": [
            {"quantity": r.quantity, "params": r.params,
             "closed_form": r.closed_form, "mc_mean": r.estimate.mean,
             "zscore": r.zscore} for r in failures],
        "passed": not failures, "elapsed_seconds": elapsed,
    }
    _write_json(outdir / "validation.json", doc)
    _write_manifest(outdir, "validate", {
        "trials": cfg.trials, "seed": cfg.seed, "confidence_k": cfg.confidence_k,
        "workers": args.workers, "data_size": args.data_size, "out": str(outdir)})
    verdict = "ok" if not failures else f"{len(failures)} quantities off"
    print(f"validate: {len(rows)} quantities at {cfg.trials} trials, "
          f"max |z| = {worst:.3f} ({verdict}, {elapsed:.1f}s)")
    return EXIT_OK if not failures else EXIT_VALIDATION


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------


def _train_system(cfg: RunConfig, workers: int):
    dataset = build_dataset(cfg)
    plan = build_grouping(dataset.slice_catalog(), cfg.groups, cfg.seed)
    seqs = build_sequences(cfg.groups, cfg.budget, cfg.seed)
    meter = CostMeter()
    model = train_fedsgt(dataset, plan, seqs, trainer_config(cfg),
                         workers=workers, meter=meter)
    return dataset, plan, seqs, model, meter


def cmd_train(args: argparse.Namespace) -> int:
    cfg = load_config_file(args.config)
    outdir = _outdir(args.out or cfg.out or "run")
    start = time.perf_counter()
    dataset, plan, seqs, model, meter = _train_system(cfg, args.workers)

    write_bank(outdir / "bank.fsgt", model)
    (outdir / "plan.json").write_text(plan_to_json(plan))

    state = fresh_state(seqs)
    per_seq = []
    for sid, perm in enumerate(seqs.perms):
        w = model.backbone.copy()
        for module in model.modules[sid]:
            w = w + module.weights
        preds = np.argmax(dataset.test_x @ w.T, axis=1)
        per_seq.append((sid, "-".join(str(g) for g in perm),
                        float(np.mean(preds == dataset.test_y))))
    _write_csv(outdir / "training_report.csv",
               ("sequence", "order", "test_accuracy"),
               [(sid, order, repr(acc)) for sid, order, acc in per_seq])
    ensemble = evaluate(model, state, cfg.strategy, dataset.test_x, dataset.test_y)
    _write_json(outdir / "training_report.json", {
        "per_sequence_test_accuracy": {str(sid): acc for sid, _, acc in per_seq},
        "ensemble_test_accuracy": ensemble,
        "strategy": cfg.strategy,
        "parameter_updates": meter.updates,
        "total_samples": dataset.total_samples,
    })
    _write_manifest(outdir, "train", cfg.to_dict())
    elapsed = time.perf_counter() - start
    print(f"train: {len(seqs.perms)} sequences x {seqs.group_count} phases, "
          f"{cfg.strategy} test accuracy {ensemble:.3f}, "
          f"bank at {outdir / 'bank.fsgt'} ({elapsed:.1f}s)")
    return EXIT_OK


# ---------------------------------------------------------------------------
# unlearn
# ---------------------------------------------------------------------------


def _load_requests_file(path: str, catalog: list[tuple[SliceRef, int]]
                        ) -> list[UnlearnRequest]:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigurationError([f"requests file: {exc}"]) from exc
    if not isinstance(doc, list):
        raise ConfigurationError(["requests file: expected a JSON list"])
    sizes = dict(catalog)
    requests = []
    for i, entry in enumerate(doc):
        if not isinstance(entry, dict) or not {"client", "slice"} <= set(entry):
            raise ConfigurationError(
                [f"requests file entry {i}: need keys client, slice"])
        ref = SliceRef(int(entry["client"]), int(entry["slice"]))
        if ref not in sizes:
            raise ConfigurationError(
                [f"requests file entry {i}: unknown slice ({ref.client_id},"
                 f"{ref.slice_idx})"])
        records = int(entry.get("records", sizes[ref]))
        requests.append(UnlearnRequest(target=ref,
                                       record_count=min(records, sizes[ref])))
    return requests


def cmd_unlearn(args: argparse.Namespace) -> int:
    bank_path = Path(args.bank)
    if not bank_path.exists():
        raise BankFormatError(f"bank not found: {bank_path}")
    model = read_bank(bank_path)

    rundir = bank_path.parent
    plan_path = Path(args.plan) if args.plan else rundir / "plan.json"
    manifest_path = Path(args.manifest) if args.manifest else rundir / "manifest.json"
    if not plan_path.exists():
        raise ConfigurationError([f"plan not found: {plan_path}"])
    if not manifest_path.exists():
        raise ConfigurationError([f"manifest not found: {manifest_path}"])
    plan = plan_from_json(plan_path.read_text())
    cfg = load_config_file(manifest_path)
    dataset = build_dataset(cfg)
    strategy = args.strategy or cfg.strategy

    catalog = dataset.slice_catalog()
    if args.requests_file:
        requests = _load_requests_file(args.requests_file, catalog)
    else:
        if args.count < 0:
            raise ConfigurationError(["--count: must be >= 0"])
        requests = uniform_requests(catalog, args.count, args.request_seed,
                                    args.record_count)

    outdir = _outdir(args.out)
    system = fedsgt_system(plan, model.sequences, strategy, model, dataset)
    records = run_stream(system, requests)
    write_timeline(outdir / "timeline.csv", records)
    summary = timeline_summary(records)
    summary["strategy"] = strategy

    if args.audit:
        report = exactness_audit(model, plan, trainer_config(cfg), dataset,
                                 system.state.deleted)
        summary["audit"] = {
            "passed": report.passed,
            "sequences_checked": report.sequences_checked,
            "modules_checked": report.modules_checked,
            "first_mismatch": report.first_mismatch,
        }
        if not report.passed:
            print(f"unlearn: exactness audit FAILED at sequence/phase "
                  f"{report.first_mismatch}", file=sys.stderr)
    _write_json(outdir / "summary.json", summary)
    (outdir / "final_state.json").write_text(state_to_json(system.state))
    _write_manifest(outdir, "unlearn", {
        "bank": str(bank_path), "plan": str(plan_path),
        "manifest": str(manifest_path), "strategy": strategy,
        "requests": {"file": args.requests_file} if args.requests_file else
        {"count": args.count, "seed": args.request_seed,
         "record_count": args.record_count},
        "audit": bool(args.audit), "out": str(outdir)})
    failure = summary["failure_step"]
    print(f"unlearn: {len(records) - 1} requests, "
          f"{system.state.surviving}/{len(model.sequences.perms)} sequences "
          f"surviving"
          + (f", failed at step {failure}" if failure is not None else "")
          + (", audit passed" if args.audit and summary["audit"]["passed"] else ""))
    if args.audit and not summary["audit"]["passed"]:
        return EXIT_TRAINING
    return EXIT_OK


# ---------------------------------------------------------------------------
# compare
# ---------------------------------------------------------------------------


def cmd_compare(args: argparse.Namespace) -> int:
    cfg = load_config_file(args.config)
    outdir = _outdir(args.out or cfg.out or "compare")
    start = time.perf_counter()
    dataset, plan, seqs, model, _ = _train_system(cfg, args.workers)
    requests = build_requests(cfg, dataset.slice_catalog())
    tcfg = trainer_config(cfg)

    system = fedsgt_system(plan, seqs, cfg.strategy, model, dataset)
    sgt_records = run_stream(system, requests)
    cio_records = fedcio_simulate(dataset, cfg.clusters, tcfg, requests,
                                  rounds=cfg.trainer.fedavg_rounds)
    retrain_records = fedretrain_simulate(dataset, tcfg, requests,
                                          eval_every=args.retrain_stride,
                                          rounds=cfg.trainer.fedavg_rounds)

    merged = sgt_records + cio_records + retrain_records
    write_timeline(outdir / "timeline.csv", merged)
    doc = {
        "fedsgt": timeline_summary(sgt_records),
        "fedcio": timeline_summary(cio_records),
        "fedretrain": timeline_summary(retrain_records),
        "requests": len(requests),
        "strategy": cfg.strategy,
    }
    _write_json(outdir / "compare.json", doc)
    _write_manifest(outdir, "compare", cfg.to_dict())
    elapsed = time.perf_counter() - start

    def fmt(summary: dict) -> str:
        fs = summary["failure_step"]
        mu = summary["mean_utility"]
        return (f"failure={'never' if fs is None else fs}, "
                f"utility={'n/a' if mu is None else f'{mu:.3f}'}")

    print(f"compare: {len(requests)} requests | "
          f"FedSGT {fmt(doc['fedsgt'])} | FedCIO {fmt(doc['fedcio'])} | "
          f"FedRetrain {fmt(doc['fedretrain'])} ({elapsed:.1f}s)")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser and entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fedsgt",
        description="Exact federated unlearning: analytics, simulation, and "
                    "serving over sequentially trained group modules.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="emit closed-form tables")
    p.add_argument("--groups", type=int, default=10)
    p.add_argument("--budget", type=int, default=10)
    p.add_argument("--clusters", type=int, default=5)
    p.add_argument("--data-size", type=int, default=50_000)
    p.add_argument("--slices-per-client", type=int, default=2)
    p.add_argument("--clients", type=int, default=10)
    p.add_argument("--rounds", type=int, default=10)
    p.add_argument("--epochs", type=int, default=3)
    p.add_argument("--adapter-params", type=int, default=1)
    p.add_argument("--t-cluster", type=int, default=2,
                   help="clustering overhead rounds charged to FedCIO")
    p.add_argument("--max-requests", type=int, default=25)
    p.add_argument("--out", default="analyze-out")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("validate", help="Monte Carlo cross-check of closed forms")
    p.add_argument("--trials", type=int, default=200_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--confidence-k", type=float, default=3.0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--data-size", type=int, default=50_000)
    p.add_argument("--out", default="validate-out")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("train", help="train a system and write its module bank")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("unlearn", help="stream deletion requests at a bank")
    p.add_argument("--bank", required=True)
    p.add_argument("--plan", default=None)
    p.add_argument("--manifest", default=None)
    p.add_argument("--strategy", choices=("allseq", "minseq", "longseq"),
                   default=None)
    p.add_argument("--count", type=int, default=0)
    p.add_argument("--request-seed", type=int, default=0)
    p.add_argument("--record-count", type=int, default=100)
    p.add_argument("--requests-file", default=None,
                   help="JSON list of {client, slice, records}")
    p.add_argument("--audit", action="store_true",
                   help="retrain surviving prefixes and verify bit-exactness")
    p.add_argument("--out", default="unlearn-out")
    p.set_defaults(func=cmd_unlearn)

    p = sub.add_parser("compare", help="FedSGT vs FedCIO vs FedRetrain")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--retrain-stride", type=int, default=5)
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        for error in exc.errors:
            print(f"config error: {error}", file=sys.stderr)
        return EXIT_CONFIG
    except BankFormatError as exc:
        print(f"bank error: {exc}", file=sys.stderr)
        return EXIT_BANK
    except TrainingError as exc:
        print(f"training error: {exc}", file=sys.stderr)
        return EXIT_TRAINING
    except FedSGTError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def run() -> None:
    raise SystemExit(main())
