"""Command line front end.

Subcommands cover the full workflow: gen-data, train-detector,
train-purifier, attack, eval, report. Every subcommand is deterministic
given the same config and seed; --repro-check re-runs the work into a
temporary directory and byte-compares the artifacts.

Exit codes: 0 success, 1 usage error, 2 invariant violation,
3 reproducibility check failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from dataclasses import replace

import numpy as np

from . import config as cfgmod
from .attacks import ATTACK_KINDS, SCENARIOS
from .data import LabeledDataset, generate_synthetic, load_sparse, save_sparse, split
from .detector import (DetectorModel, load_detector, predict, save_detector,
                       train_detector, train_detector_adversarial)
from .errors import InvariantViolation
from .harness import (DEFENSES, EvaluationReport, ThreatScenario, run_scenario,
                      write_audit_jsonl, write_report_csv, write_report_json)
from .metrics import compute_metrics
from .purifier import build_purifier, load_purifier, save_purifier


class UsageError(Exception):
    pass


class ReproCheckError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems as exceptions instead of exiting
    with its default status."""

    def error(self, message):
        raise UsageError(message)


def _say(msg: str) -> None:
    print(msg)


# ---------------------------------------------------------------------------
# helpers


def _load_cfg(args) -> dict:
    if args.config is not None and not os.path.exists(args.config):
        raise UsageError(f"config file not found: {args.config}")
    cfg = cfgmod.load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg["seed"] = args.seed
    return cfg


def _claim_outputs(paths, force: bool) -> None:
    taken = [p for p in paths if os.path.exists(p)]
    if taken and not force:
        raise UsageError(f"output already exists: {taken[0]} (pass --force to overwrite)")
    for p in paths:
        parent = os.path.dirname(p)
        if parent:
            os.makedirs(parent, exist_ok=True)


def _produce(args, outs: dict, worker) -> None:
    """Write artifacts, then optionally re-run into a scratch directory and
    byte-compare to prove the run is reproducible."""
    _claim_outputs(outs.values(), args.force)
    worker(outs)
    if args.repro_check:
        with tempfile.TemporaryDirectory() as tmp:
            shadow = {k: os.path.join(tmp, f"{i}_{os.path.basename(v)}")
                      for i, (k, v) in enumerate(outs.items())}
            worker(shadow)
            for k in outs:
                with open(outs[k], "rb") as a, open(shadow[k], "rb") as b:
                    if a.read() != b.read():
                        raise ReproCheckError(
                            f"artifact {outs[k]} differs between identical runs")
        _say("repro-check passed: artifacts byte-identical across runs")


def _load_split(data_dir: str):
    paths = {n: os.path.join(data_dir, f"{n}.txt") for n in ("train", "val", "test")}
    missing = [p for p in paths.values() if not os.path.exists(p)]
    if missing:
        raise UsageError(f"dataset file not found: {missing[0]} (run gen-data first)")
    return tuple(load_sparse(paths[n]) for n in ("train", "val", "test"))


def _load_models(args) -> tuple[DetectorModel, object]:
    if not os.path.exists(args.detector):
        raise UsageError(f"detector checkpoint not found: {args.detector}")
    det = load_detector(args.detector)
    purifier = None
    if getattr(args, "purifier", None):
        if not os.path.exists(args.purifier):
            raise UsageError(f"purifier checkpoint not found: {args.purifier}")
        purifier = load_purifier(args.purifier)
    return det, purifier


def _defense_for(args, purifier) -> str:
    if args.defense is not None:
        if args.defense == "purifier+detector" and purifier is None:
            raise UsageError("--defense purifier+detector needs --purifier")
        return args.defense
    return "purifier+detector" if purifier is not None else "detector-only"


def _scenario(cfg, args, purifier) -> ThreatScenario:
    kinds = []
    if getattr(args, "attacks", None):
        kinds = [k.strip() for k in args.attacks.split(",") if k.strip()]
    elif getattr(args, "kind", None):
        kinds = [args.kind]
    for k in kinds:
        if k not in ATTACK_KINDS:
            raise UsageError(f"unknown attack kind {k!r}")
    specs = [cfgmod.attack_spec(cfg, k, args.scenario) for k in kinds]
    return ThreatScenario(level=args.scenario, defense=_defense_for(args, purifier),
                          attacks=specs)


# ---------------------------------------------------------------------------
# subcommands


def _cmd_gen_data(args) -> None:
    cfg = _load_cfg(args)
    outs = {n: os.path.join(args.out, f"{n}.txt") for n in ("train", "val", "test")}

    def worker(paths):
        full = generate_synthetic(cfgmod.data_spec(cfg))
        parts = split(full, cfgmod.split_spec(cfg))
        for name, part in zip(("train", "val", "test"), parts):
            save_sparse(part, paths[name])

    _produce(args, outs, worker)
    counts = ", ".join(f"{n}={load_sparse(p).n}" for n, p in outs.items())
    _say(f"wrote dataset to {args.out} ({counts})")


def _cmd_train_detector(args) -> None:
    cfg = _load_cfg(args)
    train, val, _ = _load_split(args.data)
    outs = {"detector": args.out}
    box = {}

    def worker(paths):
        dc = cfgmod.detector_config(cfg)
        if args.adversarial:
            at = cfg["adversarial_training"]
            model = train_detector_adversarial(
                train, val, dc, at_iterations=at["iterations"],
                at_step=at["step_size"], policy=cfg["policy"])
        else:
            model = train_detector(train, val, dc)
        save_detector(model, paths["detector"])
        box["model"] = model

    _produce(args, outs, worker)
    model = box["model"]
    _, val_labels = predict(model, val.X)
    acc = compute_metrics(val_labels, val.y).acc
    _say(f"detector saved to {args.out} (val acc {acc:.4f}, "
         f"trained in {model.train_seconds:.1f}s)")


def _cmd_train_purifier(args) -> None:
    cfg = _load_cfg(args)
    train, _, _ = _load_split(args.data)
    det, _ = _load_models(args)
    outs = {"purifier": args.out}
    box = {}

    def worker(paths):
        model = build_purifier(train, det, cfgmod.purifier_config(cfg),
                               cfgmod.diversify_config(cfg), cfgmod.noise_config(cfg))
        save_purifier(model, paths["purifier"])
        box["model"] = model

    _produce(args, outs, worker)
    model = box["model"]
    last = model.history[-1]
    _say(f"purifier saved to {args.out} (final rec {last['rec']:.5f}, "
         f"pre {last['pre']:.5f}, trained in {model.train_seconds:.1f}s)")


def _cmd_attack(args) -> None:
    cfg = _load_cfg(args)
    train, _, test = _load_split(args.data)
    det, purifier = _load_models(args)
    scenario = _scenario(cfg, args, purifier)
    outs = {"adv": f"{args.out_prefix}.adv.txt",
            "audit": f"{args.out_prefix}.audit.jsonl",
            "summary": f"{args.out_prefix}.summary.json"}
    box = {}

    def worker(paths):
        report = run_scenario(scenario, test, det, purifier, policy=cfg["policy"],
                              benign_pool=train.benign().X, seed=cfg["seed"],
                              keep_adversarial=True)
        box["report"] = report
        adv = report.adversarial[args.kind]
        save_sparse(LabeledDataset(adv, np.ones(adv.shape[0])), paths["adv"])
        write_audit_jsonl(report, paths["audit"])
        summary = {
            "scenario": scenario.level, "defense": scenario.defense,
            "attack": args.kind, "seed": cfg["seed"],
            "robust_acc": report.value(args.kind, "robust_acc"),
            "success_rate": report.value(args.kind, "success_rate"),
            "mean_flips": report.value(args.kind, "mean_flips"),
        }
        with open(paths["summary"], "w", encoding="utf-8") as fh:
            fh.write(json.dumps(summary, sort_keys=True, separators=(",", ":")) + "\n")

    _produce(args, outs, worker)
    report = box["report"]
    _say(f"{args.kind} ({scenario.level}, {scenario.defense}): "
         f"robust acc {report.value(args.kind, 'robust_acc'):.4f}, "
         f"success rate {report.value(args.kind, 'success_rate'):.4f}, "
         f"took {report.timings[args.kind]:.1f}s")


def _cmd_eval(args) -> None:
    cfg = _load_cfg(args)
    train, _, test = _load_split(args.data)
    det, purifier = _load_models(args)
    scenario = _scenario(cfg, args, purifier)
    outs = {"csv": f"{args.out_prefix}.csv",
            "json": f"{args.out_prefix}.json",
            "audit": f"{args.out_prefix}.audit.jsonl"}
    box = {}

    def worker(paths):
        report = run_scenario(scenario, test, det, purifier, policy=cfg["policy"],
                              benign_pool=train.benign().X, seed=cfg["seed"])
        write_report_csv(report, paths["csv"])
        write_report_json(report, paths["json"])
        write_audit_jsonl(report, paths["audit"])
        box["report"] = report

    _produce(args, outs, worker)
    report = box["report"]
    _say(f"eval ({scenario.level}, {scenario.defense}): "
         f"clean acc {report.value('none', 'acc'):.4f}; "
         f"{len(scenario.attacks)} attack(s); report at {outs['csv']}")
    for spec in scenario.attacks:
        _say(f"  {spec.kind}: robust acc {report.value(spec.kind, 'robust_acc'):.4f} "
             f"({report.timings[spec.kind]:.1f}s)")


def _cmd_report(args) -> None:
    import csv as _csv

    from .harness import CSV_COLUMNS, read_report_json

    for p in args.inputs:
        if not os.path.exists(p):
            raise UsageError(f"input report not found: {p}")
    outs = {"csv": args.out}

    def worker(paths):
        rows = []
        for p in args.inputs:
            rows.extend(read_report_json(p)["rows"])
        with open(paths["csv"], "w", encoding="utf-8", newline="") as fh:
            writer = _csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_COLUMNS)
            for row in rows:
                writer.writerow(["" if row[c] is None else
                                 (repr(row[c]) if isinstance(row[c], float) else str(row[c]))
                                 for c in CSV_COLUMNS])

    _produce(args, outs, worker)
    _say(f"combined report written to {args.out} ({len(args.inputs)} input(s))")


# ---------------------------------------------------------------------------
# argument wiring


def build_parser() -> _Parser:
    parser = _Parser(prog="purelab",
                     description="adversarial purification laboratory for "
                                 "binary-feature malware detection")
    sub = parser.add_subparsers(dest="command", metavar="command")

    def common(p):
        p.add_argument("--config", default=None, help="config file (yaml/json)")
        p.add_argument("--seed", type=int, default=None, help="master seed override")
        p.add_argument("--force", action="store_true",
                       help="overwrite existing output files")
        p.add_argument("--repro-check", action="store_true",
                       help="run twice and byte-compare artifacts")

    p = sub.add_parser("gen-data", help="generate a synthetic dataset split")
    common(p)
    p.add_argument("--out", default="data", help="output directory")
    p.set_defaults(func=_cmd_gen_data)

    p = sub.add_parser("train-detector", help="train the malware detector")
    common(p)
    p.add_argument("--data", default="data", help="dataset directory")
    p.add_argument("--out", default="models/detector.npz")
    p.add_argument("--adversarial", action="store_true",
                   help="harden with adversarial training instead of plain training")
    p.set_defaults(func=_cmd_train_detector)

    p = sub.add_parser("train-purifier", help="train the purifier against a detector")
    common(p)
    p.add_argument("--data", default="data")
    p.add_argument("--detector", default="models/detector.npz")
    p.add_argument("--out", default="models/purifier.npz")
    p.set_defaults(func=_cmd_train_purifier)

    p = sub.add_parser("attack", help="run one attack and save the adversarial rows")
    common(p)
    p.add_argument("--data", default="data")
    p.add_argument("--detector", default="models/detector.npz")
    p.add_argument("--purifier", default=None)
    p.add_argument("--scenario", default="grey", choices=SCENARIOS)
    p.add_argument("--defense", default=None, choices=DEFENSES)
    p.add_argument("--kind", required=True, choices=ATTACK_KINDS)
    p.add_argument("--out-prefix", default="reports/attack")
    p.set_defaults(func=_cmd_attack)

    p = sub.add_parser("eval", help="evaluate a scenario and write the report")
    common(p)
    p.add_argument("--data", default="data")
    p.add_argument("--detector", default="models/detector.npz")
    p.add_argument("--purifier", default=None)
    p.add_argument("--scenario", default="grey", choices=SCENARIOS)
    p.add_argument("--defense", default=None, choices=DEFENSES)
    p.add_argument("--attacks", default=None,
                   help="comma-separated attack kinds (omit for clean metrics only)")
    p.add_argument("--out-prefix", default="reports/eval")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("report", help="merge eval JSON reports into one CSV")
    common(p)
    p.add_argument("--inputs", nargs="+", required=True)
    p.add_argument("--out", default="reports/combined.csv")
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "func", None) is None:
            parser.print_help()
            return 1
        args.func(args)
        return 0
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except ReproCheckError as exc:
        print(f"repro-check failed: {exc}", file=sys.stderr)
        return 3
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
