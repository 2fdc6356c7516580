"""Scenario orchestration: wire attacks to the right attack surface, score
the defended pipeline, and emit deterministic reports plus an audit log.

Report files are part of the reproducibility contract (same config and
seeds give byte-identical CSV/JSON), so measured wall-clock times stay out
of them: the runtime_s column is left empty and timings are returned on the
report object for logging instead.
"""
from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field

import numpy as np

from .attacks import SCENARIOS, AttackSpec, AttackSurface, run_attack
from .data import LabeledDataset, default_bounds
from .detector import DetectorModel
from .errors import InvariantViolation
from .metrics import compute_metrics
from .purifier import PurifierModel, pipeline_predict

DEFENSES = ("detector-only", "purifier+detector")
CSV_COLUMNS = ("scenario", "attack", "defense", "metric", "value", "seed", "runtime_s")


@dataclass
class ThreatScenario:
    """A threat level, the deployed defense, and the attacks to wage."""

    level: str
    defense: str = "detector-only"
    attacks: list[AttackSpec] = field(default_factory=list)

    def __post_init__(self):
        if self.level not in SCENARIOS:
            raise InvariantViolation(f"unknown threat level {self.level!r}")
        if self.defense not in DEFENSES:
            raise InvariantViolation(f"unknown defense {self.defense!r}")
        for spec in self.attacks:
            if spec.scenario != self.level:
                raise InvariantViolation(
                    f"attack {spec.kind!r} is configured for scenario "
                    f"{spec.scenario!r}, not {self.level!r}")


@dataclass
class EvaluationReport:
    level: str
    defense: str
    seed: int
    rows: list[dict] = field(default_factory=list)
    audit: list[dict] = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    adversarial: dict = field(default_factory=dict)

    def add(self, attack: str, metric: str, value: float):
        self.rows.append({
            "scenario": self.level,
            "attack": attack,
            "defense": self.defense,
            "metric": metric,
            "value": float(value),
            "seed": self.seed,
            "runtime_s": None,
        })

    def value(self, attack: str, metric: str) -> float:
        for row in self.rows:
            if row["attack"] == attack and row["metric"] == metric:
                return row["value"]
        raise KeyError(f"no row for attack={attack!r} metric={metric!r}")


def _attack_surface(level: str, det: DetectorModel,
                    deployed: PurifierModel | None) -> AttackSurface:
    """The surface each threat level exposes to the attacker.

    black sees the deployed pipeline through queries only; grey gets the
    bare detector and never the purifier; white gets the full composition.
    """
    if level == "grey":
        return AttackSurface("grey", det)
    return AttackSurface(level, det, deployed)


def run_scenario(scenario: ThreatScenario, test: LabeledDataset, det: DetectorModel,
                 purifier: PurifierModel | None = None, policy: str = "add-only",
                 benign_pool: np.ndarray | None = None, seed: int = 0,
                 keep_adversarial: bool = False) -> EvaluationReport:
    """Evaluate one scenario on a test set.

    Only malware rows are attacked; benign rows always pass through clean,
    so benign metrics in attacked scenarios match the no-attack ones by
    construction. Robust accuracy is the fraction of attacked malware the
    deployed pipeline still flags.
    """
    if scenario.defense == "purifier+detector" and purifier is None:
        raise InvariantViolation("purifier+detector defense needs a purifier")
    deployed = purifier if scenario.defense == "purifier+detector" else None
    report = EvaluationReport(level=scenario.level, defense=scenario.defense, seed=seed)

    _, labels = pipeline_predict(deployed, det, test.X)
    clean = compute_metrics(labels, test.y)
    for name, value in clean.as_dict().items():
        report.add("none", name, value)
    ben = test.y == 0
    mal = test.y == 1
    if ben.any():
        report.add("none", "benign_acc", float(np.mean(labels[ben] == 0)))
    if mal.any():
        report.add("none", "malware_acc", float(np.mean(labels[mal] == 1)))

    X_mal = test.malware().X
    for spec in scenario.attacks:
        if X_mal.shape[0] == 0:
            raise InvariantViolation("no malware rows to attack")
        surface = _attack_surface(scenario.level, det, deployed)
        bounds = default_bounds(X_mal, policy)
        started = time.perf_counter()
        results = run_attack(spec, X_mal, bounds, surface, benign_pool=benign_pool)
        report.timings[spec.kind] = time.perf_counter() - started

        adv = np.stack([r.adversarial for r in results])
        if keep_adversarial:
            report.adversarial[spec.kind] = adv
        _, adv_labels = pipeline_predict(deployed, det, adv)
        robust_acc = float(np.mean(adv_labels == 1))
        report.add(spec.kind, "robust_acc", robust_acc)
        report.add(spec.kind, "success_rate",
                   float(np.mean([r.success for r in results])))
        report.add(spec.kind, "mean_flips",
                   float(np.mean([r.flipped for r in results])))
        combined_pred = np.concatenate([adv_labels, labels[ben]])
        combined_y = np.concatenate([np.ones(adv.shape[0], dtype=np.int64),
                                     np.zeros(int(ben.sum()), dtype=np.int64)])
        report.add(spec.kind, "combined_acc",
                   compute_metrics(combined_pred, combined_y).acc)

        for i, r in enumerate(results):
            report.audit.append({
                "sample": i,
                "attack": spec.kind,
                "scenario": scenario.level,
                "defense": scenario.defense,
                "success": bool(r.success),
                "evaded_pipeline": bool(adv_labels[i] == 0),
                "iterations": r.iterations_used,
                "flips": r.flipped,
                "queries": r.queries,
            })
    return report


# ---------------------------------------------------------------------------
# serialization


def _format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_report_csv(report: EvaluationReport, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in report.rows:
            writer.writerow([_format_value(row[c]) for c in CSV_COLUMNS])


def write_report_json(report: EvaluationReport, path: str) -> None:
    doc = {
        "scenario": report.level,
        "defense": report.defense,
        "seed": report.seed,
        "rows": report.rows,
    }
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n")


def write_audit_jsonl(report: EvaluationReport, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for entry in report.audit:
            fh.write(json.dumps(entry, sort_keys=True, separators=(",", ":")) + "\n")


def read_report_json(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)
