"""Confusion-matrix metrics for binary detection."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvariantViolation


@dataclass
class MetricSet:
    fpr: float
    fnr: float
    acc: float
    bacc: float
    f1: float
    runtime_s: float | None = None

    def as_dict(self) -> dict:
        return {"fpr": self.fpr, "fnr": self.fnr, "acc": self.acc,
                "bacc": self.bacc, "f1": self.f1}


def compute_metrics(predictions: np.ndarray, labels: np.ndarray) -> MetricSet:
    """Standard detection metrics; label 1 is the malicious (positive) class.

    Ratios with an empty denominator fall back to 0, and F1 is 0 when
    precision and recall are both 0.
    """
    predictions = np.asarray(predictions).ravel()
    labels = np.asarray(labels).ravel()
    if predictions.size == 0:
        raise InvariantViolation("cannot score an empty prediction set")
    if predictions.shape != labels.shape:
        raise InvariantViolation("predictions and labels differ in length")
    if not np.all((labels == 0) | (labels == 1)):
        raise InvariantViolation("labels must be binary")
    if not np.all((predictions == 0) | (predictions == 1)):
        raise InvariantViolation("predictions must be binary")
    predictions = predictions.astype(np.int64)
    labels = labels.astype(np.int64)

    tp = int(np.sum((predictions == 1) & (labels == 1)))
    tn = int(np.sum((predictions == 0) & (labels == 0)))
    fp = int(np.sum((predictions == 1) & (labels == 0)))
    fn = int(np.sum((predictions == 0) & (labels == 1)))

    fpr = fp / (fp + tn) if (fp + tn) else 0.0
    fnr = fn / (fn + tp) if (fn + tp) else 0.0
    acc = (tp + tn) / predictions.size
    bacc = ((1.0 - fpr) + (1.0 - fnr)) / 2.0
    precision = tp / (tp + fp) if (tp + fp) else 0.0
    recall = tp / (tp + fn) if (tp + fn) else 0.0
    f1 = 2.0 * precision * recall / (precision + recall) if (precision + recall) else 0.0
    return MetricSet(fpr=fpr, fnr=fnr, acc=acc, bacc=bacc, f1=f1)
