"""Evaluation metric suite.

Standard definitions throughout; anything with a zero denominator is
reported as None plus a reason code, never NaN:

    mae            mean |y - yhat|
    mse            mean (y - yhat)^2
    rmse           sqrt(mse)
    r2             1 - SSE/SST
    precision      TP / (TP + FP)
    recall         TP / (TP + FN)
    specificity    TN / (TN + FP)
    f1             harmonic mean of precision and recall
    accuracy       (TP + TN) / n          (companion metric, not in the core ten)
    quantile_loss  mean max(tau*e, (tau-1)*e), e = y - yhat
    vrc            Calinski-Harabasz: [B/(k-1)] / [W/(n-k)]

Each metric carries direction metadata (lower or higher is better) used by
run comparison and degradation checks. register_metric() is the extension
point for custom evaluation functions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ValidationError

TASKS = frozenset({"regression", "binary_classification", "clustering_assignments"})

LOWER_BETTER = {"mae", "mse", "rmse", "quantile_loss"}
HIGHER_BETTER = {"r2", "f1", "precision", "recall", "specificity", "accuracy", "vrc"}

_CUSTOM_METRICS: dict[str, tuple[Callable, str]] = {}


def register_metric(name: str, fn: Callable, direction: str = "higher") -> None:
    """Register a custom metric fn(predictions, labels) -> float.

    Custom metrics are appended to every regression/classification report.
    """
    if direction not in ("higher", "lower"):
        raise ValidationError("direction must be 'higher' or 'lower'")
    _CUSTOM_METRICS[name] = (fn, direction)
    (HIGHER_BETTER if direction == "higher" else LOWER_BETTER).add(name)


def metric_direction(name: str) -> str:
    if name in LOWER_BETTER:
        return "lower"
    if name in HIGHER_BETTER:
        return "higher"
    raise ValidationError(f"unknown metric: {name!r}")


@dataclass
class MetricReport:
    values: dict[str, float | None]
    reasons: dict[str, str] = field(default_factory=dict)
    split: str | None = None
    tau: float = 0.5

    def to_doc(self) -> dict:
        return {"values": self.values, "reasons": self.reasons,
                "split": self.split, "tau": self.tau}

    @classmethod
    def from_doc(cls, doc: dict) -> "MetricReport":
        return cls(doc["values"], doc.get("reasons", {}), doc.get("split"),
                   doc.get("tau", 0.5))


def compute_metrics(predictions, labels, task: str, tau: float = 0.5,
                    split: str | None = None) -> MetricReport:
    """Score predictions against labels for the given task.

    For clustering_assignments, predictions are the cluster assignments and
    labels are the point matrix being clustered.
    """
    if task not in TASKS:
        raise ValidationError(f"unknown task: {task!r}")
    if not (0.0 < tau < 1.0):
        raise ValidationError(f"quantile tau must be in (0,1), got {tau}")
    if task == "clustering_assignments":
        value, reason = vrc(points=labels, assignments=predictions)
        report = MetricReport({"vrc": value}, split=split, tau=tau)
        if reason:
            report.reasons["vrc"] = reason
        return report

    y_hat = np.asarray(predictions, dtype=float)
    y = np.asarray(labels, dtype=float)
    if y_hat.shape != y.shape or y_hat.ndim != 1:
        raise ValidationError(
            f"predictions and labels must be equal-length vectors, "
            f"got {y_hat.shape} vs {y.shape}")
    if len(y) < 1:
        raise ValidationError("metrics need at least one prediction")
    if not (np.all(np.isfinite(y_hat)) and np.all(np.isfinite(y))):
        raise ValidationError("predictions and labels must be finite")

    report = MetricReport({}, split=split, tau=tau)
    if task == "regression":
        _regression_metrics(report, y_hat, y, tau)
    else:
        _classification_metrics(report, y_hat, y)
    for name, (fn, _) in _CUSTOM_METRICS.items():
        report.values[name] = float(fn(y_hat, y))
    return report


def _regression_metrics(report: MetricReport, y_hat, y, tau: float) -> None:
    err = y - y_hat
    mse = float(np.mean(err ** 2))
    report.values["mae"] = float(np.mean(np.abs(err)))
    report.values["mse"] = mse
    report.values["rmse"] = math.sqrt(mse)
    sst = float(np.sum((y - y.mean()) ** 2))
    if sst == 0.0:
        report.values["r2"] = None
        report.reasons["r2"] = "constant_labels"
    else:
        report.values["r2"] = 1.0 - float(np.sum(err ** 2)) / sst
    report.values["quantile_loss"] = float(np.mean(np.maximum(tau * err, (tau - 1.0) * err)))


def _classification_metrics(report: MetricReport, y_hat, y) -> None:
    if not np.all(np.isin(y, (0.0, 1.0))):
        raise ValidationError("binary classification labels must be 0 or 1")
    # probabilities are welcome; the confusion matrix thresholds at 0.5
    classes = (y_hat > 0.5).astype(float)
    tp = float(np.sum((classes == 1.0) & (y == 1.0)))
    fp = float(np.sum((classes == 1.0) & (y == 0.0)))
    fn = float(np.sum((classes == 0.0) & (y == 1.0)))
    tn = float(np.sum((classes == 0.0) & (y == 0.0)))

    def ratio(num, den, name, reason):
        if den == 0.0:
            report.values[name] = None
            report.reasons[name] = reason
        else:
            report.values[name] = num / den

    ratio(tp, tp + fp, "precision", "no_positive_predictions")
    ratio(tp, tp + fn, "recall", "no_positive_labels")
    ratio(tn, tn + fp, "specificity", "no_negative_labels")
    precision, recall = report.values["precision"], report.values["recall"]
    if precision is None or recall is None or precision + recall == 0.0:
        report.values["f1"] = None
        report.reasons["f1"] = "zero_precision_recall"
    else:
        report.values["f1"] = 2.0 * precision * recall / (precision + recall)
    report.values["accuracy"] = (tp + tn) / len(y)


def vrc(points, assignments) -> tuple[float | None, str | None]:
    """Variance Ratio Criterion (Calinski-Harabasz) for a clustering.

    B is between-cluster dispersion (cluster sizes times squared distance
    of cluster means from the grand mean), W is total within-cluster
    dispersion. Returns (value, reason); reason is set when undefined.
    """
    x = np.asarray(points, dtype=float)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    labels = np.asarray(assignments)
    if len(labels) != len(x):
        raise ValidationError("assignments and points must have equal length")
    clusters = sorted(set(labels.tolist()))
    k, n = len(clusters), len(x)
    if k < 2:
        raise ValidationError(f"VRC needs k >= 2 clusters, got {k}")
    if n <= k:
        raise ValidationError(f"VRC needs more points than clusters (n={n}, k={k})")
    grand = x.mean(axis=0)
    between = 0.0
    within = 0.0
    for c in clusters:
        member = x[labels == c]
        centroid = member.mean(axis=0)
        between += len(member) * float(np.sum((centroid - grand) ** 2))
        within += float(np.sum((member - centroid) ** 2))
    if within == 0.0:
        return None, "zero_within_dispersion"
    return (between / (k - 1)) / (within / (n - k)), None


def is_worse(metric: str, candidate: float, reference: float,
             tolerance: float = 0.0) -> bool:
    """Direction-aware comparison: is candidate worse than reference by
    strictly more than the relative tolerance?"""
    if metric_direction(metric) == "lower":
        return candidate > reference * (1.0 + tolerance)
    return candidate < reference * (1.0 - tolerance)
