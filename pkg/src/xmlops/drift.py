"""Data-drift detection against a training-time baseline.

Two complementary statistics per feature, both label-free:

  PSI  = sum over bins of (p - q) * ln(p / q), probabilities floored at
         1e-4 before the formula so empty bins stay finite. Bins are the
         baseline's 10 quantile bins with outer bins extended to +-inf.
  KS   = sup_x |F_base(x) - F_window(x)|, the two-sample statistic over
         the raw values via a merged sorted scan.

A window is *drifting* when any feature exceeds either threshold; that
verdict raises a data_drift alert. Labels are never consulted: the
interface receives payload matrices only.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime

import numpy as np

from .alerts import AlertBook
from .canonical import content_hash, format_timestamp, parse_timestamp
from .entities import _utcnow
from .errors import ValidationError
from .store import FileStore

KIND_BASELINE = "baseline"
KIND_DRIFT_REPORT = "drift_report"

PROBABILITY_FLOOR = 1e-4
QUANTILE_BINS = 10
MIN_BASELINE_SAMPLES = 20
DEFAULT_PSI_ALERT = 0.2
DEFAULT_KS_ALERT = 0.3


@dataclass
class FeatureBins:
    edges: list[float]  # interior bin edges, ascending; outer bins reach +-inf
    probs: list[float]
    degenerate: bool = False


@dataclass
class DriftBaseline:
    baseline_id: str
    dataset: str
    features: list[FeatureBins]
    cdf_samples: list[list[float]]  # sorted training values per feature
    created_at: datetime

    def to_doc(self) -> dict:
        return {
            "baseline_id": self.baseline_id,
            "dataset": self.dataset,
            "features": [{"edges": f.edges, "probs": f.probs, "degenerate": f.degenerate}
                         for f in self.features],
            "cdf_samples": self.cdf_samples,
            "created_at": format_timestamp(self.created_at),
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "DriftBaseline":
        return cls(doc["baseline_id"], doc["dataset"],
                   [FeatureBins(f["edges"], f["probs"], f.get("degenerate", False))
                    for f in doc["features"]],
                   doc["cdf_samples"], parse_timestamp(doc["created_at"]))


@dataclass
class DriftReport:
    baseline_id: str
    deployment_id: str | None
    features: list[dict]  # per feature: {"psi": float, "ks": float}
    window: list[str]  # [start, end] timestamps
    verdict: str  # stable | drifting
    thresholds: dict
    created_at: datetime
    seq: int = 0
    alert_id: str | None = None

    def to_doc(self) -> dict:
        # canonical JSON bans non-finite floats; disabled thresholds persist as null
        thresholds = {k: (v if v == v and abs(v) != float("inf") else None)
                      for k, v in self.thresholds.items()}
        return {
            "baseline_id": self.baseline_id,
            "deployment_id": self.deployment_id,
            "features": self.features,
            "window": self.window,
            "verdict": self.verdict,
            "thresholds": thresholds,
            "created_at": format_timestamp(self.created_at),
            "seq": self.seq,
            "alert_id": self.alert_id,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "DriftReport":
        thresholds = {k: (float("inf") if v is None else v)
                      for k, v in doc["thresholds"].items()}
        return cls(doc["baseline_id"], doc.get("deployment_id"), doc["features"],
                   doc["window"], doc["verdict"], thresholds,
                   parse_timestamp(doc["created_at"]), doc.get("seq", 0),
                   doc.get("alert_id"))


def fit_feature_bins(values: np.ndarray) -> FeatureBins:
    """10 quantile bins from training values; duplicate quantiles merge.
    Constant features collapse to a single full-probability bin and are
    flagged degenerate."""
    values = np.sort(np.asarray(values, dtype=float))
    if values[0] == values[-1]:
        return FeatureBins(edges=[], probs=[1.0], degenerate=True)
    qs = np.quantile(values, np.linspace(0.1, 0.9, QUANTILE_BINS - 1))
    edges = np.unique(qs)
    probs = _bin_probs(edges, values)
    return FeatureBins(edges=[float(e) for e in edges], probs=probs)


def _bin_probs(edges, values) -> list[float]:
    values = np.asarray(values, dtype=float)
    if len(edges) == 0:
        return [1.0]
    idx = np.digitize(values, np.asarray(edges, dtype=float), right=True)
    counts = np.bincount(idx, minlength=len(edges) + 1)
    return [float(c) / len(values) for c in counts]


def psi_from_probs(p: list[float], q: list[float]) -> float:
    """PSI with both probability vectors floored at 1e-4. Symmetric under
    swapping p and q, and always >= 0."""
    p_arr = np.maximum(np.asarray(p, dtype=float), PROBABILITY_FLOOR)
    q_arr = np.maximum(np.asarray(q, dtype=float), PROBABILITY_FLOOR)
    return float(np.sum((p_arr - q_arr) * np.log(p_arr / q_arr)))


def ks_two_sample(a, b) -> float:
    """Two-sample Kolmogorov-Smirnov statistic by merged sorted scan."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    if len(a) == 0 or len(b) == 0:
        raise ValidationError("KS statistic needs non-empty samples")
    grid = np.concatenate([a, b])
    grid.sort()
    f_a = np.searchsorted(a, grid, side="right") / len(a)
    f_b = np.searchsorted(b, grid, side="right") / len(b)
    return float(np.max(np.abs(f_a - f_b)))


def _window_matrix(window, width: int) -> np.ndarray:
    if len(window) == 0:
        raise ValidationError("drift window must be non-empty")
    matrix = []
    for i, payload in enumerate(window):
        row = list(payload)
        if len(row) != width:
            raise ValidationError(
                f"dimension mismatch: window[{i}] has {len(row)} features, "
                f"baseline has {width}")
        if any(c is None for c in row):
            raise ValidationError(f"window[{i}] has missing cells")
        matrix.append(row)
    return np.asarray(matrix, dtype=float)


class DriftMonitor:
    def __init__(self, store: FileStore, alerts: AlertBook):
        self._store = store
        self._alerts = alerts

    def fit_baseline(self, admin, dataset_id: str) -> DriftBaseline:
        dataset = admin.get_dataset(dataset_id)
        if not dataset.sealed:
            raise ValidationError(f"dataset {dataset_id} must be sealed to fit a baseline")
        if len(dataset.members) < MIN_BASELINE_SAMPLES:
            raise ValidationError(
                f"baseline needs >= {MIN_BASELINE_SAMPLES} samples, "
                f"dataset has {len(dataset.members)}")
        payloads = [admin.get_sample(sid).payload for sid in dataset.members]
        width = len(payloads[0])
        matrix = _window_matrix(payloads, width)
        features = [fit_feature_bins(matrix[:, j]) for j in range(width)]
        cdf_samples = [sorted(float(v) for v in matrix[:, j]) for j in range(width)]
        baseline = DriftBaseline(
            baseline_id=content_hash({"dataset": dataset_id,
                                      "features": [f.probs for f in features],
                                      "cdf": cdf_samples}),
            dataset=dataset_id, features=features, cdf_samples=cdf_samples,
            created_at=_utcnow())
        if not self._store.has_meta(KIND_BASELINE, baseline.baseline_id):
            self._store.put_meta(KIND_BASELINE, baseline.baseline_id, baseline.to_doc())
        return baseline

    def get_baseline(self, baseline_id: str) -> DriftBaseline:
        return DriftBaseline.from_doc(self._store.get_meta(KIND_BASELINE, baseline_id))

    def psi(self, baseline: DriftBaseline, window) -> list[float]:
        matrix = _window_matrix(window, len(baseline.features))
        out = []
        for j, bins in enumerate(baseline.features):
            q = _bin_probs(bins.edges, matrix[:, j])
            out.append(psi_from_probs(bins.probs, q))
        return out

    def ks_statistic(self, baseline: DriftBaseline, window) -> list[float]:
        matrix = _window_matrix(window, len(baseline.features))
        return [ks_two_sample(baseline.cdf_samples[j], matrix[:, j])
                for j in range(len(baseline.features))]

    def evaluate_drift(self, baseline: DriftBaseline, window,
                       thresholds: dict | None = None,
                       deployment_id: str | None = None,
                       window_span: tuple | None = None) -> DriftReport:
        """Score a window and persist the report; drifting appends an alert."""
        thresholds = {
            "psi_alert": DEFAULT_PSI_ALERT,
            "ks_alert": DEFAULT_KS_ALERT,
            **(thresholds or {}),
        }
        psis = self.psi(baseline, window)
        kss = self.ks_statistic(baseline, window)
        features = [{"psi": p, "ks": k} for p, k in zip(psis, kss)]
        exceeded = [j for j, f in enumerate(features)
                    if f["psi"] > thresholds["psi_alert"] or f["ks"] > thresholds["ks_alert"]]
        verdict = "drifting" if exceeded else "stable"
        now = _utcnow()
        span = window_span or (now, now)
        report = DriftReport(
            baseline_id=baseline.baseline_id,
            deployment_id=deployment_id,
            features=features,
            window=[format_timestamp(parse_timestamp(span[0])),
                    format_timestamp(parse_timestamp(span[1]))],
            verdict=verdict,
            thresholds=thresholds,
            created_at=now,
            seq=self._store.next_seq("drift_report"),
        )
        if exceeded:
            alert = self._alerts.raise_alert(
                "data_drift",
                f"data drift on feature(s) {exceeded}: "
                + ", ".join(f"psi={features[j]['psi']:.3f} ks={features[j]['ks']:.3f}"
                            for j in exceeded),
                deployment_id=deployment_id,
                metric="psi",
                details={"features": features, "exceeded": exceeded,
                         "thresholds": thresholds},
                now=now,
            )
            report.alert_id = alert.alert_id
        report_id = content_hash({"seq": report.seq, "baseline": baseline.baseline_id})
        self._store.put_meta(KIND_DRIFT_REPORT, report_id, report.to_doc())
        return report

    def latest_report(self, deployment_id: str) -> DriftReport | None:
        latest = None
        for doc in self._store.iter_meta(KIND_DRIFT_REPORT):
            if doc.get("deployment_id") != deployment_id:
                continue
            report = DriftReport.from_doc(doc)
            if latest is None or report.seq > latest.seq:
                latest = report
        return latest
