"""Production observation: resolved-label performance, degradation gates,
automatic retraining, explainer monitoring, and system metrics.

Concept drift has no dedicated detector here; it is proxied by rolling
performance over label-resolved inference records, compared against the
deployed model's test-split reference metrics. Data drift (label-free) is
the drift module's job.

Retraining is deliberately conservative: a fired trigger assembles the old
training dataset plus newly labeled production samples, retrains the same
architecture and hyperparameters under a fresh seed, and redeploys as a
*shadow* against the incumbent. Promotion stays a human action.
"""

from __future__ import annotations

import math
from datetime import datetime, timedelta

import numpy as np

from .alerts import AlertBook
from .canonical import content_hash, format_timestamp, parse_timestamp
from .dataops import DataAdmin
from .entities import RetrainTrigger, _utcnow
from .errors import TriggerConsumedError, ValidationError
from .explain import ExplainService
from .lineage import LineageGraph
from .metrics import compute_metrics, is_worse
from .registry import Registry
from .serving import ServingEngine
from .store import FileStore
from .training import SplitSpec, Trainer

KIND_OUTCOME = "outcome"
KIND_TRIGGER = "trigger"

WINDOW_CAPACITY = 200
DEFAULT_TOLERANCE = 0.2
DEFAULT_MIN_RESOLVED = 30
DEFAULT_EXPLAINER_FLOOR = 0.5
DEFAULT_MIN_EXPLANATIONS = 20
SYSTEM_WINDOW_SECONDS = 60


class Observer:
    def __init__(self, store: FileStore, admin: DataAdmin, trainer: Trainer,
                 registry: Registry, serving: ServingEngine,
                 explainer: ExplainService, alerts: AlertBook, graph: LineageGraph):
        self._store = store
        self._admin = admin
        self._trainer = trainer
        self._registry = registry
        self._serving = serving
        self._explainer = explainer
        self._alerts = alerts
        self._graph = graph

    # -- outcomes ------------------------------------------------------------

    def record_outcome(self, request_id: str, true_label: float, author: str) -> dict:
        """Join a resolved label to an inference record.

        The production input is materialized as a SampleRecord with an
        annotation so later retrains can fold it into a dataset. Repeated
        resolution keeps every version for audit; the latest wins.
        """
        record = self._serving.find_record(request_id)
        if isinstance(true_label, bool) or not isinstance(true_label, (int, float)):
            raise ValidationError(f"label must be numeric, got {true_label!r}")
        if not math.isfinite(float(true_label)):
            raise ValidationError(f"label must be finite, got {true_label!r}")
        sample = self._admin.ingest_sample(record["input"], {
            "equipment_id": f"deployment/{record['deployment_id'][:12]}",
            "captured_at": record["created_at"],
            "sensor_config": {"request_id": request_id, "origin": "production"},
        })
        self._admin.attach_annotation(sample.sample_id, true_label, author, origin="human")
        seq = self._store.next_seq("outcome")
        outcome_id = content_hash({"request_id": request_id, "seq": seq})
        self._store.put_meta(KIND_OUTCOME, outcome_id, {
            "outcome_id": outcome_id,
            "seq": seq,
            "request_id": request_id,
            "deployment_id": record["deployment_id"],
            "label": float(true_label),
            "sample_id": sample.sample_id,
            "author": author,
            "created_at": format_timestamp(_utcnow()),
        })
        self._graph.add_edge(request_id, record["deployment_id"], "derived_from")
        self._graph.add_edge(outcome_id, request_id, "feedback_on")
        return self.performance_window(record["deployment_id"])

    def resolved_pairs(self, deployment_id: str) -> list[tuple[dict, dict]]:
        """(inference record, latest outcome) pairs, oldest first, capped to
        the rolling window capacity. Only resolved records enter."""
        latest: dict[str, dict] = {}
        for doc in self._store.iter_meta(KIND_OUTCOME):
            if doc["deployment_id"] != deployment_id:
                continue
            cur = latest.get(doc["request_id"])
            if cur is None or doc["seq"] > cur["seq"]:
                latest[doc["request_id"]] = doc
        pairs = []
        for record in self._serving.records_for(deployment_id):
            outcome = latest.get(record["request_id"])
            if outcome is not None:
                pairs.append((record, outcome))
        return pairs[-WINDOW_CAPACITY:]

    def resolved_request_ids(self, deployment_id: str) -> set[str]:
        return {doc["request_id"] for doc in self._store.iter_meta(KIND_OUTCOME)
                if doc["deployment_id"] == deployment_id}

    @staticmethod
    def _predicted_value(record: dict) -> float:
        output = record["output"]
        return output["class"] if "class" in output else output["value"]

    def performance_window(self, deployment_id: str) -> dict:
        deployment = self._serving.get_deployment(deployment_id)
        model = self._registry.get_model(deployment.primary_model)
        pairs = self.resolved_pairs(deployment_id)
        rolling = None
        if pairs:
            preds = [self._predicted_value(r) for r, _ in pairs]
            labels = [o["label"] for _, o in pairs]
            rolling = compute_metrics(preds, labels, model.task, split=None).to_doc()
        return {
            "deployment_id": deployment_id,
            "task": model.task,
            "resolved": len(pairs),
            "window_capacity": WINDOW_CAPACITY,
            "rolling": rolling,
            "reference": model.metrics,
        }

    # -- degradation ------------------------------------------------------------

    def check_degradation(self, deployment_id: str, metric: str | None = None,
                          tolerance: float = DEFAULT_TOLERANCE,
                          min_resolved: int = DEFAULT_MIN_RESOLVED) -> dict:
        """Fire an alert and a retrain trigger when the rolling metric is
        worse than the test-split reference by strictly more than the
        relative tolerance. Below min_resolved labels: explicit no-decision.
        """
        window = self.performance_window(deployment_id)
        if metric is None:
            metric = "mse" if window["task"] == "regression" else "f1"
        if window["resolved"] < min_resolved:
            return {"status": "no_decision", "metric": metric,
                    "reason": f"only {window['resolved']} resolved labels, "
                              f"need {min_resolved}"}
        rolling = window["rolling"]["values"].get(metric)
        reference = window["reference"].get(metric)
        if rolling is None or reference is None:
            return {"status": "no_decision", "metric": metric,
                    "reason": "metric undefined on window or reference"}
        if not is_worse(metric, rolling, reference, tolerance):
            return {"status": "ok", "metric": metric,
                    "rolling": rolling, "reference": reference}
        alert = self._alerts.raise_alert(
            "performance",
            f"{metric} degraded: rolling {rolling:.6g} vs reference {reference:.6g} "
            f"(tolerance {tolerance:.0%})",
            deployment_id=deployment_id, metric=metric,
            details={"rolling": rolling, "reference": reference,
                     "tolerance": tolerance, "resolved": window["resolved"]})
        trigger = self.fire_trigger("performance_degradation", deployment_id)
        return {"status": "degraded", "metric": metric, "rolling": rolling,
                "reference": reference, "alert_id": alert.alert_id,
                "trigger_id": trigger.trigger_id}

    # -- triggers ------------------------------------------------------------

    def fire_trigger(self, cause: str, deployment_id: str) -> RetrainTrigger:
        """At most one unconsumed trigger per (cause, deployment)."""
        for trigger in self.list_triggers(deployment_id=deployment_id):
            if trigger.cause == cause and not trigger.consumed:
                return trigger
        seq = self._store.next_seq("trigger")
        trigger = RetrainTrigger(
            trigger_id=content_hash({"cause": cause, "deployment": deployment_id,
                                     "seq": seq}),
            cause=cause, deployment_id=deployment_id, fired_at=_utcnow())
        self._store.put_meta(KIND_TRIGGER, trigger.trigger_id, trigger.to_doc())
        return trigger

    def get_trigger(self, trigger_id: str) -> RetrainTrigger:
        return RetrainTrigger.from_doc(self._store.get_meta(KIND_TRIGGER, trigger_id))

    def list_triggers(self, deployment_id: str | None = None) -> list[RetrainTrigger]:
        out = [RetrainTrigger.from_doc(d) for d in self._store.iter_meta(KIND_TRIGGER)]
        if deployment_id is not None:
            out = [t for t in out if t.deployment_id == deployment_id]
        out.sort(key=lambda t: (t.fired_at, t.trigger_id))
        return out

    # -- retraining ------------------------------------------------------------

    def retrain(self, trigger_id: str) -> dict:
        """Consume a trigger: fold newly labeled production samples into the
        incumbent's training dataset, retrain under a fresh seed, register,
        and deploy as a shadow. Never auto-promotes. Consuming an already
        consumed trigger returns the stored outcome without side effects.
        """
        trigger = self.get_trigger(trigger_id)
        if trigger.consumed:
            return {"status": trigger.outcome or "no_op",
                    "run_id": trigger.resulting_run,
                    "trigger_id": trigger_id, "already_consumed": True}
        deployment = self._serving.get_deployment(trigger.deployment_id)
        incumbent = self._registry.get_model(deployment.primary_model)
        old_run = self._trainer.get_run(incumbent.training_run)
        old_dataset = self._admin.get_dataset(old_run.dataset)

        known = set(old_dataset.members)
        excluded = self._admin.exclusion_set()
        new_samples = []
        for _, outcome in self.resolved_pairs(trigger.deployment_id):
            sid = outcome["sample_id"]
            if sid not in known and sid not in excluded and sid not in new_samples:
                new_samples.append(sid)
        if not new_samples:
            self._consume(trigger_id, outcome="no_op", run_id=None)
            return {"status": "no_op", "trigger_id": trigger_id,
                    "reason": "no new labeled production samples"}

        members = [sid for sid in old_dataset.members if sid not in excluded]
        members += new_samples
        dataset = self._admin.define_dataset(members, recipe=old_dataset.recipe,
                                             parent=old_dataset.dataset_id)
        self._admin.seal_dataset(dataset.dataset_id)

        fresh_seed = (incumbent.init_seed * 6364136223846793005 + trigger.fired_at.microsecond
                      + self._store.next_seq("retrain_seed")) % (2 ** 31)
        spec = SplitSpec.from_doc(old_run.split)
        run, model = self._trainer.train(
            incumbent.architecture, dataset.dataset_id, spec,
            old_run.hyperparams, fresh_seed)
        self._registry.register_model(model.model_id)
        shadow = self._serving.create_deployment(
            scheme="shadow",
            primary=deployment.primary_model,
            secondary=model.model_id,
            explainer=deployment.bound_explainer,
            endpoint=deployment.endpoint,
            defer_explanations=deployment.defer_explanations)
        self._consume(trigger_id, outcome="retrained", run_id=run.run_id)
        return {"status": "retrained", "trigger_id": trigger_id,
                "run_id": run.run_id, "model_id": model.model_id,
                "dataset_id": dataset.dataset_id,
                "deployment_id": shadow.deployment_id,
                "new_samples": len(new_samples)}

    def _consume(self, trigger_id: str, outcome: str, run_id: str | None) -> None:
        def _mark(doc):
            if doc.get("consumed"):
                raise TriggerConsumedError(f"trigger {trigger_id} already consumed")
            doc["consumed"] = True
            doc["outcome"] = outcome
            doc["resulting_run"] = run_id
            return doc

        self._store.update_meta(KIND_TRIGGER, trigger_id, _mark)

    # -- explainer monitoring ----------------------------------------------------

    def monitor_explainers(self, deployment_id: str,
                           floor: float = DEFAULT_EXPLAINER_FLOOR,
                           min_explanations: int = DEFAULT_MIN_EXPLANATIONS) -> dict:
        deployment = self._serving.get_deployment(deployment_id)
        if deployment.bound_explainer is None:
            return {"status": "no_decision", "reason": "no explainer bound"}
        explanations = self._explainer.list_explanations(
            explainer_id=deployment.bound_explainer, deployment_id=deployment_id)
        explanations = explanations[-WINDOW_CAPACITY:]
        if len(explanations) < min_explanations:
            return {"status": "no_decision",
                    "reason": f"only {len(explanations)} explanations, "
                              f"need {min_explanations}"}
        means = {
            score: float(np.mean([e.quality[score] for e in explanations]))
            for score in ("completeness", "stability", "fidelity", "relevance")
        }
        failing = {s: v for s, v in means.items() if v < floor}
        if not failing:
            return {"status": "ok", "means": means, "count": len(explanations)}
        alert = self._alerts.raise_alert(
            "explainer",
            "explainer quality below floor: "
            + ", ".join(f"{s}={v:.3f}" for s, v in failing.items()),
            deployment_id=deployment_id, metric="explainer_quality",
            details={"means": means, "floor": floor})
        return {"status": "alerted", "means": means, "failing": sorted(failing),
                "alert_id": alert.alert_id, "count": len(explanations)}

    # -- system metrics ------------------------------------------------------------

    def system_metrics(self, now: datetime | None = None,
                       window_seconds: int = SYSTEM_WINDOW_SECONDS) -> dict:
        """Per-endpoint latency percentiles (nearest-rank) and throughput
        over the trailing window. Empty windows report nulls."""
        now = now or _utcnow()
        cutoff = now - timedelta(seconds=window_seconds)
        by_deployment: dict[str, list[int]] = {}
        for record in self._store.read_log("inferences"):
            if parse_timestamp(record["created_at"]) >= cutoff:
                by_deployment.setdefault(record["deployment_id"], []).append(
                    record["latency_micros"])
        out = {"window_seconds": window_seconds, "deployments": {}}
        for deployment_id, latencies in sorted(by_deployment.items()):
            latencies.sort()
            out["deployments"][deployment_id] = {
                "requests": len(latencies),
                "throughput_rps": len(latencies) / window_seconds,
                "p50_micros": _nearest_rank(latencies, 50),
                "p95_micros": _nearest_rank(latencies, 95),
                "p99_micros": _nearest_rank(latencies, 99),
            }
        if not by_deployment:
            out["overall"] = {"requests": 0, "throughput_rps": 0.0,
                              "p50_micros": None, "p95_micros": None,
                              "p99_micros": None}
        else:
            merged = sorted(lat for ls in by_deployment.values() for lat in ls)
            out["overall"] = {
                "requests": len(merged),
                "throughput_rps": len(merged) / window_seconds,
                "p50_micros": _nearest_rank(merged, 50),
                "p95_micros": _nearest_rank(merged, 95),
                "p99_micros": _nearest_rank(merged, 99),
            }
        return out


def _nearest_rank(sorted_values: list, percentile: float):
    """Exact nearest-rank percentile: value at rank ceil(p/100 * n)."""
    if not sorted_values:
        return None
    rank = math.ceil(percentile / 100.0 * len(sorted_values))
    return sorted_values[max(rank, 1) - 1]
