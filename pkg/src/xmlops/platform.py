"""Platform facade: one store, every component wired together.

This is the composition root used by the CLI, the HTTP app, and tests.
It also owns the periodic monitoring cycle (drift window policy,
degradation gate, explainer quality) and cross-component queries like
lineage resolution over every entity kind.
"""

from __future__ import annotations

from pathlib import Path

from .alerts import AlertBook
from .config import Config
from .dataops import DataAdmin
from .drift import DriftMonitor
from .errors import UnknownEntityError
from .explain import ExplainService
from .feedback import FeedbackService
from .lineage import LineageGraph, to_dot
from .observe import Observer
from .registry import Registry
from .serving import INFERENCE_LOG, ServingEngine
from .store import FileStore
from .training import Trainer

# meta kinds that participate in lineage resolution
ENTITY_KINDS = (
    "sample", "dataset", "recipe", "annotation", "exclusion", "run", "model",
    "explainer", "deployment", "baseline", "alert", "trigger", "feedback",
    "explanation", "outcome",
)

KIND_MONITOR_STATE = "monitor_state"


class Platform:
    def __init__(self, config: Config | None = None):
        self.config = (config or Config()).validate()
        self.config.ensure_store_writable()
        self.store = FileStore(Path(self.config.store_path))
        self.graph = LineageGraph(self.store)
        self.alerts = AlertBook(self.store)
        self.admin = DataAdmin(self.store, self.graph)
        self.trainer = Trainer(self.store, self.admin, self.graph)
        self.registry = Registry(self.store, self.graph)
        self.explain = ExplainService(self.store, self.admin, self.trainer, self.graph)
        self.serving = ServingEngine(self.store, self.registry, self.trainer,
                                     self.graph, self.explain)
        self.observer = Observer(self.store, self.admin, self.trainer, self.registry,
                                 self.serving, self.explain, self.alerts, self.graph)
        self.feedback = FeedbackService(self.store, self.admin, self.registry,
                                        self.serving, self.observer, self.explain,
                                        self.graph)
        self.drift = DriftMonitor(self.store, self.alerts)

    # -- lineage ------------------------------------------------------------

    def entity_exists(self, entity_id: str) -> bool:
        for kind in ENTITY_KINDS:
            if self.store.has_meta(kind, entity_id):
                return True
        return any(r["request_id"] == entity_id
                   for r in self.store.read_log(INFERENCE_LOG))

    def resolve_lineage(self, entity_id: str) -> dict:
        if not self.entity_exists(entity_id):
            raise UnknownEntityError("entity", entity_id)
        return self.graph.resolve(entity_id)

    def lineage_dot(self, entity_id: str) -> str:
        return to_dot(self.resolve_lineage(entity_id))

    # -- monitoring cycle ------------------------------------------------------

    def _monitor_state(self, deployment_id: str) -> dict:
        if self.store.has_meta(KIND_MONITOR_STATE, deployment_id):
            return self.store.get_meta(KIND_MONITOR_STATE, deployment_id)
        return {"deployment_id": deployment_id, "last_drift_seq": 0}

    def _save_monitor_state(self, state: dict) -> None:
        deployment_id = state["deployment_id"]
        if self.store.has_meta(KIND_MONITOR_STATE, deployment_id):
            self.store.update_meta(KIND_MONITOR_STATE, deployment_id, lambda _: state)
        else:
            self.store.put_meta(KIND_MONITOR_STATE, deployment_id, state)

    def baseline_for_deployment(self, deployment_id: str):
        """Drift baseline fitted on the primary model's training dataset."""
        deployment = self.serving.get_deployment(deployment_id)
        model = self.registry.get_model(deployment.primary_model)
        run = self.trainer.get_run(model.training_run)
        return self.drift.fit_baseline(self.admin, run.dataset)

    def check_drift(self, deployment_id: str, force: bool = False) -> dict | None:
        """Window policy: score the last `drift_window` inference inputs,
        but only once `drift_every` new records have arrived (unless forced).
        """
        records = self.serving.records_for(deployment_id)
        if not records:
            return None
        state = self._monitor_state(deployment_id)
        newest_seq = records[-1]["seq"]
        if not force and newest_seq - state["last_drift_seq"] < self.config.drift_every:
            return None
        window = [r["input"] for r in records[-self.config.drift_window:]]
        baseline = self.baseline_for_deployment(deployment_id)
        report = self.drift.evaluate_drift(
            baseline, window,
            thresholds={"psi_alert": self.config.drift_psi_alert,
                        "ks_alert": self.config.drift_ks_alert},
            deployment_id=deployment_id,
            window_span=(records[-len(window)]["created_at"],
                         records[-1]["created_at"]))
        state["last_drift_seq"] = newest_seq
        self._save_monitor_state(state)
        return report.to_doc()

    def run_monitor_cycle(self, force_drift: bool = False) -> dict:
        """One pass over every active deployment: data drift (label-free),
        label-resolved degradation, and explainer quality."""
        results = {}
        for deployment in self.serving.list_deployments(active_only=True):
            entry = {}
            try:
                entry["drift"] = self.check_drift(deployment.deployment_id,
                                                  force=force_drift)
            except Exception as exc:  # noqa: BLE001 - cycle must not die mid-pass
                entry["drift"] = {"error": str(exc)}
            entry["degradation"] = self.observer.check_degradation(
                deployment.deployment_id,
                tolerance=self.config.degradation_tolerance,
                min_resolved=self.config.degradation_min_resolved)
            entry["explainers"] = self.observer.monitor_explainers(
                deployment.deployment_id,
                floor=self.config.explainer_floor,
                min_explanations=self.config.explainer_min_explanations)
            results[deployment.deployment_id] = entry
        return results

    # -- health ------------------------------------------------------------

    def healthz(self) -> dict:
        from .schemas import SCHEMA_VERSION
        audit = self.store.audit_log(INFERENCE_LOG)
        return {
            "status": "ok",
            "schema_version": SCHEMA_VERSION,
            "store": {
                "path": str(self.store.root),
                "manifest": self.store.manifest,
                "inference_log": {"records": audit.records, "partial": audit.partial},
            },
            "components": {
                "samples": len(self.store.list_meta("sample")),
                "datasets": len(self.store.list_meta("dataset")),
                "runs": len(self.store.list_meta("run")),
                "models": len(self.store.list_meta("model")),
                "explainers": len(self.store.list_meta("explainer")),
                "deployments": len(self.store.list_meta("deployment")),
                "alerts": len(self.store.list_meta("alert")),
            },
        }
