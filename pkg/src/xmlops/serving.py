"""Multi-scheme model serving with a routing-audit trail.

Schemes:
    single   primary answers
    shadow   primary answers; secondary also runs, its output is logged in
             shadow_output and never returned
    canary   secondary answers for a deterministic traffic_fraction share
             of request keys
    ab       deterministic key-bucketed assignment weighted by
             traffic_fraction

Routing is a pure function of (deployment routing seed, request_key): the
key is hashed with seeded FNV-1a, finalized through splitmix64 for uniform
buckets, and compared against traffic_fraction. The seed is stored on the
deployment, so an assignment can be audited and survives restarts.

Every accepted request appends one immutable record to the inference log:
input blob reference, output, which model served, shadow output when
present, latency, and the bound explanation when one was generated.
"""

from __future__ import annotations

import json
import time

import numpy as np

from .canonical import content_hash, format_timestamp, normalize_payload
from .entities import Deployment, _utcnow
from .errors import DeploymentStateError, UnknownEntityError, ValidationError
from .explain import ExplainService
from .lineage import LineageGraph
from .registry import Registry
from .store import FileStore
from .training import Trainer

KIND_DEPLOYMENT = "deployment"
INFERENCE_LOG = "inferences"

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def route_unit(request_key: str, seed: int) -> float:
    """Deterministic uniform value in [0,1) for a request key.

    Seeded FNV-1a with a splitmix64 finalizer; the finalizer matters, raw
    FNV low/high bits are not uniform enough for accurate traffic splits.
    """
    h = (_FNV_OFFSET ^ _splitmix64(seed)) & _MASK64
    for byte in request_key.encode("utf-8"):
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return _splitmix64(h) / 2.0 ** 64


class ServingEngine:
    def __init__(self, store: FileStore, registry: Registry, trainer: Trainer,
                 graph: LineageGraph, explainer: ExplainService):
        self._store = store
        self._registry = registry
        self._trainer = trainer
        self._graph = graph
        self._explainer = explainer
        self._predictor_cache: dict[str, object] = {}

    # -- deployments ---------------------------------------------------------

    def create_deployment(self, scheme: str, primary: str, secondary: str | None = None,
                          traffic_fraction: float | None = None,
                          explainer: str | None = None, endpoint: str = "default",
                          defer_explanations: bool = False,
                          promoted_from: str | None = None) -> Deployment:
        """Activate a deployment on an endpoint, retiring its predecessor."""
        for model_id in filter(None, (primary, secondary)):
            model = self._registry.get_model(model_id)
            if model.registry_seq is None:
                raise ValidationError(f"model {model_id} must be registered before deployment")
        if explainer is not None:
            exp = self._registry.get_explainer(explainer)
            # every model that can answer must be explainable; in shadow the
            # secondary never answers, so only the primary is checked there
            answering = [primary]
            if scheme in ("canary", "ab") and secondary is not None:
                answering.append(secondary)
            for model_id in answering:
                if exp.compatible_models and model_id not in exp.compatible_models:
                    raise ValidationError(
                        f"explainer {explainer} is not compatible with "
                        f"answering model {model_id}")
        seq = self._store.next_seq("deployment")
        created_at = _utcnow()
        deployment = Deployment(
            deployment_id=content_hash({"seq": seq, "endpoint": endpoint,
                                        "created_at": format_timestamp(created_at)}),
            endpoint=endpoint,
            scheme=scheme,
            primary_model=primary,
            secondary_model=secondary,
            traffic_fraction=traffic_fraction,
            bound_explainer=explainer,
            status="active",
            created_at=created_at,
            routing_seed=seq * 0x9E3779B9 + 17,
            defer_explanations=defer_explanations,
            promoted_from=promoted_from,
        )
        deployment.validate_scheme()
        previous = self.active_deployment(endpoint)
        self._store.put_meta(KIND_DEPLOYMENT, deployment.deployment_id, deployment.to_doc())
        if previous is not None:
            self.retire(previous.deployment_id)
        for model_id in filter(None, (primary, secondary)):
            self._graph.add_edge(model_id, deployment.deployment_id, "deployed_as")
            self._registry.set_stage(model_id, "deployed")
        if promoted_from is not None:
            self._graph.add_edge(deployment.deployment_id, promoted_from, "derived_from")
        return deployment

    def get_deployment(self, deployment_id: str) -> Deployment:
        return Deployment.from_doc(self._store.get_meta(KIND_DEPLOYMENT, deployment_id))

    def list_deployments(self, active_only: bool = False) -> list[Deployment]:
        out = [Deployment.from_doc(d) for d in self._store.iter_meta(KIND_DEPLOYMENT)]
        if active_only:
            out = [d for d in out if d.status == "active"]
        out.sort(key=lambda d: (d.created_at, d.deployment_id))
        return out

    def active_deployment(self, endpoint: str) -> Deployment | None:
        candidates = [d for d in self.list_deployments(active_only=True)
                      if d.endpoint == endpoint]
        return candidates[-1] if candidates else None

    def retire(self, deployment_id: str) -> Deployment:
        def _retire(doc):
            doc["status"] = "retired"
            return doc

        retired = Deployment.from_doc(
            self._store.update_meta(KIND_DEPLOYMENT, deployment_id, _retire))
        self._restage_models(retired)
        return retired

    def _restage_models(self, retired: Deployment) -> None:
        still_deployed = {m for d in self.list_deployments(active_only=True)
                          for m in (d.primary_model, d.secondary_model) if m}
        for model_id in filter(None, (retired.primary_model, retired.secondary_model)):
            if model_id not in still_deployed:
                self._registry.set_stage(model_id, "registered")

    # -- inference ---------------------------------------------------------

    def _predictor(self, model_id: str):
        if model_id not in self._predictor_cache:
            self._predictor_cache[model_id] = self._trainer.load_predictor(model_id)
        return self._predictor_cache[model_id]

    def _routes_to_secondary(self, deployment: Deployment, request_key: str) -> bool:
        if deployment.scheme not in ("canary", "ab"):
            return False
        return route_unit(request_key, deployment.routing_seed) < deployment.traffic_fraction

    @staticmethod
    def _output_doc(predictor, x) -> dict:
        if predictor.task == "binary_classification":
            proba = predictor.predict_proba(x)
            return {"class": 1.0 if proba > 0.5 else 0.0, "probability": float(proba)}
        return {"value": predictor.predict(x)}

    def infer(self, deployment_id: str, payload, request_key: str) -> dict:
        """Serve one request and append its immutable inference record."""
        started = time.perf_counter_ns()
        deployment = self.get_deployment(deployment_id)
        if deployment.status != "active":
            raise DeploymentStateError(f"deployment {deployment_id} is retired")
        cells = normalize_payload(payload)
        if any(c is None for c in cells):
            raise ValidationError("inference payloads must be complete (no missing cells)")
        x = np.asarray(cells, dtype=float)

        primary = self._predictor(deployment.primary_model)
        if len(x) != primary.n_features:
            raise ValidationError(
                f"payload has {len(x)} features, model expects {primary.n_features}")

        served_by = deployment.primary_model
        shadow_output = None
        if deployment.scheme == "shadow":
            secondary = self._predictor(deployment.secondary_model)
            shadow_output = self._output_doc(secondary, x)
        elif self._routes_to_secondary(deployment, request_key):
            served_by = deployment.secondary_model

        output = self._output_doc(self._predictor(served_by), x)

        explanation_id = None
        if deployment.bound_explainer and not deployment.defer_explanations:
            explanation_id = self._explainer.explain(
                served_by, deployment.bound_explainer, payload=list(x),
                deployment_id=deployment_id).explanation_id

        seq = self._store.next_seq("inference")
        request_id = content_hash({"deployment": deployment_id, "key": request_key,
                                   "seq": seq})
        record = {
            "request_id": request_id,
            "seq": seq,
            "deployment_id": deployment_id,
            "served_by": served_by,
            "shadow_output": shadow_output,
            "input_ref": self._store.put_blob(
                json.dumps([float(v) for v in x]).encode()),
            "input": [float(v) for v in x],
            "output": output,
            "explanation": explanation_id,
            "request_key": request_key,
            "latency_micros": (time.perf_counter_ns() - started) // 1000,
            "created_at": format_timestamp(_utcnow()),
        }
        self._store.append_log(INFERENCE_LOG, record)
        return {"request_id": request_id, "served_by": served_by, "output": output,
                "explanation": explanation_id, "deployment_id": deployment_id}

    def compute_deferred_explanations(self, deployment_id: str, limit: int | None = None) -> int:
        """Background pass for deployments that defer explanation work."""
        deployment = self.get_deployment(deployment_id)
        if deployment.bound_explainer is None:
            return 0
        done = 0
        for record in self.records_for(deployment_id):
            if record.get("explanation") is not None:
                continue
            self._explainer.explain(
                record["served_by"], deployment.bound_explainer,
                payload=record["input"], deployment_id=deployment_id,
                request_id=record["request_id"])
            done += 1
            if limit is not None and done >= limit:
                break
        return done

    def records_for(self, deployment_id: str) -> list[dict]:
        return [r for r in self._store.read_log(INFERENCE_LOG)
                if r["deployment_id"] == deployment_id]

    def find_record(self, request_id: str) -> dict:
        for record in self._store.read_log(INFERENCE_LOG):
            if record["request_id"] == request_id:
                return record
        raise UnknownEntityError("inference_record", request_id)

    # -- promotion ---------------------------------------------------------

    def promote(self, deployment_id: str) -> Deployment:
        """Promote the secondary of a shadow/canary/ab deployment to a new
        single-scheme deployment on the same endpoint."""
        deployment = self.get_deployment(deployment_id)
        if deployment.scheme == "single":
            raise DeploymentStateError(
                "single-scheme deployment has no secondary to promote")
        if deployment.status != "active":
            raise DeploymentStateError(f"deployment {deployment_id} is retired")
        explainer = deployment.bound_explainer
        if explainer is not None:
            exp = self._registry.get_explainer(explainer)
            if exp.compatible_models and deployment.secondary_model not in exp.compatible_models:
                explainer = None  # binding does not survive an incompatible promote
        return self.create_deployment(
            scheme="single",
            primary=deployment.secondary_model,
            explainer=explainer,
            endpoint=deployment.endpoint,
            defer_explanations=deployment.defer_explanations,
            promoted_from=deployment_id,
        )
