"""Domain types: the value objects every component reads and writes.

Identity-bearing types are content addressed: their id is the SHA-256 of a
fixed subset of fields (the "hash basis"), so re-serializing a stored record
reproduces its id. Operational state that legitimately changes (a dataset's
sealed flag, a deployment's status, a trigger's consumed flag) is kept
outside the hash basis.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime
from typing import Any

from .canonical import content_hash, format_timestamp, parse_timestamp
from .errors import ValidationError

FORMAT_TAGS = frozenset({"tabular_row", "timeseries_window"})
ANNOTATION_ORIGINS = frozenset({"human", "system"})
ARCHITECTURES = frozenset({"linear_regression", "logistic_regression", "knn"})
MODEL_STAGES = frozenset({"registered", "deployed", "archived"})
EXPLAINER_METHODS = frozenset(
    {"linear_exact", "permutation_importance", "local_surrogate", "counterfactual"}
)
EXPLAINER_KINDS = frozenset({"post_hoc", "interpretable", "data"})
RECIPE_STEPS = frozenset({"standardize", "clip", "impute_mean", "window"})
LINEAGE_RELATIONS = frozenset(
    {"derived_from", "trained_on", "produced", "explains", "deployed_as", "feedback_on"}
)
DEPLOYMENT_SCHEMES = frozenset({"single", "shadow", "canary", "ab"})
DEPLOYMENT_STATUSES = frozenset({"active", "retired"})
ALERT_SOURCES = frozenset({"data_drift", "performance", "explainer"})
TRIGGER_CAUSES = frozenset(
    {"performance_degradation", "data_drift", "new_annotations", "manual"}
)
FEEDBACK_KINDS = frozenset({"prediction", "data_quality", "explanation"})
FEEDBACK_VERDICTS = frozenset({"accept", "reject"})


def _require(value: str, allowed: frozenset, what: str) -> str:
    if value not in allowed:
        raise ValidationError(f"invalid {what}: {value!r} (allowed: {sorted(allowed)})")
    return value


@dataclass
class SampleRecord:
    """Immutable, content-addressed data unit with capture provenance."""

    sample_id: str
    payload: list[float | None]
    captured_at: datetime
    source: dict[str, Any]  # equipment_id, location, sensor_config
    format_tag: str

    @staticmethod
    def hash_basis(payload, captured_at: datetime, source, format_tag: str) -> dict:
        return {
            "payload": payload,
            "captured_at": format_timestamp(captured_at),
            "source": source,
            "format_tag": format_tag,
        }

    @classmethod
    def create(cls, payload, captured_at, source, format_tag="tabular_row") -> "SampleRecord":
        _require(format_tag, FORMAT_TAGS, "format_tag")
        captured_at = parse_timestamp(captured_at)
        if "equipment_id" not in source:
            raise ValidationError("provenance must include equipment_id")
        source = {
            "equipment_id": str(source["equipment_id"]),
            "location": str(source.get("location", "")),
            "sensor_config": dict(source.get("sensor_config", {})),
        }
        basis = cls.hash_basis(payload, captured_at, source, format_tag)
        return cls(content_hash(basis), list(payload), captured_at, source, format_tag)

    def to_doc(self) -> dict:
        return {"sample_id": self.sample_id, **self.hash_basis(
            self.payload, self.captured_at, self.source, self.format_tag)}

    @classmethod
    def from_doc(cls, doc: dict) -> "SampleRecord":
        return cls(doc["sample_id"], doc["payload"], parse_timestamp(doc["captured_at"]),
                   doc["source"], doc["format_tag"])


@dataclass
class PreprocessingRecipe:
    """Ordered, parameterized preprocessing steps; bit-reproducible by id."""

    recipe_id: str
    steps: list[dict]

    @classmethod
    def create(cls, steps: list[dict]) -> "PreprocessingRecipe":
        if not steps:
            raise ValidationError("recipe must have at least one step")
        norm = []
        for step in steps:
            name = _require(step.get("name"), RECIPE_STEPS, "recipe step")
            params = dict(step.get("params", {}))
            norm.append({"name": name, "params": params})
        return cls(content_hash({"steps": norm}), norm)

    def to_doc(self) -> dict:
        return {"recipe_id": self.recipe_id, "steps": self.steps}

    @classmethod
    def from_doc(cls, doc: dict) -> "PreprocessingRecipe":
        return cls(doc["recipe_id"], doc["steps"])


@dataclass
class DatasetVersion:
    """Ordered member list frozen at a point in time.

    The id covers members and recipe only; `sealed` is the one-way
    operational flag and stays outside the hash basis.
    """

    dataset_id: str
    members: list[str]
    recipe: str | None
    parent: str | None
    sealed: bool
    created_at: datetime
    warnings: list[str] = field(default_factory=list)

    @staticmethod
    def compute_id(members: list[str], recipe: str | None) -> str:
        return content_hash({"members": list(members), "recipe": recipe})

    @classmethod
    def create(cls, members, recipe=None, parent=None, created_at=None) -> "DatasetVersion":
        created_at = parse_timestamp(created_at) if created_at else _utcnow()
        return cls(cls.compute_id(members, recipe), list(members), recipe, parent,
                   False, created_at)

    def to_doc(self) -> dict:
        return {
            "dataset_id": self.dataset_id,
            "members": self.members,
            "recipe": self.recipe,
            "parent": self.parent,
            "sealed": self.sealed,
            "created_at": format_timestamp(self.created_at),
            "warnings": self.warnings,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "DatasetVersion":
        return cls(doc["dataset_id"], doc["members"], doc.get("recipe"), doc.get("parent"),
                   doc["sealed"], parse_timestamp(doc["created_at"]), doc.get("warnings", []))


@dataclass
class Annotation:
    """Label attached to a sample; multiple allowed, latest wins for training."""

    annotation_id: str
    sample_id: str
    label: float | int
    author: str
    origin: str
    created_at: datetime

    @classmethod
    def create(cls, sample_id, label, author, origin="human", created_at=None) -> "Annotation":
        _require(origin, ANNOTATION_ORIGINS, "annotation origin")
        if isinstance(label, bool) or not isinstance(label, (int, float)):
            raise ValidationError(f"label must be numeric, got {label!r}")
        import math
        if not math.isfinite(float(label)):
            raise ValidationError(f"label must be finite, got {label!r}")
        created_at = parse_timestamp(created_at) if created_at else _utcnow()
        basis = {
            "sample_id": sample_id,
            "label": float(label),
            "author": author,
            "origin": origin,
            "created_at": format_timestamp(created_at),
        }
        return cls(content_hash(basis), sample_id, float(label), author, origin, created_at)

    def to_doc(self) -> dict:
        return {
            "annotation_id": self.annotation_id,
            "sample_id": self.sample_id,
            "label": self.label,
            "author": self.author,
            "origin": self.origin,
            "created_at": format_timestamp(self.created_at),
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "Annotation":
        return cls(doc["annotation_id"], doc["sample_id"], doc["label"], doc["author"],
                   doc["origin"], parse_timestamp(doc["created_at"]))


@dataclass
class ExclusionMark:
    """One-way quality mark: the sample never enters newly defined datasets."""

    sample_id: str
    reason: str
    author: str
    created_at: datetime

    def to_doc(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "reason": self.reason,
            "author": self.author,
            "created_at": format_timestamp(self.created_at),
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "ExclusionMark":
        return cls(doc["sample_id"], doc["reason"], doc["author"],
                   parse_timestamp(doc["created_at"]))


@dataclass
class TrainingRun:
    """Fully traceable training execution."""

    run_id: str
    seq: int
    dataset: str
    split: dict  # train_frac, val_frac, test_frac, seed
    hyperparams: dict
    metrics: dict  # split name -> metric map
    produced_model: str | None
    architecture: str
    started_at: datetime
    finished_at: datetime | None
    split_materialization: dict | None = None  # train/val/test member id lists

    def to_doc(self) -> dict:
        return {
            "run_id": self.run_id,
            "seq": self.seq,
            "dataset": self.dataset,
            "split": self.split,
            "hyperparams": self.hyperparams,
            "metrics": self.metrics,
            "produced_model": self.produced_model,
            "architecture": self.architecture,
            "started_at": format_timestamp(self.started_at),
            "finished_at": format_timestamp(self.finished_at) if self.finished_at else None,
            "split_materialization": self.split_materialization,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "TrainingRun":
        return cls(doc["run_id"], doc["seq"], doc["dataset"], doc["split"], doc["hyperparams"],
                   doc["metrics"], doc.get("produced_model"), doc["architecture"],
                   parse_timestamp(doc["started_at"]),
                   parse_timestamp(doc["finished_at"]) if doc.get("finished_at") else None,
                   doc.get("split_materialization"))


@dataclass
class ModelVersion:
    """Registered model artifact with full training provenance.

    stage is null until register_model assigns a registry sequence number.
    """

    model_id: str
    architecture: str
    architecture_version: str
    init_seed: int
    training_run: str
    software_manifest: dict
    metrics: dict  # metric name -> float | None (test split reference metrics)
    stage: str | None
    weights_ref: str  # content hash of the artifact blob
    task: str  # regression | binary_classification
    n_features: int
    baseline: list[float]  # training-set feature means, explanation reference point
    registry_seq: int | None = None

    @staticmethod
    def compute_id(architecture, architecture_version, init_seed, hyperparams,
                   dataset_id, split, weights_ref) -> str:
        return content_hash({
            "architecture": architecture,
            "architecture_version": architecture_version,
            "init_seed": init_seed,
            "hyperparams": hyperparams,
            "dataset": dataset_id,
            "split": split,
            "weights_ref": weights_ref,
        })

    def to_doc(self) -> dict:
        return {
            "model_id": self.model_id,
            "architecture": self.architecture,
            "architecture_version": self.architecture_version,
            "init_seed": self.init_seed,
            "training_run": self.training_run,
            "software_manifest": self.software_manifest,
            "metrics": self.metrics,
            "stage": self.stage,
            "weights_ref": self.weights_ref,
            "task": self.task,
            "n_features": self.n_features,
            "baseline": self.baseline,
            "registry_seq": self.registry_seq,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "ModelVersion":
        return cls(doc["model_id"], doc["architecture"], doc["architecture_version"],
                   doc["init_seed"], doc["training_run"], doc["software_manifest"],
                   doc["metrics"], doc.get("stage"), doc["weights_ref"], doc["task"],
                   doc["n_features"], doc["baseline"], doc.get("registry_seq"))


@dataclass
class ExplainerVersion:
    """Registered explanation method bound to compatible models."""

    explainer_id: str
    method: str
    kind: str
    config: dict
    compatible_models: list[str]
    feedback_tally: dict = field(default_factory=lambda: {"accept": 0, "reject": 0})
    registry_seq: int | None = None

    @classmethod
    def create(cls, method, kind, config, compatible_models) -> "ExplainerVersion":
        _require(method, EXPLAINER_METHODS, "explainer method")
        _require(kind, EXPLAINER_KINDS, "explainer kind")
        basis = {
            "method": method,
            "kind": kind,
            "config": dict(config),
            "compatible_models": list(compatible_models),
        }
        return cls(content_hash(basis), method, kind, dict(config), list(compatible_models))

    def to_doc(self) -> dict:
        return {
            "explainer_id": self.explainer_id,
            "method": self.method,
            "kind": self.kind,
            "config": self.config,
            "compatible_models": self.compatible_models,
            "feedback_tally": self.feedback_tally,
            "registry_seq": self.registry_seq,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "ExplainerVersion":
        return cls(doc["explainer_id"], doc["method"], doc["kind"], doc["config"],
                   doc["compatible_models"],
                   doc.get("feedback_tally", {"accept": 0, "reject": 0}),
                   doc.get("registry_seq"))


@dataclass
class LineageEdge:
    """Directed, append-only relationship between two entity ids."""

    from_id: str
    to_id: str
    relation: str
    archived: bool = False

    def __post_init__(self):
        _require(self.relation, LINEAGE_RELATIONS, "lineage relation")

    def to_doc(self) -> dict:
        return {"from_id": self.from_id, "to_id": self.to_id,
                "relation": self.relation, "archived": self.archived}

    @classmethod
    def from_doc(cls, doc: dict) -> "LineageEdge":
        return cls(doc["from_id"], doc["to_id"], doc["relation"], doc.get("archived", False))


@dataclass
class Deployment:
    """Serving configuration for one logical endpoint."""

    deployment_id: str
    endpoint: str
    scheme: str
    primary_model: str
    secondary_model: str | None
    traffic_fraction: float | None
    bound_explainer: str | None
    status: str
    created_at: datetime
    routing_seed: int
    defer_explanations: bool = False
    promoted_from: str | None = None

    def validate_scheme(self) -> None:
        _require(self.scheme, DEPLOYMENT_SCHEMES, "deployment scheme")
        if self.scheme == "single":
            if self.secondary_model is not None:
                raise ValidationError("single scheme forbids a secondary model")
        else:
            if self.secondary_model is None:
                raise ValidationError(f"{self.scheme} scheme requires a secondary model")
        if self.scheme in ("canary", "ab"):
            if self.traffic_fraction is None:
                raise ValidationError(f"{self.scheme} scheme requires traffic_fraction")
            if not (0.0 <= self.traffic_fraction <= 1.0):
                raise ValidationError(
                    f"traffic_fraction must be in [0,1], got {self.traffic_fraction}")

    def to_doc(self) -> dict:
        return {
            "deployment_id": self.deployment_id,
            "endpoint": self.endpoint,
            "scheme": self.scheme,
            "primary_model": self.primary_model,
            "secondary_model": self.secondary_model,
            "traffic_fraction": self.traffic_fraction,
            "bound_explainer": self.bound_explainer,
            "status": self.status,
            "created_at": format_timestamp(self.created_at),
            "routing_seed": self.routing_seed,
            "defer_explanations": self.defer_explanations,
            "promoted_from": self.promoted_from,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "Deployment":
        return cls(doc["deployment_id"], doc["endpoint"], doc["scheme"], doc["primary_model"],
                   doc.get("secondary_model"), doc.get("traffic_fraction"),
                   doc.get("bound_explainer"), doc["status"],
                   parse_timestamp(doc["created_at"]), doc["routing_seed"],
                   doc.get("defer_explanations", False), doc.get("promoted_from"))


@dataclass
class Alert:
    """System-raised condition requiring review or retraining."""

    alert_id: str
    source: str
    deployment_id: str | None
    metric: str | None
    message: str
    details: dict
    fired_at: datetime

    def to_doc(self) -> dict:
        return {
            "alert_id": self.alert_id,
            "source": self.source,
            "deployment_id": self.deployment_id,
            "metric": self.metric,
            "message": self.message,
            "details": self.details,
            "fired_at": format_timestamp(self.fired_at),
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "Alert":
        return cls(doc["alert_id"], doc["source"], doc.get("deployment_id"),
                   doc.get("metric"), doc["message"], doc.get("details", {}),
                   parse_timestamp(doc["fired_at"]))


@dataclass
class RetrainTrigger:
    """Automation trigger; consumed exactly once by a retrain."""

    trigger_id: str
    cause: str
    deployment_id: str
    fired_at: datetime
    consumed: bool = False
    resulting_run: str | None = None
    outcome: str | None = None  # retrained | no_op

    def to_doc(self) -> dict:
        return {
            "trigger_id": self.trigger_id,
            "cause": self.cause,
            "deployment_id": self.deployment_id,
            "fired_at": format_timestamp(self.fired_at),
            "consumed": self.consumed,
            "resulting_run": self.resulting_run,
            "outcome": self.outcome,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "RetrainTrigger":
        return cls(doc["trigger_id"], doc["cause"], doc["deployment_id"],
                   parse_timestamp(doc["fired_at"]), doc.get("consumed", False),
                   doc.get("resulting_run"), doc.get("outcome"))


@dataclass
class FeedbackRecord:
    """Human verdict on a prediction, a sample's quality, or an explanation."""

    feedback_id: str
    kind: str
    target_id: str
    verdict: str
    corrected_label: float | None
    comment: str
    author: str
    created_at: datetime

    @classmethod
    def create(cls, kind, target_id, verdict, corrected_label, comment, author,
               created_at=None) -> "FeedbackRecord":
        _require(kind, FEEDBACK_KINDS, "feedback kind")
        _require(verdict, FEEDBACK_VERDICTS, "feedback verdict")
        if corrected_label is not None and kind != "prediction":
            raise ValidationError("corrected_label is permitted only for kind=prediction")
        created_at = parse_timestamp(created_at) if created_at else _utcnow()
        # Idempotency bucket: identical feedback within the same minute is one event.
        bucket = created_at.astimezone().strftime("%Y-%m-%dT%H:%M")
        basis = {
            "kind": kind,
            "target_id": target_id,
            "verdict": verdict,
            "corrected_label": corrected_label,
            "author": author,
            "bucket": bucket,
        }
        return cls(content_hash(basis), kind, target_id, verdict,
                   float(corrected_label) if corrected_label is not None else None,
                   comment, author, created_at)

    def to_doc(self) -> dict:
        return {
            "feedback_id": self.feedback_id,
            "kind": self.kind,
            "target_id": self.target_id,
            "verdict": self.verdict,
            "corrected_label": self.corrected_label,
            "comment": self.comment,
            "author": self.author,
            "created_at": format_timestamp(self.created_at),
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "FeedbackRecord":
        return cls(doc["feedback_id"], doc["kind"], doc["target_id"], doc["verdict"],
                   doc.get("corrected_label"), doc.get("comment", ""), doc["author"],
                   parse_timestamp(doc["created_at"]))


def _utcnow() -> datetime:
    from datetime import timezone
    return datetime.now(timezone.utc)
