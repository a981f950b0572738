"""Model and explainer registry.

Registration assigns a monotonically increasing sequence number and flips
the model into the registered stage. Everything is idempotent: registering
the same artifact twice returns the same entry and sequence number.
"""

from __future__ import annotations

from .canonical import canonical_json_bytes
from .entities import ExplainerVersion, ModelVersion
from .errors import UnknownEntityError, ValidationError
from .explain import KIND_EXPLAINER
from .lineage import LineageGraph
from .store import FileStore
from .training import KIND_MODEL, KIND_RUN

SEQ_MODEL = "model_registry"
SEQ_EXPLAINER = "explainer_registry"


class Registry:
    def __init__(self, store: FileStore, graph: LineageGraph):
        self._store = store
        self._graph = graph

    # -- models ------------------------------------------------------------

    def register_model(self, model_id: str) -> ModelVersion:
        doc = self._store.get_meta(KIND_MODEL, model_id)
        model = ModelVersion.from_doc(doc)
        if model.registry_seq is not None:
            return model  # idempotent: same entry, same sequence number
        if not model.metrics:
            raise ValidationError(
                f"model {model_id} has no metrics; evaluate before registering")
        if model.training_run and self._store.has_meta(KIND_RUN, model.training_run):
            run = self._store.get_meta(KIND_RUN, model.training_run)
            if run.get("produced_model") != model_id:
                raise ValidationError(
                    f"training run {model.training_run} did not produce model {model_id}")
        seq = self._store.next_seq(SEQ_MODEL)

        def _register(doc):
            doc["stage"] = "registered"
            doc["registry_seq"] = seq
            return doc

        return ModelVersion.from_doc(
            self._store.update_meta(KIND_MODEL, model_id, _register))

    def get_model(self, model_id: str) -> ModelVersion:
        return ModelVersion.from_doc(self._store.get_meta(KIND_MODEL, model_id))

    def list_models(self) -> list[ModelVersion]:
        models = [ModelVersion.from_doc(d) for d in self._store.iter_meta(KIND_MODEL)]
        models.sort(key=lambda m: (m.registry_seq is None, m.registry_seq or 0, m.model_id))
        return models

    def set_stage(self, model_id: str, stage: str) -> ModelVersion:
        model = self.get_model(model_id)
        if model.registry_seq is None:
            raise ValidationError(f"model {model_id} is not registered")
        if stage == "deployed" and not model.metrics:
            raise ValidationError("metrics must be non-empty before deployment")

        def _set(doc):
            doc["stage"] = stage
            return doc

        return ModelVersion.from_doc(self._store.update_meta(KIND_MODEL, model_id, _set))

    def archive_model(self, model_id: str) -> ModelVersion:
        return self.set_stage(model_id, "archived")

    def import_predictor(self, predictor, metrics: dict, init_seed: int = 0,
                         manifest: dict | None = None) -> ModelVersion:
        """Admit an externally built predictor (the pluggable-model path).

        The artifact is content addressed like any trained model; callers
        provide the evaluation metrics since no tracked run exists.
        """
        from .predictors import ARCHITECTURE_VERSIONS
        from .training import software_manifest

        weights_ref = self._store.put_blob(canonical_json_bytes(predictor.to_doc()))
        model_id = ModelVersion.compute_id(
            predictor.architecture,
            ARCHITECTURE_VERSIONS.get(predictor.architecture, "0.0.0"),
            init_seed, {}, "external", {}, weights_ref)
        model = ModelVersion(
            model_id=model_id,
            architecture=predictor.architecture,
            architecture_version=ARCHITECTURE_VERSIONS.get(predictor.architecture, "0.0.0"),
            init_seed=init_seed,
            training_run="",
            software_manifest=manifest or software_manifest(),
            metrics=dict(metrics),
            stage=None,
            weights_ref=weights_ref,
            task=predictor.task,
            n_features=predictor.n_features,
            baseline=[0.0] * predictor.n_features,
        )
        if not self._store.has_meta(KIND_MODEL, model_id):
            self._store.put_meta(KIND_MODEL, model_id, model.to_doc())
        return self.get_model(model_id)

    # -- explainers ------------------------------------------------------------

    def register_explainer(self, method: str, kind: str, config: dict,
                           compatible_models: list[str]) -> ExplainerVersion:
        for model_id in compatible_models:
            if not self._store.has_meta(KIND_MODEL, model_id):
                raise UnknownEntityError("model", model_id)
        explainer = ExplainerVersion.create(method, kind, config, compatible_models)
        if self._store.has_meta(KIND_EXPLAINER, explainer.explainer_id):
            return ExplainerVersion.from_doc(
                self._store.get_meta(KIND_EXPLAINER, explainer.explainer_id))
        explainer.registry_seq = self._store.next_seq(SEQ_EXPLAINER)
        self._store.put_meta(KIND_EXPLAINER, explainer.explainer_id, explainer.to_doc())
        for model_id in compatible_models:
            self._graph.add_edge(explainer.explainer_id, model_id, "explains")
        return explainer

    def get_explainer(self, explainer_id: str) -> ExplainerVersion:
        return ExplainerVersion.from_doc(
            self._store.get_meta(KIND_EXPLAINER, explainer_id))

    def list_explainers(self) -> list[ExplainerVersion]:
        out = [ExplainerVersion.from_doc(d) for d in self._store.iter_meta(KIND_EXPLAINER)]
        out.sort(key=lambda e: (e.registry_seq or 0, e.explainer_id))
        return out

    def tally_explainer_feedback(self, explainer_id: str, verdict: str) -> ExplainerVersion:
        def _tally(doc):
            tally = doc.setdefault("feedback_tally", {"accept": 0, "reject": 0})
            tally[verdict] = tally.get(verdict, 0) + 1
            return doc

        return ExplainerVersion.from_doc(
            self._store.update_meta(KIND_EXPLAINER, explainer_id, _tally))
