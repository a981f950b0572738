"""Feedback ingestion, review queue, and side-by-side comparison.

Feedback forwarding is exactly-once: the feedback id is content addressed
over (kind, target, verdict, label, author, minute bucket), so resubmitting
the same verdict in the same bucket returns the stored record without
re-forwarding.

Forwarding contract:
    prediction   corrected label (or an accept, which confirms the model's
                 own prediction as the label) resolves the inference record
                 through the observer
    data_quality a reject marks the sample bad, excluding it from future
                 datasets
    explanation  the verdict lands on the explainer's feedback tally
"""

from __future__ import annotations

import numpy as np

from .dataops import DataAdmin
from .entities import FeedbackRecord
from .errors import UnknownEntityError, ValidationError
from .explain import KIND_EXPLANATION, ExplainService
from .lineage import LineageGraph
from .observe import Observer
from .registry import Registry
from .serving import ServingEngine
from .store import FileStore

KIND_FEEDBACK = "feedback"


class FeedbackService:
    def __init__(self, store: FileStore, admin: DataAdmin, registry: Registry,
                 serving: ServingEngine, observer: Observer,
                 explainer: ExplainService, graph: LineageGraph):
        self._store = store
        self._admin = admin
        self._registry = registry
        self._serving = serving
        self._observer = observer
        self._explainer = explainer
        self._graph = graph

    # -- submission ------------------------------------------------------------

    def submit_feedback(self, kind: str, target_id: str, verdict: str,
                        corrected_label: float | None = None, comment: str = "",
                        author: str = "anonymous") -> FeedbackRecord:
        feedback = FeedbackRecord.create(kind, target_id, verdict, corrected_label,
                                         comment, author)
        if self._store.has_meta(KIND_FEEDBACK, feedback.feedback_id):
            return FeedbackRecord.from_doc(
                self._store.get_meta(KIND_FEEDBACK, feedback.feedback_id))

        record = None
        if kind == "prediction":
            record = self._serving.find_record(target_id)  # raises on unknown
        elif kind == "data_quality":
            if not self._store.has_meta("sample", target_id):
                raise UnknownEntityError("sample", target_id)
        elif kind == "explanation":
            if not self._store.has_meta(KIND_EXPLANATION, target_id):
                raise UnknownEntityError("explanation", target_id)

        self._store.put_meta(KIND_FEEDBACK, feedback.feedback_id, feedback.to_doc())
        self._graph.add_edge(feedback.feedback_id, target_id, "feedback_on")

        if kind == "prediction":
            if corrected_label is not None:
                self._observer.record_outcome(target_id, corrected_label, author)
            elif verdict == "accept":
                # an accepted prediction is a confirmed label
                output = record["output"]
                label = output["class"] if "class" in output else output["value"]
                self._observer.record_outcome(target_id, label, author)
        elif kind == "data_quality" and verdict == "reject":
            self._admin.mark_bad(target_id, reason=comment or "rejected in review",
                                 author=author)
        elif kind == "explanation":
            explanation = self._explainer.get_explanation(target_id)
            self._registry.tally_explainer_feedback(explanation.explainer, verdict)
        return feedback

    def list_feedback(self, kind: str | None = None) -> list[FeedbackRecord]:
        out = [FeedbackRecord.from_doc(d) for d in self._store.iter_meta(KIND_FEEDBACK)]
        if kind is not None:
            out = [f for f in out if f.kind == kind]
        out.sort(key=lambda f: (f.created_at, f.feedback_id))
        return out

    # -- review queue ------------------------------------------------------------

    def review_queue(self, deployment_id: str, limit: int = 20) -> list[dict]:
        """Unresolved inference records, hardest first.

        Uncertainty: classifiers score 1 - |2p - 1|; regressors under a
        shadow scheme score normalized primary/shadow disagreement; plain
        regressors fall back to recency order (uncertainty 0, newest first).
        """
        deployment = self._serving.get_deployment(deployment_id)
        records = self._serving.records_for(deployment_id)
        resolved = self._observer.resolved_request_ids(deployment_id)
        for fb in self.list_feedback(kind="prediction"):
            resolved.add(fb.target_id)

        outputs = [self._value(r) for r in records]
        std = float(np.std(outputs)) if outputs else 0.0

        items = []
        for record in records:
            if record["request_id"] in resolved:
                continue
            items.append({
                "request_id": record["request_id"],
                "deployment_id": deployment_id,
                "input": record["input"],
                "output": record["output"],
                "explanation": record.get("explanation"),
                "uncertainty": self._uncertainty(record, std),
                "resolved": False,
                "created_at": record["created_at"],
                "seq": record["seq"],
            })
        items.sort(key=lambda it: (-it["uncertainty"], -it["seq"]))
        for item in items:
            item.pop("seq")
        return items[:limit]

    @staticmethod
    def _value(record: dict) -> float:
        output = record["output"]
        return output["class"] if "class" in output else output["value"]

    @staticmethod
    def _uncertainty(record: dict, rolling_std: float) -> float:
        output = record["output"]
        if "probability" in output:
            return 1.0 - abs(2.0 * output["probability"] - 1.0)
        shadow = record.get("shadow_output")
        if shadow is not None and "value" in shadow and "value" in output:
            disagreement = abs(output["value"] - shadow["value"])
            if rolling_std == 0.0:
                return 0.0 if disagreement == 0.0 else 1.0
            return min(1.0, disagreement / rolling_std)
        return 0.0

    # -- comparison ------------------------------------------------------------

    def compare_view(self, payloads: list, entries: list[dict]) -> dict:
        """Side-by-side outputs (and attributions when an explainer is
        named) for every payload x entry combination. Nothing persists."""
        if not payloads:
            raise ValidationError("compare needs at least one payload")
        if not entries:
            raise ValidationError("compare needs at least one model or explainer entry")
        results = []
        for entry in entries:
            explainer_id = entry.get("explainer_id")
            model_id = entry.get("model_id")
            if model_id is None and explainer_id is not None:
                explainer = self._registry.get_explainer(explainer_id)
                if not explainer.compatible_models:
                    raise ValidationError(
                        f"explainer {explainer_id} lists no compatible models; "
                        "name a model_id explicitly")
                model_id = explainer.compatible_models[0]
            if model_id is None:
                raise ValidationError("each compare entry needs model_id or explainer_id")
            predictor = self._serving._predictor(model_id)
            cells = []
            for payload in payloads:
                x = list(payload)
                if len(x) != predictor.n_features:
                    raise ValidationError(
                        f"payload has {len(x)} features, model {model_id} "
                        f"expects {predictor.n_features}")
                if predictor.task == "binary_classification":
                    proba = predictor.predict_proba(np.asarray(x, dtype=float))
                    output = {"class": 1.0 if proba > 0.5 else 0.0,
                              "probability": float(proba)}
                else:
                    output = {"value": predictor.predict(np.asarray(x, dtype=float))}
                cell = {"output": output}
                if explainer_id is not None:
                    explanation = self._explainer.explain(model_id, explainer_id,
                                                          payload=x)
                    cell["attributions"] = explanation.attributions
                    cell["quality"] = explanation.quality
                    cell["explanation_id"] = explanation.explanation_id
                cells.append(cell)
            results.append({"model_id": model_id, "explainer_id": explainer_id,
                            "cells": cells})
        return {"payloads": [list(p) for p in payloads], "entries": results}
