"""Versioned wire schemas for API payloads.

The review UI validates its view models against `GET /schema` and refuses
to render on version mismatch, so bump SCHEMA_VERSION whenever a served
shape changes incompatibly.
"""

from __future__ import annotations

SCHEMA_VERSION = "1"

SCHEMAS = {
    "review_item": {
        "type": "object",
        "required": ["request_id", "deployment_id", "input", "output",
                     "uncertainty", "resolved", "created_at"],
        "properties": {
            "request_id": {"type": "string"},
            "deployment_id": {"type": "string"},
            "input": {"type": "array", "items": {"type": "number"}},
            "output": {"type": "object"},
            "explanation": {"type": ["string", "null"]},
            "uncertainty": {"type": "number", "minimum": 0, "maximum": 1},
            "resolved": {"type": "boolean"},
            "created_at": {"type": "string"},
        },
    },
    "explanation": {
        "type": "object",
        "required": ["explanation_id", "explainer", "model", "input", "baseline",
                     "attributions", "quality", "created_at"],
        "properties": {
            "explanation_id": {"type": "string"},
            "explainer": {"type": "string"},
            "model": {"type": "string"},
            "input": {"type": "array", "items": {"type": "number"}},
            "baseline": {"type": "array", "items": {"type": "number"}},
            "attributions": {"type": "array", "items": {"type": "number"}},
            "quality": {
                "type": "object",
                "required": ["completeness", "stability", "fidelity", "relevance"],
            },
            "surrogate": {"type": ["object", "null"]},
            "counterfactual": {"type": ["object", "null"]},
            "created_at": {"type": "string"},
        },
    },
    "deployment": {
        "type": "object",
        "required": ["deployment_id", "endpoint", "scheme", "primary_model",
                     "status", "created_at"],
        "properties": {
            "deployment_id": {"type": "string"},
            "endpoint": {"type": "string"},
            "scheme": {"type": "string",
                       "enum": ["single", "shadow", "canary", "ab"]},
            "primary_model": {"type": "string"},
            "secondary_model": {"type": ["string", "null"]},
            "traffic_fraction": {"type": ["number", "null"]},
            "bound_explainer": {"type": ["string", "null"]},
            "status": {"type": "string", "enum": ["active", "retired"]},
            "created_at": {"type": "string"},
        },
    },
    "alert": {
        "type": "object",
        "required": ["alert_id", "source", "message", "fired_at"],
        "properties": {
            "alert_id": {"type": "string"},
            "source": {"type": "string",
                       "enum": ["data_drift", "performance", "explainer"]},
            "deployment_id": {"type": ["string", "null"]},
            "metric": {"type": ["string", "null"]},
            "message": {"type": "string"},
            "details": {"type": "object"},
            "fired_at": {"type": "string"},
        },
    },
    "drift_report": {
        "type": "object",
        "required": ["baseline_id", "features", "window", "verdict", "thresholds",
                     "created_at"],
        "properties": {
            "baseline_id": {"type": "string"},
            "deployment_id": {"type": ["string", "null"]},
            "features": {"type": "array", "items": {"type": "object"}},
            "window": {"type": "array", "items": {"type": "string"}},
            "verdict": {"type": "string", "enum": ["stable", "drifting"]},
            "thresholds": {"type": "object"},
            "created_at": {"type": "string"},
        },
    },
    "metric_report": {
        "type": "object",
        "required": ["values"],
        "properties": {
            "values": {"type": "object"},
            "reasons": {"type": "object"},
            "split": {"type": ["string", "null"]},
            "tau": {"type": "number"},
        },
    },
    "feedback_submission": {
        "type": "object",
        "required": ["kind", "target_id", "verdict"],
        "properties": {
            "kind": {"type": "string",
                     "enum": ["prediction", "data_quality", "explanation"]},
            "target_id": {"type": "string"},
            "verdict": {"type": "string", "enum": ["accept", "reject"]},
            "corrected_label": {"type": ["number", "null"]},
            "comment": {"type": "string"},
            "author": {"type": "string"},
        },
    },
}


def schema_document() -> dict:
    return {"schema_version": SCHEMA_VERSION, "schemas": SCHEMAS}
