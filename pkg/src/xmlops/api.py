"""HTTP surface: one FastAPI app hosting every component.

JSON in, JSON out; schemas served at /schema for client validation.
Validation problems map to 400, unknown ids to 404, immutability conflicts
to 409. A background task runs the monitoring cycle on the configured
cadence while the app is up.
"""

from __future__ import annotations

import asyncio
import contextlib

from fastapi import FastAPI, Query, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .config import Config
from .errors import (
    DeploymentStateError,
    ImmutabilityError,
    TriggerConsumedError,
    UnknownEntityError,
    ValidationError,
    XmlopsError,
)
from .lineage import to_dot
from .platform import Platform
from .schemas import schema_document
from .training import SplitSpec


class IngestBody(BaseModel):
    payload: list[float | None]
    provenance: dict
    format_tag: str = "tabular_row"
    label: float | None = None


class DatasetBody(BaseModel):
    sample_ids: list[str]
    recipe: str | None = None


class RecipeBody(BaseModel):
    steps: list[dict]


class AnnotationBody(BaseModel):
    sample_id: str
    label: float
    author: str = "api"
    origin: str = "human"


class MarkBadBody(BaseModel):
    reason: str = "rejected"
    author: str = "api"


class RunBody(BaseModel):
    architecture: str
    dataset: str
    split: dict = Field(default_factory=lambda: {"train_frac": 0.8, "val_frac": 0.1,
                                                 "test_frac": 0.1, "seed": 0})
    hyperparams: dict = Field(default_factory=dict)
    seed: int = 0


class ExplainerBody(BaseModel):
    method: str
    kind: str = "post_hoc"
    config: dict = Field(default_factory=dict)
    compatible_models: list[str] = Field(default_factory=list)


class DeployBody(BaseModel):
    scheme: str
    primary_model: str
    secondary_model: str | None = None
    traffic_fraction: float | None = None
    explainer: str | None = None
    endpoint: str = "default"
    defer_explanations: bool = False


class InferBody(BaseModel):
    payload: list[float]
    request_key: str


class ExplainBody(BaseModel):
    model_id: str
    explainer_id: str
    payload: list[float] | None = None
    sample_id: str | None = None
    domain_knowledge: str = ""


class FeedbackBody(BaseModel):
    kind: str
    target_id: str
    verdict: str
    corrected_label: float | None = None
    comment: str = ""
    author: str = "api"


class CompareBody(BaseModel):
    payloads: list[list[float]]
    entries: list[dict]


def create_app(platform: Platform) -> FastAPI:
    @contextlib.asynccontextmanager
    async def lifespan(app: FastAPI):
        async def cycle():
            while True:
                await asyncio.sleep(platform.config.monitor_cadence_seconds)
                try:
                    await asyncio.to_thread(platform.run_monitor_cycle)
                except Exception:  # noqa: BLE001 - monitor must survive bad cycles
                    pass

        task = asyncio.create_task(cycle())
        yield
        task.cancel()
        with contextlib.suppress(asyncio.CancelledError):
            await task

    app = FastAPI(title="xmlops", version="0.1.0",
                  description="Explainable MLOps platform API",
                  lifespan=lifespan)
    app.state.platform = platform
    # the review dashboard is served from its own origin
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])

    @app.exception_handler(XmlopsError)
    async def on_error(request: Request, exc: XmlopsError):
        if isinstance(exc, UnknownEntityError):
            status = 404
        elif isinstance(exc, ImmutabilityError):
            status = 409
        elif isinstance(exc, (ValidationError, DeploymentStateError,
                              TriggerConsumedError)):
            status = 400
        else:
            status = 500
        return JSONResponse(status_code=status,
                            content={"error": type(exc).__name__,
                                     "detail": str(exc)})

    # -- health and schema -------------------------------------------------

    @app.get("/healthz")
    def healthz():
        return platform.healthz()

    @app.get("/schema")
    def schema():
        return schema_document()

    # -- data --------------------------------------------------------------

    @app.post("/samples", status_code=201)
    def ingest(body: IngestBody):
        record = platform.admin.ingest_sample(body.payload, body.provenance,
                                              body.format_tag)
        if body.label is not None:
            platform.admin.attach_annotation(record.sample_id, body.label,
                                             author="api", origin="human")
        return record.to_doc()

    @app.get("/samples/{sample_id}")
    def get_sample(sample_id: str):
        return platform.admin.get_sample(sample_id).to_doc()

    @app.get("/samples/{sample_id}/similar")
    def similar(sample_id: str, k: int = Query(5, ge=1)):
        return [{"sample_id": sid, "distance": dist}
                for sid, dist in platform.admin.find_similar(sample_id, k)]

    @app.post("/samples/{sample_id}/mark-bad")
    def mark_bad(sample_id: str, body: MarkBadBody):
        return platform.admin.mark_bad(sample_id, body.reason, body.author).to_doc()

    @app.post("/datasets", status_code=201)
    def define_dataset(body: DatasetBody):
        return platform.admin.define_dataset(body.sample_ids, body.recipe).to_doc()

    @app.get("/datasets/{dataset_id}")
    def get_dataset(dataset_id: str):
        return platform.admin.get_dataset(dataset_id).to_doc()

    @app.post("/datasets/{dataset_id}/seal")
    def seal_dataset(dataset_id: str):
        return platform.admin.seal_dataset(dataset_id).to_doc()

    @app.post("/datasets/{dataset_id}/apply-recipe")
    def apply_recipe(dataset_id: str, body: RecipeBody):
        recipe = platform.admin.create_recipe(body.steps)
        return platform.admin.apply_recipe(dataset_id, recipe.recipe_id).to_doc()

    @app.post("/recipes", status_code=201)
    def create_recipe(body: RecipeBody):
        return platform.admin.create_recipe(body.steps).to_doc()

    @app.post("/annotations", status_code=201)
    def annotate(body: AnnotationBody):
        return platform.admin.attach_annotation(body.sample_id, body.label,
                                                body.author, body.origin).to_doc()

    # -- training ------------------------------------------------------------

    @app.post("/runs", status_code=201)
    def start_run(body: RunBody):
        run, model = platform.trainer.train(
            body.architecture, body.dataset, SplitSpec.from_doc(body.split),
            body.hyperparams, body.seed)
        return {"run": run.to_doc(), "model": model.to_doc()}

    @app.get("/runs/{run_id}")
    def get_run(run_id: str):
        return platform.trainer.get_run(run_id).to_doc()

    @app.get("/runs")
    def list_runs():
        return [platform.trainer.get_run(run_id).to_doc()
                for run_id in platform.store.list_meta("run")]

    @app.get("/runs-compare")
    def compare_runs(run_ids: str, metric: str, split: str = "val"):
        return platform.trainer.compare_runs(run_ids.split(","), metric, split)

    # -- registry ------------------------------------------------------------

    @app.post("/models/{model_id}/register")
    def register_model(model_id: str):
        return platform.registry.register_model(model_id).to_doc()

    @app.get("/models")
    def list_models():
        return [m.to_doc() for m in platform.registry.list_models()]

    @app.get("/models/{model_id}")
    def get_model(model_id: str):
        return platform.registry.get_model(model_id).to_doc()

    @app.post("/explainers", status_code=201)
    def register_explainer(body: ExplainerBody):
        return platform.registry.register_explainer(
            body.method, body.kind, body.config, body.compatible_models).to_doc()

    @app.get("/explainers")
    def list_explainers():
        return [e.to_doc() for e in platform.registry.list_explainers()]

    # -- serving ------------------------------------------------------------

    @app.post("/deployments", status_code=201)
    def create_deployment(body: DeployBody):
        return platform.serving.create_deployment(
            body.scheme, body.primary_model, body.secondary_model,
            body.traffic_fraction, body.explainer, body.endpoint,
            body.defer_explanations).to_doc()

    @app.get("/deployments")
    def list_deployments(active_only: bool = False):
        return [d.to_doc() for d in platform.serving.list_deployments(active_only)]

    @app.get("/deployments/{deployment_id}")
    def get_deployment(deployment_id: str):
        return platform.serving.get_deployment(deployment_id).to_doc()

    @app.post("/deployments/{deployment_id}/infer")
    def infer(deployment_id: str, body: InferBody):
        return platform.serving.infer(deployment_id, body.payload, body.request_key)

    @app.post("/deployments/{deployment_id}/promote")
    def promote(deployment_id: str):
        return platform.serving.promote(deployment_id).to_doc()

    @app.get("/deployments/{deployment_id}/drift")
    def drift(deployment_id: str):
        platform.serving.get_deployment(deployment_id)  # 404 on unknown
        report = platform.drift.latest_report(deployment_id)
        if report is None:
            fresh = platform.check_drift(deployment_id, force=True)
            return fresh or {"deployment_id": deployment_id, "verdict": "no_data"}
        return report.to_doc()

    @app.get("/deployments/{deployment_id}/performance")
    def performance(deployment_id: str):
        return platform.observer.performance_window(deployment_id)

    # -- explanations ------------------------------------------------------------

    @app.post("/explain", status_code=201)
    def explain(body: ExplainBody):
        return platform.explain.explain(
            body.model_id, body.explainer_id, payload=body.payload,
            sample_id=body.sample_id,
            domain_knowledge=body.domain_knowledge).to_doc()

    @app.get("/explanations")
    def list_explanations(model: str | None = None, dataset: str | None = None,
                          explainer: str | None = None,
                          deployment: str | None = None):
        return [e.to_doc() for e in platform.explain.list_explanations(
            model_id=model, dataset_id=dataset, explainer_id=explainer,
            deployment_id=deployment)]

    @app.get("/explanations/{explanation_id}")
    def get_explanation(explanation_id: str):
        return platform.explain.get_explanation(explanation_id).to_doc()

    # -- monitoring ------------------------------------------------------------

    @app.get("/alerts")
    def alerts(deployment: str | None = None, source: str | None = None):
        return [a.to_doc() for a in platform.alerts.list_alerts(deployment, source)]

    @app.get("/metrics/system")
    def system_metrics():
        return platform.observer.system_metrics()

    @app.post("/monitor/run")
    def run_monitor(force_drift: bool = False):
        return platform.run_monitor_cycle(force_drift=force_drift)

    @app.get("/triggers")
    def triggers(deployment: str | None = None):
        return [t.to_doc() for t in platform.observer.list_triggers(deployment)]

    @app.post("/triggers/{trigger_id}/retrain")
    def retrain(trigger_id: str):
        return platform.observer.retrain(trigger_id)

    # -- feedback ------------------------------------------------------------

    @app.post("/feedback", status_code=201)
    def feedback(body: FeedbackBody):
        return platform.feedback.submit_feedback(
            body.kind, body.target_id, body.verdict, body.corrected_label,
            body.comment, body.author).to_doc()

    @app.get("/review-queue")
    def review_queue(deployment: str, limit: int = Query(20, ge=1)):
        return platform.feedback.review_queue(deployment, limit)

    @app.post("/compare")
    def compare(body: CompareBody):
        return platform.feedback.compare_view(body.payloads, body.entries)

    # -- lineage ------------------------------------------------------------

    @app.get("/lineage/{entity_id}")
    def lineage(entity_id: str, format: str = "json"):
        resolved = platform.resolve_lineage(entity_id)
        if format == "dot":
            return JSONResponse(content={"dot": to_dot(resolved)})
        return resolved

    return app


def serve(config: Config) -> None:
    """Run the HTTP service until interrupted."""
    import uvicorn

    platform = Platform(config)
    app = create_app(platform)
    uvicorn.run(app, host=config.http_host, port=config.http_port,
                log_level="warning")
