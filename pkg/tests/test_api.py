from __future__ import annotations

import pytest
from fastapi.testclient import TestClient

from conftest import linear_fixture, sealed_dataset
from xmlops.api import create_app
from xmlops.schemas import SCHEMA_VERSION


@pytest.fixture
def client(platform):
    app = create_app(platform)
    with TestClient(app) as client:
        client.platform = platform
        yield client


def test_healthz_on_empty_store(client):
    body = client.get("/healthz").json()
    assert body["status"] == "ok"
    assert body["components"]["models"] == 0
    assert body["store"]["manifest"]["hash_algorithm"] == "sha256"


def test_openapi_served(client):
    spec = client.get("/openapi.json").json()
    assert "/deployments/{deployment_id}/infer" in spec["paths"]
    assert "/feedback" in spec["paths"]


def test_schema_versioned(client):
    body = client.get("/schema").json()
    assert body["schema_version"] == SCHEMA_VERSION
    assert "review_item" in body["schemas"]


def test_ingest_and_fetch_sample(client):
    response = client.post("/samples", json={
        "payload": [1.0, 2.0],
        "provenance": {"equipment_id": "pump-7",
                       "captured_at": "2024-01-01T00:00:00+00:00"},
    })
    assert response.status_code == 201
    sample_id = response.json()["sample_id"]
    assert client.get(f"/samples/{sample_id}").json()["payload"] == [1.0, 2.0]


def test_validation_maps_to_400_and_unknown_to_404(client):
    bad = client.post("/samples", json={
        "payload": [1.0],
        "provenance": {"equipment_id": "p", "captured_at": "2024-01-01T00:00:00"},
    })
    assert bad.status_code == 400
    assert "offset" in bad.json()["detail"]
    assert client.get("/samples/" + "0" * 64).status_code == 404


def test_full_http_lifecycle(client):
    platform = client.platform
    # data via fixture (faster), then the serving loop over HTTP
    dataset, run, model = linear_fixture(platform)
    assert client.post(f"/models/{model.model_id}/register").status_code == 200

    deploy = client.post("/deployments", json={
        "scheme": "single", "primary_model": model.model_id})
    assert deploy.status_code == 201
    deployment_id = deploy.json()["deployment_id"]

    result = client.post(f"/deployments/{deployment_id}/infer", json={
        "payload": [1.0], "request_key": "r1"})
    assert result.status_code == 200
    request_id = result.json()["request_id"]

    fb = client.post("/feedback", json={
        "kind": "prediction", "target_id": request_id, "verdict": "reject",
        "corrected_label": 9.0, "author": "reviewer"})
    assert fb.status_code == 201

    perf = client.get(f"/deployments/{deployment_id}/performance").json()
    assert perf["resolved"] == 1

    queue = client.get("/review-queue", params={"deployment": deployment_id}).json()
    assert queue == []  # the only record is resolved

    lineage = client.get(f"/lineage/{model.model_id}").json()
    assert dataset.dataset_id in lineage["ancestors"]


def test_drift_endpoint_returns_latest_report(client):
    platform = client.platform
    import numpy as np

    rng = np.random.default_rng(3)
    dataset = sealed_dataset(platform,
                             [[float(v)] for v in rng.normal(0, 1, 60)],
                             [float(v) for v in rng.normal(0, 1, 60)])
    from xmlops.training import SplitSpec

    run, model = platform.trainer.train("linear_regression", dataset.dataset_id,
                                        SplitSpec(0.6, 0.2, 0.2, seed=1),
                                        {"ridge_lambda": 0.1}, seed=1)
    platform.registry.register_model(model.model_id)
    deployment = platform.serving.create_deployment("single", model.model_id)
    for i in range(10):
        platform.serving.infer(deployment.deployment_id, [float(rng.normal(5, 1))],
                               request_key=f"k{i}")
    body = client.get(f"/deployments/{deployment.deployment_id}/drift").json()
    assert body["verdict"] in ("stable", "drifting")
    assert client.get("/deployments/" + "0" * 64 + "/drift").status_code == 404


def test_compare_endpoint(client):
    platform = client.platform
    _, _, model = linear_fixture(platform)
    platform.registry.register_model(model.model_id)
    body = client.post("/compare", json={
        "payloads": [[1.0], [2.0]],
        "entries": [{"model_id": model.model_id}]}).json()
    assert len(body["entries"][0]["cells"]) == 2


def test_monitor_run_and_alerts(client):
    platform = client.platform
    _, _, model = linear_fixture(platform)
    platform.registry.register_model(model.model_id)
    platform.serving.create_deployment("single", model.model_id)
    cycle = client.post("/monitor/run").json()
    assert len(cycle) == 1
    assert client.get("/alerts").json() == []
    assert client.get("/metrics/system").json()["overall"]["requests"] == 0
