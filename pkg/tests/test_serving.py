from __future__ import annotations

import pytest

from conftest import linear_fixture, logistic_fixture
from xmlops import Config, Platform
from xmlops.errors import DeploymentStateError, ValidationError
from xmlops.serving import route_unit


def registered_models(platform, count=2):
    """Two distinct registered linear models on one dataset."""
    dataset, run, model_a = linear_fixture(platform)
    platform.registry.register_model(model_a.model_id)
    models = [model_a]
    for lam in (0.5, 2.0, 5.0)[: count - 1]:
        from xmlops.training import SplitSpec

        _, model = platform.trainer.train(
            "linear_regression", dataset.dataset_id, SplitSpec(0.6, 0.2, 0.2, seed=11),
            {"ridge_lambda": lam}, seed=1)
        platform.registry.register_model(model.model_id)
        models.append(model)
    return models


class TestRegistry:
    def test_register_idempotent_same_sequence(self, platform):
        _, _, model = linear_fixture(platform)
        first = platform.registry.register_model(model.model_id)
        second = platform.registry.register_model(model.model_id)
        assert first.registry_seq == second.registry_seq
        assert first.stage == "registered"

    def test_register_without_metrics_errors(self, platform):
        _, _, model = linear_fixture(platform)
        doc = platform.store.get_meta("model", model.model_id)
        doc["model_id"] = "0" * 64
        doc["metrics"] = {}
        platform.store.put_meta("model", "0" * 64, doc)
        with pytest.raises(ValidationError, match="no metrics"):
            platform.registry.register_model("0" * 64)

    def test_distinct_models_get_consecutive_sequences(self, platform):
        models = registered_models(platform, count=3)
        seqs = [platform.registry.get_model(m.model_id).registry_seq for m in models]
        assert seqs == [1, 2, 3]

    def test_register_explainer_and_lineage(self, platform):
        _, _, model = linear_fixture(platform)
        platform.registry.register_model(model.model_id)
        explainer = platform.registry.register_explainer(
            "permutation_importance", "post_hoc", {"repeats": 3}, [model.model_id])
        resolved = platform.resolve_lineage(model.model_id)
        assert explainer.explainer_id in resolved["nodes"]
        again = platform.registry.register_explainer(
            "permutation_importance", "post_hoc", {"repeats": 3}, [model.model_id])
        assert again.explainer_id == explainer.explainer_id
        assert again.registry_seq == explainer.registry_seq

    def test_register_explainer_unknown_model(self, platform):
        from xmlops.errors import UnknownEntityError

        with pytest.raises(UnknownEntityError):
            platform.registry.register_explainer("linear_exact", "post_hoc", {},
                                                 ["f" * 64])


class TestDeploymentConstraints:
    def test_shadow_requires_secondary(self, platform):
        (model,) = registered_models(platform, count=1)
        with pytest.raises(ValidationError, match="secondary"):
            platform.serving.create_deployment("shadow", model.model_id)

    def test_single_forbids_secondary(self, platform):
        a, b = registered_models(platform)
        with pytest.raises(ValidationError, match="forbids"):
            platform.serving.create_deployment("single", a.model_id, b.model_id)

    def test_canary_requires_fraction(self, platform):
        a, b = registered_models(platform)
        with pytest.raises(ValidationError, match="traffic_fraction"):
            platform.serving.create_deployment("canary", a.model_id, b.model_id)
        deployment = platform.serving.create_deployment(
            "canary", a.model_id, b.model_id, traffic_fraction=0.1)
        assert deployment.scheme == "canary"

    def test_unregistered_model_rejected(self, platform):
        _, _, model = linear_fixture(platform)
        with pytest.raises(ValidationError, match="registered"):
            platform.serving.create_deployment("single", model.model_id)

    def test_second_deployment_retires_first(self, platform):
        a, b = registered_models(platform)
        first = platform.serving.create_deployment("single", a.model_id)
        second = platform.serving.create_deployment("single", b.model_id)
        assert platform.serving.get_deployment(first.deployment_id).status == "retired"
        assert platform.serving.get_deployment(second.deployment_id).status == "active"
        assert platform.registry.get_model(a.model_id).stage == "registered"
        assert platform.registry.get_model(b.model_id).stage == "deployed"


class TestInference:
    def test_shadow_serves_primary_and_logs_shadow_output(self, platform):
        a, b = registered_models(platform)
        deployment = platform.serving.create_deployment(
            "shadow", a.model_id, b.model_id)
        for i in range(100):
            result = platform.serving.infer(deployment.deployment_id, [float(i)],
                                            request_key=f"k{i}")
            assert result["served_by"] == a.model_id
        records = platform.serving.records_for(deployment.deployment_id)
        assert len(records) == 100
        assert all(r["shadow_output"] is not None for r in records)

    def test_retired_deployment_refuses(self, platform):
        a, b = registered_models(platform)
        first = platform.serving.create_deployment("single", a.model_id)
        platform.serving.create_deployment("single", b.model_id)
        with pytest.raises(DeploymentStateError):
            platform.serving.infer(first.deployment_id, [1.0], request_key="x")

    def test_dimension_mismatch(self, platform):
        (model,) = registered_models(platform, count=1)
        deployment = platform.serving.create_deployment("single", model.model_id)
        with pytest.raises(ValidationError, match="features"):
            platform.serving.infer(deployment.deployment_id, [1.0, 2.0],
                                   request_key="x")

    def test_zero_fraction_canary_never_serves_secondary(self, platform):
        a, b = registered_models(platform)
        deployment = platform.serving.create_deployment(
            "canary", a.model_id, b.model_id, traffic_fraction=0.0)
        served = {platform.serving.infer(deployment.deployment_id, [1.0],
                                         request_key=f"k{i}")["served_by"]
                  for i in range(200)}
        assert served == {a.model_id}

    def test_canary_explainer_must_cover_both_answering_models(self, platform):
        a, b = registered_models(platform)
        only_primary = platform.registry.register_explainer(
            "linear_exact", "interpretable", {}, [a.model_id])
        with pytest.raises(ValidationError, match="answering model"):
            platform.serving.create_deployment(
                "canary", a.model_id, b.model_id, traffic_fraction=0.5,
                explainer=only_primary.explainer_id)
        both = platform.registry.register_explainer(
            "linear_exact", "interpretable", {"stability_perturbations": 2},
            [a.model_id, b.model_id])
        deployment = platform.serving.create_deployment(
            "canary", a.model_id, b.model_id, traffic_fraction=0.5,
            explainer=both.explainer_id)
        served = {platform.serving.infer(deployment.deployment_id, [1.0],
                                         request_key=f"k{i}")["served_by"]
                  for i in range(30)}
        assert served == {a.model_id, b.model_id}  # both routes explain cleanly

    def test_shadow_explainer_checks_primary_only(self, platform):
        a, b = registered_models(platform)
        only_primary = platform.registry.register_explainer(
            "linear_exact", "interpretable", {"stability_perturbations": 2},
            [a.model_id])
        deployment = platform.serving.create_deployment(
            "shadow", a.model_id, b.model_id, explainer=only_primary.explainer_id)
        result = platform.serving.infer(deployment.deployment_id, [1.0],
                                        request_key="x")
        assert result["explanation"] is not None

    def test_classifier_output_carries_probability(self, platform):
        _, _, model = logistic_fixture(platform)
        platform.registry.register_model(model.model_id)
        deployment = platform.serving.create_deployment("single", model.model_id)
        result = platform.serving.infer(deployment.deployment_id, [2.0, 2.0],
                                        request_key="x")
        assert result["output"]["class"] == 1.0
        assert 0.5 < result["output"]["probability"] <= 1.0


class TestRouting:
    def test_ab_share_and_determinism(self, platform):
        a, b = registered_models(platform)
        deployment = platform.serving.create_deployment(
            "ab", a.model_id, b.model_id, traffic_fraction=0.5)
        served = {}
        for i in range(2000):
            key = f"user-{i}"
            served[key] = platform.serving.infer(
                deployment.deployment_id, [1.0], request_key=key)["served_by"]
        share = sum(1 for m in served.values() if m == b.model_id) / len(served)
        assert 0.45 < share < 0.55
        # same key, same bucket, always
        for key in list(served)[:50]:
            again = platform.serving.infer(deployment.deployment_id, [1.0],
                                           request_key=key)["served_by"]
            assert again == served[key]

    def test_routing_survives_restart(self, tmp_path):
        platform = Platform(Config(store_path=str(tmp_path / "store")))
        a, b = registered_models(platform)
        deployment = platform.serving.create_deployment(
            "ab", a.model_id, b.model_id, traffic_fraction=0.5)
        before = {f"k{i}": platform.serving.infer(deployment.deployment_id, [1.0],
                                                  request_key=f"k{i}")["served_by"]
                  for i in range(100)}
        reopened = Platform(Config(store_path=str(tmp_path / "store")))
        for key, expected in before.items():
            assert reopened.serving.infer(deployment.deployment_id, [1.0],
                                          request_key=key)["served_by"] == expected

    def test_route_unit_uniformity(self):
        for seed in (1, 99, 4242):
            hits = sum(1 for i in range(10_000)
                       if route_unit(f"key-{i}", seed) < 0.3)
            assert abs(hits / 10_000 - 0.3) < 0.02


class TestLog:
    def test_log_length_equals_accepted_requests(self, platform):
        (model,) = registered_models(platform, count=1)
        deployment = platform.serving.create_deployment("single", model.model_id)
        for i in range(25):
            platform.serving.infer(deployment.deployment_id, [float(i)],
                                   request_key=f"k{i}")
        with pytest.raises(ValidationError):
            platform.serving.infer(deployment.deployment_id, [1.0, 2.0],
                                   request_key="bad")
        audit = platform.store.audit_log("inferences")
        assert audit.records == 25
        assert audit.partial == 0

    def test_records_immutable_after_append(self, platform):
        (model,) = registered_models(platform, count=1)
        deployment = platform.serving.create_deployment("single", model.model_id)
        platform.serving.infer(deployment.deployment_id, [1.0], request_key="a")
        first = platform.serving.records_for(deployment.deployment_id)[0]
        platform.serving.infer(deployment.deployment_id, [2.0], request_key="b")
        again = platform.serving.records_for(deployment.deployment_id)[0]
        assert first == again


class TestDeferredExplanations:
    def test_deferred_pass_backfills_inference_records(self, platform):
        (model,) = registered_models(platform, count=1)
        explainer = platform.registry.register_explainer(
            "linear_exact", "interpretable", {"stability_perturbations": 2},
            [model.model_id])
        deployment = platform.serving.create_deployment(
            "single", model.model_id, explainer=explainer.explainer_id,
            defer_explanations=True)
        for i in range(5):
            result = platform.serving.infer(deployment.deployment_id, [float(i)],
                                            request_key=f"k{i}")
            assert result["explanation"] is None  # latency path skips sync work
        done = platform.serving.compute_deferred_explanations(
            deployment.deployment_id)
        assert done == 5
        assert len(platform.explain.list_explanations(
            deployment_id=deployment.deployment_id)) == 5


class TestPromotion:
    def test_promote_shadow_secondary_becomes_primary(self, platform):
        a, b = registered_models(platform)
        shadow = platform.serving.create_deployment("shadow", a.model_id, b.model_id)
        promoted = platform.serving.promote(shadow.deployment_id)
        assert promoted.scheme == "single"
        assert promoted.primary_model == b.model_id
        assert promoted.secondary_model is None
        assert platform.serving.get_deployment(shadow.deployment_id).status == "retired"
        active = platform.serving.active_deployment("default")
        assert active.deployment_id == promoted.deployment_id

    def test_promote_single_errors(self, platform):
        (model,) = registered_models(platform, count=1)
        deployment = platform.serving.create_deployment("single", model.model_id)
        with pytest.raises(DeploymentStateError, match="no secondary"):
            platform.serving.promote(deployment.deployment_id)

    def test_promoted_lineage_reaches_both_models(self, platform):
        a, b = registered_models(platform)
        shadow = platform.serving.create_deployment("shadow", a.model_id, b.model_id)
        promoted = platform.serving.promote(shadow.deployment_id)
        resolved = platform.resolve_lineage(promoted.deployment_id)
        assert a.model_id in resolved["nodes"]
        assert b.model_id in resolved["nodes"]
