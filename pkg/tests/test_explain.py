from __future__ import annotations

import math

import numpy as np
import pytest

from conftest import linear_fixture, logistic_fixture
from xmlops.errors import ArchitectureError, ValidationError
from xmlops.explain import (
    counterfactual,
    linear_exact,
    local_surrogate,
    permutation_importance,
    quality_scores,
)
from xmlops.predictors import KnnModel, LinearRegressionModel, LogisticRegressionModel


class TestLinearExact:
    def test_hand_example(self):
        model = LinearRegressionModel([2.0, -1.0], 3.0)
        attr = linear_exact(model, [1.0, 1.0], [0.0, 0.0])
        assert attr == [2.0, -1.0]
        assert sum(attr) == model.predict(np.array([1.0, 1.0])) - model.predict(
            np.array([0.0, 0.0]))

    def test_x_equals_baseline_all_zero(self):
        model = LinearRegressionModel([2.0, -1.0], 3.0)
        assert linear_exact(model, [0.5, 0.5], [0.5, 0.5]) == [0.0, 0.0]

    def test_knn_rejected(self):
        model = KnnModel([[0.0]], [1.0], k=1, task="regression")
        with pytest.raises(ArchitectureError):
            linear_exact(model, [1.0], [0.0])

    def test_logistic_attribution_on_logit(self):
        model = LogisticRegressionModel([1.0, 2.0], -0.5)
        attr = linear_exact(model, [1.0, 1.0], [0.0, 0.0])
        assert sum(attr) == pytest.approx(
            model.decision_value(np.array([1.0, 1.0]))
            - model.decision_value(np.array([0.0, 0.0])))


class TestPermutationImportance:
    def fixture(self):
        rng = np.random.default_rng(12)
        X = rng.uniform(-2, 2, size=(60, 2))
        y = 5.0 * X[:, 0]  # feature 1 is ignored
        model = LinearRegressionModel([5.0, 0.0], 0.0)
        return model, X, y

    def test_informative_vs_ignored_feature(self):
        model, X, y = self.fixture()
        imp = permutation_importance(model, X, y, metric="mse", seed=3)
        assert imp[0] > 1.0
        assert abs(imp[1]) < 1e-6

    def test_same_seed_identical(self):
        model, X, y = self.fixture()
        a = permutation_importance(model, X, y, metric="mse", seed=3, repeats=5)
        b = permutation_importance(model, X, y, metric="mse", seed=3, repeats=5)
        assert a == b

    def test_constant_feature_exact_zero(self):
        X = np.array([[1.0, 7.0], [2.0, 7.0], [3.0, 7.0], [4.0, 7.0]])
        y = 2.0 * X[:, 0] + X[:, 1]
        model = LinearRegressionModel([2.0, 1.0], 0.0)
        imp = permutation_importance(model, X, y, metric="mse", seed=0)
        assert imp[1] == 0.0

    def test_higher_better_metric_sign_normalized(self):
        rng = np.random.default_rng(4)
        X = rng.normal(0, 1, size=(80, 2))
        y = (X[:, 0] > 0).astype(float)
        model = LogisticRegressionModel([6.0, 0.0], 0.0)
        imp = permutation_importance(model, X, y, metric="f1", seed=1)
        assert imp[0] > 0.1  # shuffling the real feature hurts f1
        assert abs(imp[1]) < 0.05

    def test_metric_task_mismatch(self):
        model, X, y = self.fixture()
        with pytest.raises(ValidationError, match="unavailable"):
            permutation_importance(model, X, y, metric="f1", seed=0)


class TestLocalSurrogate:
    def test_linear_black_box_recovered(self):
        model = LinearRegressionModel([3.0, -2.0, 0.5], 1.0)
        result = local_surrogate(model, [1.0, 2.0, 3.0], {"seed": 5})
        assert result.weights == pytest.approx([3.0, -2.0, 0.5], abs=1e-3)
        assert result.fidelity_r2 > 0.999

    def test_constant_black_box_null_fidelity(self):
        model = KnnModel([[0.0], [1.0]], [4.0, 4.0], k=2, task="regression")
        result = local_surrogate(model, [0.5], {"seed": 1})
        assert result.weights == [0.0]
        assert result.fidelity_r2 is None
        assert result.reason == "constant_model_output"

    def test_same_seed_identical(self):
        model = LinearRegressionModel([1.0, 1.0], 0.0)
        a = local_surrogate(model, [0.0, 0.0], {"seed": 9})
        b = local_surrogate(model, [0.0, 0.0], {"seed": 9})
        assert a.weights == b.weights
        assert a.fidelity_r2 == b.fidelity_r2

    def test_linear_black_box_fidelity_monotone_in_perturbations(self):
        model = LinearRegressionModel([2.0, -1.0], 0.5)
        fidelities = [local_surrogate(model, [1.0, -0.5],
                                      {"seed": 4, "n_perturbations": n}).fidelity_r2
                      for n in (50, 200, 500)]
        assert all(f > 0.999 for f in fidelities)
        assert fidelities[0] <= fidelities[1] + 1e-9 <= fidelities[2] + 2e-9

    def test_fidelity_improves_with_perturbations_on_nonlinear_model(self):
        # knn regressor is piecewise constant, so the linear surrogate is
        # imperfect and more perturbations must not make fidelity worse
        rng = np.random.default_rng(7)
        X = rng.uniform(-2, 2, size=(40, 2))
        y = X[:, 0] ** 2 + X[:, 1]
        model = KnnModel(X, y, k=3, task="regression")
        fidelities = [local_surrogate(model, [0.5, 0.5],
                                      {"seed": 2, "n_perturbations": n}).fidelity_r2
                      for n in (50, 200, 500)]
        assert all(f is not None for f in fidelities)
        assert fidelities[-1] > 0.5
        assert fidelities[0] <= fidelities[-1] + 0.1  # monotone trend, small slack


class TestCounterfactual:
    def test_analytic_boundary(self):
        # decision boundary x0 = 0; from (-1, 0) the minimal L1 move is 1.0
        model = LogisticRegressionModel([4.0, 0.0], 0.0)
        result = counterfactual(model, [-1.0, 0.0], target_class=1,
                                config={"step": 0.05})
        assert result.found
        assert model.predict(np.asarray(result.payload)) == 1.0
        assert 0.0 < result.payload[0] <= 0.05
        assert result.payload[1] == 0.0
        assert result.distance_l1 == pytest.approx(1.0, abs=0.05)

    def test_already_target_class_is_precondition_error(self):
        model = LogisticRegressionModel([4.0, 0.0], 0.0)
        with pytest.raises(ValidationError, match="already"):
            counterfactual(model, [1.0, 0.0], target_class=1)

    def test_constant_classifier_not_found(self):
        model = KnnModel([[0.0], [1.0]], [0.0, 0.0], k=2,
                         task="binary_classification")
        result = counterfactual(model, [0.5], target_class=1,
                                config={"max_iters": 50})
        assert not result.found
        assert result.payload is None

    def test_regressor_rejected(self):
        model = LinearRegressionModel([1.0], 0.0)
        with pytest.raises(ArchitectureError):
            counterfactual(model, [0.0], target_class=1)

    def test_local_l1_minimality(self):
        rng = np.random.default_rng(31)
        model = LogisticRegressionModel(rng.normal(0, 2, 3), 0.4)
        x = rng.normal(0, 1, 3)
        if model.predict(x) == 1.0:
            target = 0.0
        else:
            target = 1.0
        step = 0.05
        result = counterfactual(model, x, target, config={"step": step})
        assert result.found
        cf = np.asarray(result.payload)
        # moving any coordinate >= step closer to x must unflip
        for j in range(3):
            delta = cf[j] - x[j]
            if abs(delta) < step:
                continue
            probe = cf.copy()
            probe[j] -= math.copysign(step, delta)
            assert model.predict(probe) != target


class TestQuality:
    def linear_explanation(self):
        model = LinearRegressionModel([2.0, -1.0, 0.5, 3.0], 1.0)
        x = np.array([1.0, 2.0, -1.0, 0.5])
        baseline = np.zeros(4)
        attr = linear_exact(model, x, baseline)
        return model, x, baseline, attr

    def test_linear_exact_completeness_is_one(self):
        model, x, baseline, attr = self.linear_explanation()
        scores = quality_scores(attr, model, x, baseline,
                                recompute=lambda xp: linear_exact(model, xp, baseline),
                                fidelity=1.0)
        assert scores["completeness"] == pytest.approx(1.0, abs=1e-9)

    def test_uniform_attributions_relevance_quarter(self):
        model, x, baseline, _ = self.linear_explanation()
        scores = quality_scores([1.0, 1.0, 1.0, 1.0], model, x, baseline,
                                recompute=lambda xp: [1.0, 1.0, 1.0, 1.0],
                                fidelity=1.0)
        assert scores["relevance"] == pytest.approx(0.25)

    def test_scaling_leaves_relevance_and_rank_unchanged(self):
        model, x, baseline, attr = self.linear_explanation()

        def score(vector):
            return quality_scores(vector, model, x, baseline,
                                  recompute=lambda xp: vector, fidelity=1.0)

        base = score(attr)
        scaled = score([7.5 * a for a in attr])
        assert scaled["relevance"] == pytest.approx(base["relevance"], abs=1e-12)
        assert (np.argsort(np.abs(attr)).tolist()
                == np.argsort(np.abs([7.5 * a for a in attr])).tolist())

    def test_scores_in_unit_interval_fuzzed(self):
        rng = np.random.default_rng(77)
        for _ in range(25):
            d = int(rng.integers(1, 6))
            model = LinearRegressionModel(rng.normal(0, 3, d), float(rng.normal()))
            x = rng.normal(0, 2, d)
            baseline = rng.normal(0, 2, d)
            attr = rng.normal(0, 5, d).tolist()  # deliberately wrong attributions
            scores = quality_scores(attr, model, x, baseline,
                                    recompute=lambda xp: attr, fidelity=None,
                                    n_perturbations=5)
            for name, value in scores.items():
                assert 0.0 <= value <= 1.0, (name, value)

    def test_zero_distance_perturbations_excluded(self):
        model = LinearRegressionModel([1.0], 0.0)
        scores = quality_scores([1.0], model, np.array([0.0]), np.array([1.0]),
                                recompute=lambda xp: [1.0], fidelity=1.0,
                                sigma=0.0)  # every perturbation lands on x
        assert scores["stability"] == 1.0


class TestExplainService:
    def test_linear_exact_explanation_persisted_with_quality(self, platform):
        _, _, model = linear_fixture(platform)
        platform.registry.register_model(model.model_id)
        explainer = platform.registry.register_explainer(
            "linear_exact", "interpretable", {}, [model.model_id])
        explanation = platform.explain.explain(model.model_id,
                                               explainer.explainer_id, [1.5])
        assert explanation.quality["completeness"] == pytest.approx(1.0, abs=1e-9)
        assert explanation.quality["fidelity"] == 1.0
        assert len(explanation.attributions) == 1
        resolved = platform.resolve_lineage(explanation.explanation_id)
        assert model.model_id in resolved["ancestors"]

    def test_explain_idempotent(self, platform):
        _, _, model = linear_fixture(platform)
        platform.registry.register_model(model.model_id)
        explainer = platform.registry.register_explainer(
            "linear_exact", "interpretable", {}, [model.model_id])
        first = platform.explain.explain(model.model_id, explainer.explainer_id, [1.5])
        second = platform.explain.explain(model.model_id, explainer.explainer_id, [1.5])
        assert first.explanation_id == second.explanation_id
        assert len(platform.store.list_meta("explanation")) == 1

    def test_incompatible_model_rejected(self, platform):
        _, _, model_a = linear_fixture(platform)
        dataset, _, model_b = logistic_fixture(platform)
        platform.registry.register_model(model_a.model_id)
        platform.registry.register_model(model_b.model_id)
        explainer = platform.registry.register_explainer(
            "linear_exact", "interpretable", {}, [model_a.model_id])
        with pytest.raises(ValidationError, match="not registered for model"):
            platform.explain.explain(model_b.model_id, explainer.explainer_id,
                                     [1.0, 1.0])

    def test_counterfactual_explanation_through_service(self, platform):
        _, _, model = logistic_fixture(platform)
        platform.registry.register_model(model.model_id)
        explainer = platform.registry.register_explainer(
            "counterfactual", "post_hoc", {"step": 0.1, "stability_perturbations": 3},
            [model.model_id])
        explanation = platform.explain.explain(model.model_id,
                                               explainer.explainer_id, [-2.0, -2.0])
        assert explanation.counterfactual["found"]
        predictor = platform.trainer.load_predictor(model.model_id)
        assert predictor.predict(np.asarray(
            explanation.counterfactual["payload"])) == 1.0

    def test_list_explanations_filters(self, platform):
        dataset, _, model = linear_fixture(platform)
        platform.registry.register_model(model.model_id)
        explainer = platform.registry.register_explainer(
            "linear_exact", "interpretable", {}, [model.model_id])
        platform.explain.explain(model.model_id, explainer.explainer_id,
                                 sample_id=dataset.members[0])
        by_model = platform.explain.list_explanations(model_id=model.model_id)
        by_dataset = platform.explain.list_explanations(dataset_id=dataset.dataset_id)
        assert len(by_model) == 1
        assert len(by_dataset) == 1
        assert by_dataset[0].sample_id == dataset.members[0]
