from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import ingest_samples, linear_fixture, logistic_fixture, sealed_dataset
from oracles import oracle_linear_least_squares, oracle_log_loss
from xmlops.errors import SingularMatrixError, ValidationError
from xmlops.predictors import (
    KnnModel,
    LinearRegressionModel,
    LogisticRegressionModel,
    log_loss,
    log_loss_gradient,
)
from xmlops.training import SplitSpec, allocate_split_sizes


class TestSplitSizes:
    def test_ten_samples_80_10_10(self):
        assert allocate_split_sizes(10, (0.8, 0.1, 0.1)) == (8, 1, 1)

    def test_three_samples_34_33_33(self):
        # floors (1,0,0); two leftover seats go to the largest remainders
        assert allocate_split_sizes(3, (0.34, 0.33, 0.33)) == (1, 1, 1)

    def test_tie_priority_train_then_val(self):
        assert allocate_split_sizes(5, (1 / 3, 1 / 3, 1 / 3)) == (2, 2, 1)

    @settings(max_examples=100, deadline=None)
    @given(st.integers(3, 500), st.floats(0.05, 0.9), st.floats(0.05, 0.9))
    def test_sizes_always_partition(self, n, a, b):
        rest = 1.0 - a - b
        if rest <= 0.0 or rest >= 1.0:
            return
        sizes = allocate_split_sizes(n, (a, b, rest))
        assert sum(sizes) == n
        assert all(s >= 0 for s in sizes)


class TestSplitDataset:
    def test_deterministic_and_partition(self, platform):
        dataset = sealed_dataset(platform, [[float(i)] for i in range(10)],
                                 labels=[float(i) for i in range(10)])
        spec = SplitSpec(0.8, 0.1, 0.1, seed=7)
        first = platform.trainer.split_dataset(dataset.dataset_id, spec)
        second = platform.trainer.split_dataset(dataset.dataset_id, spec)
        assert (first.train, first.val, first.test) == (second.train, second.val, second.test)
        assert (len(first.train), len(first.val), len(first.test)) == (8, 1, 1)
        combined = first.train + first.val + first.test
        assert sorted(combined) == sorted(dataset.members)
        assert len(set(combined)) == len(combined)

    def test_unlabeled_member_listed_in_error(self, platform):
        ids = ingest_samples(platform, [[1.0], [2.0], [3.0]], labels=None)
        platform.admin.attach_annotation(ids[0], 1.0, author="a")
        platform.admin.attach_annotation(ids[1], 2.0, author="a")
        dataset = platform.admin.define_dataset(ids)
        platform.admin.seal_dataset(dataset.dataset_id)
        with pytest.raises(ValidationError, match=ids[2][:16]):
            platform.trainer.split_dataset(dataset.dataset_id,
                                           SplitSpec(0.5, 0.25, 0.25, seed=1))

    def test_invalid_fractions(self, platform):
        dataset = sealed_dataset(platform, [[1.0], [2.0]], labels=[1.0, 2.0])
        with pytest.raises(ValidationError):
            platform.trainer.split_dataset(dataset.dataset_id,
                                           SplitSpec(0.5, 0.5, 0.5, seed=1))
        with pytest.raises(ValidationError):
            platform.trainer.split_dataset(dataset.dataset_id,
                                           SplitSpec(1.0, 0.0, 0.0, seed=1))

    def test_later_annotation_wins_in_materialization(self, platform):
        payloads = [[float(i)] for i in range(12)]
        ids = ingest_samples(platform, payloads, labels=[0.0] * 12)
        platform.admin.attach_annotation(ids[0], 9.0, author="late",
                                         created_at="2030-01-01T00:00:00+00:00")
        dataset = platform.admin.define_dataset(ids)
        platform.admin.seal_dataset(dataset.dataset_id)
        run, model = platform.trainer.train(
            "knn", dataset.dataset_id, SplitSpec(0.8, 0.1, 0.1, seed=3),
            {"k": 1, "task": "regression"}, seed=0)
        predictor = platform.trainer.load_predictor(model.model_id)
        assert predictor.predict(np.asarray(payloads[0], dtype=float)) == 9.0


class TestLinearRegression:
    def test_noiseless_exact_recovery(self, platform):
        _, run, model = linear_fixture(platform, noise=0.0, slope=2.0, bias=1.0)
        predictor = platform.trainer.load_predictor(model.model_id)
        assert predictor.weights[0] == pytest.approx(2.0, abs=1e-8)
        assert predictor.intercept == pytest.approx(1.0, abs=1e-8)
        assert run.metrics["test"]["values"]["mse"] < 1e-12

    def test_matches_normal_equation_oracle(self):
        rng = np.random.default_rng(17)
        X = rng.normal(0, 2, size=(30, 3))
        y = X @ [1.5, -2.0, 0.5] + 3.0 + rng.normal(0, 0.1, 30)
        fitted = LinearRegressionModel.fit(X, y, {"ridge_lambda": 0.0})
        weights, intercept = oracle_linear_least_squares(X.tolist(), y.tolist())
        assert fitted.weights == pytest.approx(weights, rel=1e-8)
        assert fitted.intercept == pytest.approx(intercept, rel=1e-8)

    def test_singular_matrix_advises_ridge(self):
        X = np.array([[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]])  # collinear
        with pytest.raises(SingularMatrixError, match="ridge_lambda > 0"):
            LinearRegressionModel.fit(X, np.array([1.0, 2.0, 3.0]),
                                      {"ridge_lambda": 0.0})
        fitted = LinearRegressionModel.fit(X, np.array([1.0, 2.0, 3.0]),
                                           {"ridge_lambda": 1e-6})
        assert np.all(np.isfinite(fitted.weights))

    def test_least_squares_optimality_spot_check(self):
        rng = np.random.default_rng(5)
        X = rng.normal(0, 1, size=(50, 2))
        y = X @ [2.0, -1.0] + 0.5 + rng.normal(0, 0.3, 50)
        fitted = LinearRegressionModel.fit(X, y, {"ridge_lambda": 0.0})
        best_sse = float(np.sum((y - fitted.predict_batch(X)) ** 2))
        for _ in range(100):
            w = rng.normal(0, 2, 2)
            b = rng.normal(0, 2)
            sse = float(np.sum((y - (X @ w + b)) ** 2))
            assert best_sse <= sse + 1e-9


class TestLogisticRegression:
    def test_separable_clusters_reach_perfect_train_accuracy(self, platform):
        dataset, run, model = logistic_fixture(platform)
        assert run.metrics["train"]["values"]["accuracy"] == 1.0

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(33)
        for _ in range(5):
            n, d = 12, 3
            X = rng.normal(0, 1, size=(n, d))
            y = rng.integers(0, 2, n).astype(float)
            w = rng.normal(0, 0.5, d)
            b = float(rng.normal())
            grad_w, grad_b = log_loss_gradient(w, b, X, y)
            eps = 1e-6
            for j in range(d):
                shift = np.zeros(d)
                shift[j] = eps
                numeric = (log_loss(w + shift, b, X, y)
                           - log_loss(w - shift, b, X, y)) / (2 * eps)
                assert grad_w[j] == pytest.approx(numeric, rel=1e-5, abs=1e-8)
            numeric_b = (log_loss(w, b + eps, X, y)
                         - log_loss(w, b - eps, X, y)) / (2 * eps)
            assert grad_b == pytest.approx(numeric_b, rel=1e-5, abs=1e-8)

    def test_loss_matches_oracle(self):
        rng = np.random.default_rng(8)
        X = rng.normal(0, 1, size=(20, 2))
        y = rng.integers(0, 2, 20).astype(float)
        w = rng.normal(0, 1, 2)
        assert log_loss(w, 0.3, X, y) == pytest.approx(
            oracle_log_loss(w.tolist(), 0.3, X.tolist(), y.tolist()), rel=1e-9)

    def test_divergence_raises(self):
        # same-sign inputs with opposite labels: one point is misclassified
        # whatever the init sign, so the first gradient step overflows
        X = np.array([[1e150], [2e150]])
        y = np.array([1.0, 0.0])
        from xmlops.errors import DivergenceError

        with pytest.raises(DivergenceError):
            LogisticRegressionModel.fit(X, y, {"learning_rate": 1e200, "epochs": 5})


class TestKnn:
    def test_k1_train_predictions_equal_labels(self, platform):
        dataset = sealed_dataset(platform, [[float(i)] for i in range(10)],
                                 labels=[float(i % 3) for i in range(10)])
        run, model = platform.trainer.train(
            "knn", dataset.dataset_id, SplitSpec(0.8, 0.1, 0.1, seed=2),
            {"k": 1, "task": "regression"}, seed=0)
        assert run.metrics["train"]["values"]["mse"] == 0.0

    def test_classification_proba(self):
        model = KnnModel([[0.0], [0.1], [10.0]], [1.0, 1.0, 0.0], k=2,
                         task="binary_classification")
        assert model.predict_proba(np.array([0.05])) == 1.0
        assert model.predict(np.array([0.05])) == 1.0

    def test_k_validation(self):
        with pytest.raises(ValidationError):
            KnnModel.fit([[1.0]], [1.0], {"k": 0})
        with pytest.raises(ValidationError):
            KnnModel.fit([[1.0]], [1.0], {"k": 5})


class TestReproducibility:
    def test_identical_inputs_identical_weights_and_metrics(self, platform):
        dataset = sealed_dataset(
            platform, [[float(i), float(i * i % 7)] for i in range(20)],
            labels=[float(2 * i + 1) for i in range(20)])
        spec = SplitSpec(0.7, 0.15, 0.15, seed=13)
        run1, model1 = platform.trainer.train(
            "linear_regression", dataset.dataset_id, spec, {"ridge_lambda": 0.1}, seed=5)
        run2, model2 = platform.trainer.train(
            "linear_regression", dataset.dataset_id, spec, {"ridge_lambda": 0.1}, seed=5)
        assert model1.model_id == model2.model_id
        assert (platform.store.get_blob(model1.weights_ref)
                == platform.store.get_blob(model2.weights_ref))
        assert run1.metrics == run2.metrics
        assert run1.run_id != run2.run_id  # distinct tracked executions


class TestRunTracking:
    def test_run_records_everything(self, platform):
        dataset, run, model = linear_fixture(platform)
        assert run.dataset == dataset.dataset_id
        assert run.produced_model == model.model_id
        assert model.training_run == run.run_id
        assert set(run.split_materialization) == {"train", "val", "test"}
        assert "python" in model.software_manifest
        assert "numpy" in model.software_manifest
        assert model.metrics  # test-split reference metrics
        resolved = platform.resolve_lineage(model.model_id)
        assert dataset.dataset_id in resolved["ancestors"]
        assert set(dataset.members) <= set(resolved["ancestors"])

    def test_compare_runs_ranking_and_ties(self, platform):
        dataset = sealed_dataset(platform, [[float(i)] for i in range(20)],
                                 labels=[float(3 * i) for i in range(20)])
        spec = SplitSpec(0.6, 0.2, 0.2, seed=9)
        runs = []
        for lam in (10.0, 0.0, 100.0):
            run, _ = platform.trainer.train("linear_regression", dataset.dataset_id,
                                            spec, {"ridge_lambda": lam}, seed=1)
            runs.append(run)
        result = platform.trainer.compare_runs([r.run_id for r in runs],
                                               metric="mse", split="val")
        assert result["best"] == runs[1].run_id  # lambda=0 fits y=3x exactly
        # tie case: identical configs -> identical metrics; earlier run wins
        rerun, _ = platform.trainer.train("linear_regression", dataset.dataset_id,
                                          spec, {"ridge_lambda": 0.0}, seed=1)
        tied = platform.trainer.compare_runs([rerun.run_id, runs[1].run_id],
                                             metric="mse", split="val")
        assert tied["best"] == runs[1].run_id

    def test_missing_metric_names_run(self, platform):
        _, run, _ = linear_fixture(platform)
        with pytest.raises(ValidationError, match=run.run_id[:16]):
            platform.trainer.compare_runs([run.run_id], metric="f1", split="val")
