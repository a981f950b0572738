"""Built-in reference predictors behind a pluggable interface.

A predictor needs only `predict(x) -> float` (and `predict_proba` for
classifiers); everything downstream (serving, explainers, monitoring) is
written against that surface, so swapping in an external framework later
means implementing two methods.

    linear_regression    closed form, normal equations with optional ridge
    logistic_regression  full-batch gradient descent on the log-loss
    knn                  lazy; stores the training set reference

Training is bit-reproducible: given identical data, hyperparameters, and
seed, fitted weights are identical.
"""

from __future__ import annotations

import numpy as np

from .errors import (
    ArchitectureError,
    DivergenceError,
    SingularMatrixError,
    ValidationError,
)

ARCHITECTURE_VERSIONS = {
    "linear_regression": "1.0.0",
    "logistic_regression": "1.0.0",
    "knn": "1.0.0",
}


def sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def log_loss(weights: np.ndarray, intercept: float, X: np.ndarray, y: np.ndarray) -> float:
    """Mean negative log-likelihood, numerically stable for large margins."""
    z = X @ weights + intercept
    return float(np.mean(y * np.logaddexp(0.0, -z) + (1.0 - y) * np.logaddexp(0.0, z)))


def log_loss_gradient(weights: np.ndarray, intercept: float, X: np.ndarray,
                      y: np.ndarray) -> tuple[np.ndarray, float]:
    residual = sigmoid(X @ weights + intercept) - y
    return X.T @ residual / len(y), float(np.mean(residual))


class Predictor:
    """Minimal model interface; see module docstring."""

    architecture: str
    task: str
    n_features: int

    def predict(self, x) -> float:
        raise NotImplementedError

    def predict_batch(self, X) -> np.ndarray:
        return np.asarray([self.predict(row) for row in np.asarray(X, dtype=float)])

    def predict_proba(self, x) -> float:
        raise ArchitectureError(f"{self.architecture} is not a classifier")

    def to_doc(self) -> dict:
        raise NotImplementedError

    def _check_dim(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n_features,):
            raise ValidationError(
                f"payload has {x.shape} features, model expects {self.n_features}")
        return x


class LinearRegressionModel(Predictor):
    architecture = "linear_regression"
    task = "regression"

    def __init__(self, weights, intercept: float):
        self.weights = np.asarray(weights, dtype=float)
        self.intercept = float(intercept)
        self.n_features = len(self.weights)

    @classmethod
    def fit(cls, X, y, hyperparams: dict, seed: int = 0) -> "LinearRegressionModel":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        lam = float(hyperparams.get("ridge_lambda", 0.0))
        if lam < 0:
            raise ValidationError(f"ridge_lambda must be >= 0, got {lam}")
        ones = np.ones((len(X), 1))
        design = np.hstack([X, ones])
        gram = design.T @ design
        penalty = np.eye(design.shape[1]) * lam
        penalty[-1, -1] = 0.0  # intercept is never penalized
        a = gram + penalty
        if lam == 0.0 and np.linalg.matrix_rank(a) < a.shape[0]:
            raise SingularMatrixError(
                "normal matrix is singular with ridge_lambda=0; "
                "set ridge_lambda > 0 to regularize")
        try:
            beta = np.linalg.solve(a, design.T @ y)
        except np.linalg.LinAlgError as exc:
            raise SingularMatrixError(
                f"normal equations unsolvable: {exc}; set ridge_lambda > 0") from exc
        return cls(beta[:-1], beta[-1])

    def predict(self, x) -> float:
        x = self._check_dim(x)
        return float(x @ self.weights + self.intercept)

    def predict_batch(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return X @ self.weights + self.intercept

    def to_doc(self) -> dict:
        return {"architecture": self.architecture,
                "weights": [float(w) for w in self.weights],
                "intercept": self.intercept}


class LogisticRegressionModel(Predictor):
    architecture = "logistic_regression"
    task = "binary_classification"

    def __init__(self, weights, intercept: float):
        self.weights = np.asarray(weights, dtype=float)
        self.intercept = float(intercept)
        self.n_features = len(self.weights)

    @classmethod
    def fit(cls, X, y, hyperparams: dict, seed: int = 0) -> "LogisticRegressionModel":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        if not np.all(np.isin(y, (0.0, 1.0))):
            raise ValidationError("logistic regression labels must be 0 or 1")
        lr = float(hyperparams.get("learning_rate", 0.1))
        epochs = int(hyperparams.get("epochs", 500))
        if lr <= 0:
            raise ValidationError(f"learning_rate must be > 0, got {lr}")
        if epochs < 1:
            raise ValidationError(f"epochs must be >= 1, got {epochs}")
        rng = np.random.default_rng(seed)
        weights = rng.normal(0.0, 0.01, X.shape[1])
        intercept = 0.0
        with np.errstate(over="ignore", invalid="ignore"):
            for _ in range(epochs):
                grad_w, grad_b = log_loss_gradient(weights, intercept, X, y)
                weights = weights - lr * grad_w
                intercept = intercept - lr * grad_b
                if not (np.all(np.isfinite(weights)) and np.isfinite(intercept)):
                    raise DivergenceError(
                        "logistic training diverged (non-finite weights); "
                        "lower learning_rate")
        loss = log_loss(weights, intercept, X, y)
        if not np.isfinite(loss):
            raise DivergenceError("logistic training produced a non-finite loss")
        return cls(weights, intercept)

    def decision_value(self, x) -> float:
        """Pre-sigmoid margin; linear attribution operates on this."""
        x = self._check_dim(x)
        return float(x @ self.weights + self.intercept)

    def predict_proba(self, x) -> float:
        return float(sigmoid(np.asarray([self.decision_value(x)]))[0])

    def predict(self, x) -> float:
        return 1.0 if self.predict_proba(x) > 0.5 else 0.0

    def predict_batch(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return (sigmoid(X @ self.weights + self.intercept) > 0.5).astype(float)

    def to_doc(self) -> dict:
        return {"architecture": self.architecture,
                "weights": [float(w) for w in self.weights],
                "intercept": self.intercept}


class KnnModel(Predictor):
    architecture = "knn"

    def __init__(self, X, y, k: int, task: str):
        self.X = np.asarray(X, dtype=float)
        self.y = np.asarray(y, dtype=float)
        self.k = int(k)
        self.task = task
        self.n_features = self.X.shape[1]

    @classmethod
    def fit(cls, X, y, hyperparams: dict, seed: int = 0) -> "KnnModel":
        k = int(hyperparams.get("k", 3))
        if k < 1:
            raise ValidationError(f"knn requires k >= 1, got {k}")
        task = hyperparams.get("task", "regression")
        if task not in ("regression", "binary_classification"):
            raise ValidationError(f"knn task must be regression or binary_classification, got {task!r}")
        X = np.asarray(X, dtype=float)
        if k > len(X):
            raise ValidationError(f"k={k} exceeds training set size {len(X)}")
        y = np.asarray(y, dtype=float)
        if task == "binary_classification" and not np.all(np.isin(y, (0.0, 1.0))):
            raise ValidationError("knn classification labels must be 0 or 1")
        return cls(X, y, k, task)

    def _neighbor_labels(self, x) -> np.ndarray:
        x = self._check_dim(x)
        dists = np.linalg.norm(self.X - x, axis=1)
        # stable tie-break on index keeps predictions deterministic
        order = np.lexsort((np.arange(len(dists)), dists))
        return self.y[order[: self.k]]

    def predict_proba(self, x) -> float:
        if self.task != "binary_classification":
            raise ArchitectureError("knn regressor has no predict_proba")
        return float(np.mean(self._neighbor_labels(x) == 1.0))

    def predict(self, x) -> float:
        labels = self._neighbor_labels(x)
        if self.task == "binary_classification":
            return 1.0 if float(np.mean(labels == 1.0)) > 0.5 else 0.0
        return float(np.mean(labels))

    def to_doc(self) -> dict:
        return {"architecture": self.architecture,
                "train_x": [[float(v) for v in row] for row in self.X],
                "train_y": [float(v) for v in self.y],
                "k": self.k, "task": self.task}


def fit_predictor(architecture: str, X, y, hyperparams: dict, seed: int) -> Predictor:
    if architecture == "linear_regression":
        return LinearRegressionModel.fit(X, y, hyperparams, seed)
    if architecture == "logistic_regression":
        return LogisticRegressionModel.fit(X, y, hyperparams, seed)
    if architecture == "knn":
        return KnnModel.fit(X, y, hyperparams, seed)
    raise ArchitectureError(f"unknown architecture: {architecture!r}")


def predictor_from_doc(doc: dict) -> Predictor:
    arch = doc.get("architecture")
    if arch == "linear_regression":
        return LinearRegressionModel(doc["weights"], doc["intercept"])
    if arch == "logistic_regression":
        return LogisticRegressionModel(doc["weights"], doc["intercept"])
    if arch == "knn":
        return KnnModel(doc["train_x"], doc["train_y"], doc["k"], doc["task"])
    raise ArchitectureError(f"unknown architecture in artifact: {arch!r}")
