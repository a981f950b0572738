"""Explanation generation and explainer-quality scoring.

Four methods behind one dispatch surface:

    linear_exact            w_j * (x_j - baseline_j) on the pre-link output;
                            attributions sum exactly to f(x) - f(baseline)
    permutation_importance  per-feature metric drop under seeded shuffles,
                            sign-normalized so larger means more important
    local_surrogate         kernel-weighted ridge fit to the model around x
                            (Gaussian perturbations, exp(-d^2/kw^2) weights)
    counterfactual          greedy coordinate search for the nearest input
                            (L1) that flips a binary classifier's verdict

Every persisted explanation carries four quality scores in [0,1]:
completeness (do attributions add up to the output delta), stability
(attribution sensitivity to input perturbations), fidelity (surrogate
agreement with the model, 1.0 for methods that query the model directly),
and relevance (attribution mass concentrated on the top quarter of
features).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime

import numpy as np

from .canonical import content_hash, format_timestamp, normalize_payload, parse_timestamp
from .dataops import DataAdmin
from .entities import ExplainerVersion, _utcnow
from .errors import ArchitectureError, ValidationError
from .lineage import LineageGraph
from .metrics import compute_metrics, metric_direction
from .predictors import LinearRegressionModel, LogisticRegressionModel, Predictor
from .store import FileStore
from .training import Trainer

KIND_EXPLANATION = "explanation"
KIND_EXPLAINER = "explainer"

COMPLETENESS_EPS = 1e-9
STABILITY_PERTURBATIONS = 20
STABILITY_SIGMA = 0.1

SURROGATE_DEFAULTS = {"n_perturbations": 500, "sigma": 0.3, "seed": 0, "ridge": 1e-6}
COUNTERFACTUAL_DEFAULTS = {"step": 0.05, "max_iters": 10_000}


def value_fn(predictor: Predictor):
    """The scalar the explanation targets: pre-sigmoid margin for logistic
    (attribution on the logit), class-1 probability for other classifiers,
    raw prediction for regressors."""
    if isinstance(predictor, LogisticRegressionModel):
        return predictor.decision_value
    if predictor.task == "binary_classification":
        return predictor.predict_proba
    return predictor.predict


@dataclass
class SurrogateResult:
    weights: list[float]
    intercept: float
    fidelity_r2: float | None
    reason: str | None = None

    def to_doc(self) -> dict:
        return {"weights": self.weights, "intercept": self.intercept,
                "fidelity_r2": self.fidelity_r2, "reason": self.reason}


@dataclass
class CounterfactualResult:
    found: bool
    payload: list[float] | None = None
    distance_l1: float | None = None
    predicted_class: float | None = None

    def to_doc(self) -> dict:
        return {"found": self.found, "payload": self.payload,
                "distance_l1": self.distance_l1, "predicted_class": self.predicted_class}


@dataclass
class Explanation:
    explanation_id: str
    explainer: str
    model: str
    input: list[float]
    baseline: list[float]
    attributions: list[float]
    quality: dict
    created_at: datetime
    surrogate: dict | None = None
    counterfactual: dict | None = None
    domain_knowledge: str = ""
    sample_id: str | None = None
    deployment_id: str | None = None
    request_id: str | None = None

    def to_doc(self) -> dict:
        return {
            "explanation_id": self.explanation_id,
            "explainer": self.explainer,
            "model": self.model,
            "input": self.input,
            "baseline": self.baseline,
            "attributions": self.attributions,
            "quality": self.quality,
            "created_at": format_timestamp(self.created_at),
            "surrogate": self.surrogate,
            "counterfactual": self.counterfactual,
            "domain_knowledge": self.domain_knowledge,
            "sample_id": self.sample_id,
            "deployment_id": self.deployment_id,
            "request_id": self.request_id,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "Explanation":
        return cls(doc["explanation_id"], doc["explainer"], doc["model"], doc["input"],
                   doc["baseline"], doc["attributions"], doc["quality"],
                   parse_timestamp(doc["created_at"]), doc.get("surrogate"),
                   doc.get("counterfactual"), doc.get("domain_knowledge", ""),
                   doc.get("sample_id"), doc.get("deployment_id"), doc.get("request_id"))


# -- attribution methods -------------------------------------------------------


def linear_exact(predictor: Predictor, x, baseline) -> list[float]:
    """Exact additive attribution for linear-family models.

    attribution_j = w_j * (x_j - baseline_j); the sum equals
    f(x) - f(baseline) on the pre-link output, exactly.
    """
    if not isinstance(predictor, (LinearRegressionModel, LogisticRegressionModel)):
        raise ArchitectureError(
            f"linear_exact requires a linear or logistic model, "
            f"got {predictor.architecture}")
    x = np.asarray(x, dtype=float)
    baseline = np.asarray(baseline, dtype=float)
    if x.shape != baseline.shape or x.shape != predictor.weights.shape:
        raise ValidationError("input, baseline, and weights must share one dimension")
    return [float(v) for v in predictor.weights * (x - baseline)]


def permutation_importance(predictor: Predictor, X, y, metric: str, seed: int,
                           repeats: int = 5) -> list[float]:
    """Mean metric degradation when one feature is shuffled, per feature.

    Sign-normalized: for lower-better metrics the importance is
    (shuffled - baseline), for higher-better it is (baseline - shuffled),
    so larger always means more important. Deterministic given the seed.
    Shuffling a constant feature is a no-op, so its importance is exactly 0.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    base_report = compute_metrics(predictor.predict_batch(X), y, predictor.task)
    if metric not in base_report.values or base_report.values[metric] is None:
        raise ValidationError(
            f"metric {metric!r} is unavailable for task {predictor.task} "
            f"({base_report.reasons.get(metric, 'not produced')})")
    m0 = base_report.values[metric]
    sign = 1.0 if metric_direction(metric) == "lower" else -1.0
    rng = np.random.default_rng(seed)
    importances = []
    for j in range(X.shape[1]):
        deltas = []
        for _ in range(repeats):
            perm = rng.permutation(len(X))
            shuffled = X.copy()
            shuffled[:, j] = X[perm, j]
            report = compute_metrics(predictor.predict_batch(shuffled), y, predictor.task)
            if report.values[metric] is None:
                raise ValidationError(
                    f"metric {metric!r} became undefined under shuffling "
                    f"({report.reasons.get(metric)})")
            deltas.append(sign * (report.values[metric] - m0))
        importances.append(float(np.mean(deltas)))
    return importances


def local_surrogate(predictor: Predictor, x, config: dict | None = None) -> SurrogateResult:
    """Kernel-weighted linear surrogate fitted around x.

    Draws n Gaussian perturbations x' ~ N(x, sigma^2 I), weights them by
    exp(-||x'-x||^2 / kw^2) with kw = 0.75*sqrt(d), and fits a weighted
    ridge regression (lambda=1e-6, intercept unpenalized) to the model's
    outputs. fidelity_r2 is the weighted R^2 of the surrogate against the
    model on the perturbation set; a constant model yields zero weights
    and a null fidelity with a reason code.
    """
    cfg = {**SURROGATE_DEFAULTS, **(config or {})}
    x = np.asarray(normalize_payload(list(x)), dtype=float)
    d = len(x)
    kernel_width = float(cfg.get("kernel_width") or 0.75 * math.sqrt(d))
    n = int(cfg["n_perturbations"])
    if n < d + 1:
        raise ValidationError(f"n_perturbations={n} too small for {d} features")
    rng = np.random.default_rng(int(cfg["seed"]))
    perturbed = x + rng.normal(0.0, float(cfg["sigma"]), size=(n, d))
    outputs = np.asarray([value_fn(predictor)(row) for row in perturbed], dtype=float)
    sq_dist = np.sum((perturbed - x) ** 2, axis=1)
    sample_w = np.exp(-sq_dist / kernel_width ** 2)

    if np.ptp(outputs) == 0.0:
        return SurrogateResult([0.0] * d, float(outputs[0]), None, "constant_model_output")

    design = np.hstack([perturbed, np.ones((n, 1))])
    wd = design * sample_w[:, None]
    gram = design.T @ wd
    penalty = np.eye(d + 1) * float(cfg["ridge"])
    penalty[-1, -1] = 0.0
    beta = np.linalg.solve(gram + penalty, wd.T @ outputs)
    fitted = design @ beta
    residual = float(np.sum(sample_w * (outputs - fitted) ** 2))
    weighted_mean = float(np.sum(sample_w * outputs) / np.sum(sample_w))
    total = float(np.sum(sample_w * (outputs - weighted_mean) ** 2))
    if total == 0.0:
        return SurrogateResult([0.0] * d, float(outputs[0]), None, "constant_model_output")
    return SurrogateResult([float(b) for b in beta[:-1]], float(beta[-1]),
                           1.0 - residual / total)


def counterfactual(predictor: Predictor, x, target_class: float,
                   config: dict | None = None) -> CounterfactualResult:
    """Nearest-by-L1 input that flips a binary classifier to target_class.

    Greedy coordinate descent: repeatedly apply the single +-step move that
    most increases the target-class probability until the class flips or
    the iteration cap is hit, then shrink each changed coordinate back
    toward x (bisection) while preserving the flip. Returns an explicit
    not-found result when the cap is reached, never an exception.
    """
    if predictor.task != "binary_classification":
        raise ArchitectureError("counterfactual search requires a binary classifier")
    target = float(target_class)
    if target not in (0.0, 1.0):
        raise ValidationError(f"target_class must be 0 or 1, got {target_class}")
    cfg = {**COUNTERFACTUAL_DEFAULTS, **(config or {})}
    step, max_iters = float(cfg["step"]), int(cfg["max_iters"])
    x = np.asarray(normalize_payload(list(x)), dtype=float)
    if predictor.predict(x) == target:
        raise ValidationError("input already classifies as the target class")

    def target_prob(point) -> float:
        p = predictor.predict_proba(point)
        return p if target == 1.0 else 1.0 - p

    current = x.copy()
    flipped = False
    for _ in range(max_iters):
        if predictor.predict(current) == target:
            flipped = True
            break
        best_gain, best_move = 0.0, None
        here = target_prob(current)
        for j in range(len(x)):
            for direction in (step, -step):
                candidate = current.copy()
                candidate[j] += direction
                gain = target_prob(candidate) - here
                if gain > best_gain:
                    best_gain, best_move = gain, (j, direction)
        if best_move is None:
            return CounterfactualResult(found=False)
        current[best_move[0]] += best_move[1]
    if not flipped and predictor.predict(current) != target:
        return CounterfactualResult(found=False)

    # L1 back-search: shrink each moved coordinate toward x while the flip holds
    for _ in range(2):
        for j in range(len(x)):
            if current[j] == x[j]:
                continue
            trial = current.copy()
            trial[j] = x[j]
            if predictor.predict(trial) == target:
                current = trial
                continue
            delta = current[j] - x[j]
            lo, hi = 0.0, 1.0  # kept fraction of delta; hi preserves the flip
            for _ in range(50):
                mid = (lo + hi) / 2.0
                trial[j] = x[j] + mid * delta
                if predictor.predict(trial) == target:
                    hi = mid
                else:
                    lo = mid
            current[j] = x[j] + hi * delta

    return CounterfactualResult(
        found=True,
        payload=[float(v) for v in current],
        distance_l1=float(np.sum(np.abs(current - x))),
        predicted_class=target)


# -- quality ----------------------------------------------------------------


def quality_scores(attributions, predictor: Predictor, x, baseline,
                   recompute, fidelity: float | None,
                   n_perturbations: int = STABILITY_PERTURBATIONS,
                   sigma: float = STABILITY_SIGMA, seed: int = 0) -> dict:
    """The four explainer-quality scores, each clamped to [0,1].

    completeness  1 - |sum(attr) - (f(x) - f(baseline))| / max(|delta|, eps)
    stability     1 / (1 + L) with L the max attribution change per unit of
                  input change over seeded perturbations (zero-distance
                  pairs excluded)
    fidelity      surrogate R^2, or 1.0 for methods that query the model
                  directly (null surrogate fidelity degrades to 0.0)
    relevance     share of total |attr| carried by the top ceil(d/4)
                  features (zero attribution mass scores the uniform value)
    """
    attr = np.asarray(attributions, dtype=float)
    x = np.asarray(x, dtype=float)
    baseline = np.asarray(baseline, dtype=float)
    f = value_fn(predictor)
    delta = f(x) - f(baseline)
    completeness = 1.0 - abs(float(attr.sum()) - delta) / max(abs(delta), COMPLETENESS_EPS)
    completeness = min(1.0, max(0.0, completeness))

    rng = np.random.default_rng(seed)
    lipschitz = 0.0
    for _ in range(n_perturbations):
        x_prime = x + rng.normal(0.0, sigma, size=x.shape)
        dist = float(np.linalg.norm(x_prime - x))
        if dist == 0.0:
            continue
        attr_prime = np.asarray(recompute(x_prime), dtype=float)
        lipschitz = max(lipschitz, float(np.linalg.norm(attr - attr_prime)) / dist)
    stability = 1.0 / (1.0 + lipschitz)

    fidelity_score = 1.0 if fidelity is None else fidelity
    fidelity_score = min(1.0, max(0.0, fidelity_score))

    d = len(attr)
    top = math.ceil(d / 4)
    mass = np.sort(np.abs(attr))[::-1]
    total = float(mass.sum())
    relevance = (top / d) if total == 0.0 else float(mass[:top].sum()) / total

    return {
        "completeness": completeness,
        "stability": min(1.0, max(0.0, stability)),
        "fidelity": fidelity_score,
        "relevance": min(1.0, max(0.0, relevance)),
    }


# -- service ----------------------------------------------------------------


class ExplainService:
    def __init__(self, store: FileStore, admin: DataAdmin, trainer: Trainer,
                 graph: LineageGraph):
        self._store = store
        self._admin = admin
        self._trainer = trainer
        self._graph = graph

    def get_explainer(self, explainer_id: str) -> ExplainerVersion:
        return ExplainerVersion.from_doc(
            self._store.get_meta(KIND_EXPLAINER, explainer_id))

    def explain(self, model_id: str, explainer_id: str, payload=None,
                sample_id: str | None = None, domain_knowledge: str = "",
                deployment_id: str | None = None,
                request_id: str | None = None) -> Explanation:
        """Dispatch to the explainer's method, score quality, persist.

        Deterministic given (model, explainer, input), so the explanation id
        is content addressed and re-explaining is idempotent.
        """
        explainer = self.get_explainer(explainer_id)
        if explainer.compatible_models and model_id not in explainer.compatible_models:
            raise ValidationError(
                f"explainer {explainer_id} is not registered for model {model_id}")
        model = self._trainer.get_model(model_id)
        predictor = self._trainer.load_predictor(model_id)
        if sample_id is not None:
            payload = self._admin.get_sample(sample_id).payload
        if payload is None:
            raise ValidationError("explain needs a payload or a sample_id")
        x = np.asarray(normalize_payload(list(payload)), dtype=float)
        if len(x) != predictor.n_features:
            raise ValidationError(
                f"payload has {len(x)} features, model expects {predictor.n_features}")
        baseline = np.asarray(model.baseline, dtype=float)
        config = dict(explainer.config)

        surrogate_doc = None
        counterfactual_doc = None
        fidelity: float | None = 1.0

        if explainer.method == "linear_exact":
            attributions = linear_exact(predictor, x, baseline)
            recompute = lambda xp: linear_exact(predictor, xp, baseline)
        elif explainer.method == "permutation_importance":
            dataset_id = config.get("dataset")
            metric = config.get("metric") or ("mse" if predictor.task == "regression" else "f1")
            seed = int(config.get("seed", 0))
            repeats = int(config.get("repeats", 5))
            X, y = self._dataset_matrix(dataset_id, model)
            attributions = permutation_importance(predictor, X, y, metric, seed, repeats)
            # global method: importances do not depend on the explained input
            recompute = lambda xp: attributions
        elif explainer.method == "local_surrogate":
            result = local_surrogate(predictor, x, config)
            attributions = result.weights
            surrogate_doc = result.to_doc()
            fidelity = result.fidelity_r2

            def recompute(xp, _cfg=config):
                return local_surrogate(predictor, xp, _cfg).weights
        elif explainer.method == "counterfactual":
            target = config.get("target_class")
            if target is None:
                target = 1.0 - predictor.predict(x)
            result = counterfactual(predictor, x, target, config)
            counterfactual_doc = result.to_doc()
            if result.found:
                attributions = [float(c - v) for c, v in zip(result.payload, x)]
            else:
                attributions = [0.0] * len(x)

            def recompute(xp, _cfg=config, _t=target):
                try:
                    res = counterfactual(predictor, xp, _t, _cfg)
                except ValidationError:
                    return [0.0] * len(xp)  # perturbation crossed the boundary
                if not res.found:
                    return [0.0] * len(xp)
                return [float(c - v) for c, v in zip(res.payload, xp)]
        else:
            raise ValidationError(f"unknown explainer method: {explainer.method!r}")

        quality = quality_scores(
            attributions, predictor, x, baseline, recompute, fidelity,
            n_perturbations=int(config.get("stability_perturbations",
                                           STABILITY_PERTURBATIONS)),
            sigma=float(config.get("stability_sigma", STABILITY_SIGMA)),
            seed=int(config.get("stability_seed", 0)))

        explanation = Explanation(
            explanation_id=content_hash({
                "explainer": explainer_id, "model": model_id,
                "input": [float(v) for v in x], "domain_knowledge": domain_knowledge}),
            explainer=explainer_id,
            model=model_id,
            input=[float(v) for v in x],
            baseline=[float(v) for v in baseline],
            attributions=[float(a) for a in attributions],
            quality=quality,
            created_at=_utcnow(),
            surrogate=surrogate_doc,
            counterfactual=counterfactual_doc,
            domain_knowledge=domain_knowledge,
            sample_id=sample_id,
            deployment_id=deployment_id,
            request_id=request_id,
        )
        if not self._store.has_meta(KIND_EXPLANATION, explanation.explanation_id):
            self._store.put_meta(KIND_EXPLANATION, explanation.explanation_id,
                                 explanation.to_doc())
            self._graph.add_edge(explanation.explanation_id, model_id, "explains")
        else:
            explanation = self.get_explanation(explanation.explanation_id)
        return explanation

    def get_explanation(self, explanation_id: str) -> Explanation:
        return Explanation.from_doc(
            self._store.get_meta(KIND_EXPLANATION, explanation_id))

    def list_explanations(self, model_id: str | None = None,
                          explainer_id: str | None = None,
                          dataset_id: str | None = None,
                          deployment_id: str | None = None) -> list[Explanation]:
        members = None
        if dataset_id is not None:
            members = set(self._admin.get_dataset(dataset_id).members)
        out = []
        for doc in self._store.iter_meta(KIND_EXPLANATION):
            e = Explanation.from_doc(doc)
            if model_id is not None and e.model != model_id:
                continue
            if explainer_id is not None and e.explainer != explainer_id:
                continue
            if deployment_id is not None and e.deployment_id != deployment_id:
                continue
            if members is not None and e.sample_id not in members:
                continue
            out.append(e)
        out.sort(key=lambda e: (e.created_at, e.explanation_id))
        return out

    def _dataset_matrix(self, dataset_id: str | None, model) -> tuple:
        if dataset_id is None:
            run = self._trainer.get_run(model.training_run)
            dataset_id = run.dataset
        dataset = self._admin.get_dataset(dataset_id)
        if not dataset.sealed:
            raise ValidationError("permutation importance needs a sealed dataset")
        labels = self._admin.labels_for(dataset.members)
        unlabeled = [s for s in dataset.members if labels[s] is None]
        if unlabeled:
            raise ValidationError(
                f"permutation importance needs labels; missing for {len(unlabeled)} member(s)")
        X = [self._admin.get_sample(s).payload for s in dataset.members]
        y = [labels[s] for s in dataset.members]
        return np.asarray(X, dtype=float), np.asarray(y, dtype=float)
