"""Training runs: deterministic splits, fitting, metric reports, tracking.

Everything a run touched is recorded: dataset id, split spec and the
materialized member lists, hyperparameters, seed, software manifest, and
per-split metrics. Rerunning with identical inputs reproduces the model
weights bit for bit (and therefore the same content-addressed model id).
"""

from __future__ import annotations

import math
import platform as _platform
import sys
from dataclasses import dataclass

import numpy as np

from .canonical import canonical_json_bytes, content_hash
from .dataops import DataAdmin
from .entities import ARCHITECTURES, ModelVersion, TrainingRun, _require, _utcnow
from .errors import ValidationError
from .lineage import LineageGraph
from .metrics import compute_metrics, metric_direction
from .predictors import ARCHITECTURE_VERSIONS, fit_predictor, predictor_from_doc
from .store import FileStore

KIND_RUN = "run"
KIND_MODEL = "model"

SPLIT_NAMES = ("train", "val", "test")


@dataclass
class SplitSpec:
    train_frac: float
    val_frac: float
    test_frac: float
    seed: int

    def validate(self) -> None:
        fracs = (self.train_frac, self.val_frac, self.test_frac)
        for name, frac in zip(SPLIT_NAMES, fracs):
            if not (0.0 < frac < 1.0):
                raise ValidationError(
                    f"{name}_frac must be in (0,1), got {frac}")
        if abs(sum(fracs) - 1.0) > 1e-9:
            raise ValidationError(f"split fractions must sum to 1, got {sum(fracs)}")

    def to_doc(self) -> dict:
        return {"train_frac": self.train_frac, "val_frac": self.val_frac,
                "test_frac": self.test_frac, "seed": self.seed}

    @classmethod
    def from_doc(cls, doc) -> "SplitSpec":
        return cls(doc["train_frac"], doc["val_frac"], doc["test_frac"], doc["seed"])


@dataclass
class SplitMaterialization:
    dataset_id: str
    spec: SplitSpec
    train: list[str]
    val: list[str]
    test: list[str]

    def to_doc(self) -> dict:
        return {"dataset_id": self.dataset_id, "spec": self.spec.to_doc(),
                "train": self.train, "val": self.val, "test": self.test}

    def parts(self):
        return {"train": self.train, "val": self.val, "test": self.test}


def allocate_split_sizes(n: int, fracs: tuple[float, float, float]) -> tuple[int, int, int]:
    """Largest-remainder apportionment of n members across three splits.

    Floors first, then hands leftover seats to the largest fractional
    parts; ties favor train, then val, then test.
    """
    raw = [n * f for f in fracs]
    sizes = [math.floor(r) for r in raw]
    leftovers = n - sum(sizes)
    order = sorted(range(3), key=lambda i: (-(raw[i] - sizes[i]), i))
    for i in order[:leftovers]:
        sizes[i] += 1
    return tuple(sizes)


def software_manifest() -> dict:
    from . import __version__
    return {
        "xmlops": __version__,
        "python": sys.version.split()[0],
        "numpy": np.__version__,
        "platform": _platform.platform(),
    }


class Trainer:
    def __init__(self, store: FileStore, admin: DataAdmin, graph: LineageGraph):
        self._store = store
        self._admin = admin
        self._graph = graph

    # -- splits -------------------------------------------------------------

    def split_dataset(self, dataset_id: str, spec: SplitSpec) -> SplitMaterialization:
        """Deterministic shuffle keyed by the split seed; every member must
        carry a label (latest annotation wins)."""
        spec.validate()
        dataset = self._admin.get_dataset(dataset_id)
        if not dataset.sealed:
            raise ValidationError(f"dataset {dataset_id} must be sealed before splitting")
        labels = self._admin.labels_for(dataset.members)
        unlabeled = [sid for sid in dataset.members if labels[sid] is None]
        if unlabeled:
            raise ValidationError(
                f"{len(unlabeled)} member(s) lack labels: {', '.join(unlabeled[:5])}"
                + ("..." if len(unlabeled) > 5 else ""))
        n = len(dataset.members)
        n_train, n_val, n_test = allocate_split_sizes(
            n, (spec.train_frac, spec.val_frac, spec.test_frac))
        perm = np.random.default_rng(spec.seed).permutation(n)
        shuffled = [dataset.members[i] for i in perm]
        return SplitMaterialization(
            dataset_id=dataset_id, spec=spec,
            train=shuffled[:n_train],
            val=shuffled[n_train:n_train + n_val],
            test=shuffled[n_train + n_val:])

    # -- training -------------------------------------------------------------

    def train(self, architecture: str, dataset_id: str, spec: SplitSpec,
              hyperparams: dict, seed: int) -> tuple[TrainingRun, ModelVersion]:
        _require(architecture, ARCHITECTURES, "architecture")
        started_at = _utcnow()
        split = self.split_dataset(dataset_id, spec)
        labels = self._admin.labels_for(
            split.train + split.val + split.test)

        def matrix(ids):
            X, y = [], []
            for sid in ids:
                payload = self._admin.get_sample(sid).payload
                if any(c is None for c in payload):
                    raise ValidationError(
                        f"sample {sid} has missing cells; apply impute_mean first")
                X.append(payload)
                y.append(labels[sid])
            return np.asarray(X, dtype=float), np.asarray(y, dtype=float)

        X_train, y_train = matrix(split.train)
        predictor = fit_predictor(architecture, X_train, y_train, hyperparams, seed)

        run_metrics = {}
        for name, ids in split.parts().items():
            if not ids:
                run_metrics[name] = {}
                continue
            X, y = matrix(ids)
            preds = predictor.predict_batch(X)
            run_metrics[name] = compute_metrics(preds, y, predictor.task, split=name).to_doc()

        weights_ref = self._store.put_blob(canonical_json_bytes(predictor.to_doc()))
        model_id = ModelVersion.compute_id(
            architecture, ARCHITECTURE_VERSIONS[architecture], seed, hyperparams,
            dataset_id, spec.to_doc(), weights_ref)

        run_seq = self._store.next_seq("run")
        run_id = content_hash({"seq": run_seq, "model": model_id,
                               "started_at": started_at.isoformat()})
        run = TrainingRun(
            run_id=run_id, seq=run_seq, dataset=dataset_id, split=spec.to_doc(),
            hyperparams=hyperparams, metrics=run_metrics, produced_model=model_id,
            architecture=architecture, started_at=started_at, finished_at=_utcnow(),
            split_materialization={"train": split.train, "val": split.val,
                                   "test": split.test})
        self._store.put_meta(KIND_RUN, run_id, run.to_doc())

        model = ModelVersion(
            model_id=model_id,
            architecture=architecture,
            architecture_version=ARCHITECTURE_VERSIONS[architecture],
            init_seed=seed,
            training_run=run_id,
            software_manifest=software_manifest(),
            metrics=run_metrics["test"].get("values", {}),
            stage=None,
            weights_ref=weights_ref,
            task=predictor.task,
            n_features=predictor.n_features,
            baseline=[float(v) for v in X_train.mean(axis=0)],
        )
        if not self._store.has_meta(KIND_MODEL, model_id):
            # identical retrains re-produce the same model; first run wins
            self._store.put_meta(KIND_MODEL, model_id, model.to_doc())
        else:
            model = self.get_model(model_id)

        self._graph.add_edge(run_id, dataset_id, "trained_on")
        self._graph.add_edge(run_id, model_id, "produced")
        return run, model

    # -- lookups ------------------------------------------------------------

    def get_run(self, run_id: str) -> TrainingRun:
        return TrainingRun.from_doc(self._store.get_meta(KIND_RUN, run_id))

    def get_model(self, model_id: str) -> ModelVersion:
        return ModelVersion.from_doc(self._store.get_meta(KIND_MODEL, model_id))

    def load_predictor(self, model_id: str) -> "Predictor":
        model = self.get_model(model_id)
        import json
        return predictor_from_doc(json.loads(self._store.get_blob(model.weights_ref)))

    # -- comparison ------------------------------------------------------------

    def compare_runs(self, run_ids: list[str], metric: str, split: str = "val") -> dict:
        """Rank runs by a metric on one split, direction-aware; ties go to
        the earlier finished run."""
        if split not in SPLIT_NAMES:
            raise ValidationError(f"split must be one of {SPLIT_NAMES}, got {split!r}")
        direction = metric_direction(metric)
        rows = []
        for run_id in run_ids:
            run = self.get_run(run_id)
            values = run.metrics.get(split, {}).get("values", {})
            if metric not in values or values[metric] is None:
                raise ValidationError(
                    f"run {run_id} has no {metric!r} on the {split} split")
            rows.append({"run_id": run_id, "value": values[metric],
                         "finished_at": run.finished_at})
        sign = 1.0 if direction == "lower" else -1.0
        rows.sort(key=lambda r: (sign * r["value"], r["finished_at"], r["run_id"]))
        ranked = [{"run_id": r["run_id"], "value": r["value"]} for r in rows]
        return {"metric": metric, "split": split, "direction": direction,
                "ranking": ranked, "best": ranked[0]["run_id"]}
