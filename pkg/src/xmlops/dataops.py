"""Data administration: ingestion, dataset versioning, deterministic
preprocessing, annotations, and quality exclusion.

Samples and datasets are content addressed, so every operation here is
idempotent by construction: re-ingesting identical content returns the
existing id without duplicating anything.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .canonical import normalize_payload
from .entities import (
    Annotation,
    DatasetVersion,
    ExclusionMark,
    PreprocessingRecipe,
    SampleRecord,
    _utcnow,
)
from .errors import (
    ExcludedSampleError,
    ImmutabilityError,
    UnknownEntityError,
    ValidationError,
)
from .lineage import LineageGraph
from .store import FileStore

KIND_SAMPLE = "sample"
KIND_DATASET = "dataset"
KIND_RECIPE = "recipe"
KIND_ANNOTATION = "annotation"
KIND_EXCLUSION = "exclusion"


class DataAdmin:
    def __init__(self, store: FileStore, graph: LineageGraph):
        self._store = store
        self._graph = graph

    # -- ingestion ---------------------------------------------------------

    def ingest_sample(self, payload, provenance: dict, format_tag: str = "tabular_row") -> SampleRecord:
        """Persist one sample. Idempotent: identical content reuses the id."""
        payload = normalize_payload(payload)
        captured_at = provenance.get("captured_at") or provenance.get("ts") or provenance.get("t")
        if captured_at is None:
            raise ValidationError("provenance must include a captured_at timestamp")
        source = {
            "equipment_id": provenance.get("equipment_id") or provenance.get("eq"),
            "location": provenance.get("location", ""),
            "sensor_config": provenance.get("sensor_config", {}),
        }
        if not source["equipment_id"]:
            raise ValidationError("provenance must include equipment_id")
        record = SampleRecord.create(payload, captured_at, source, format_tag)
        self._store.put_meta(KIND_SAMPLE, record.sample_id, record.to_doc())
        return record

    def ingest_file(self, path: str | Path, fmt: str, default_equipment: str = "bulk-import") -> list[str]:
        """Bulk ingest from CSV or JSON. Returns sample ids in file order."""
        path = Path(path)
        if fmt == "csv":
            return self._ingest_csv(path, default_equipment)
        if fmt == "json":
            return self._ingest_json(path, default_equipment)
        raise ValidationError(f"unsupported ingest format: {fmt!r} (csv or json)")

    def _ingest_csv(self, path: Path, default_equipment: str) -> list[str]:
        ids = []
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or "ts" not in reader.fieldnames:
                raise ValidationError(f"{path}: CSV needs a header row with a 'ts' column")
            meta_cols = {"ts", "equipment_id", "location", "label"}
            feature_cols = [c for c in reader.fieldnames if c not in meta_cols]
            if not feature_cols:
                raise ValidationError(f"{path}: CSV has no feature columns")
            for row_no, row in enumerate(reader, start=2):
                payload = []
                for col in feature_cols:
                    cell = (row.get(col) or "").strip()
                    if cell == "":
                        payload.append(None)
                        continue
                    try:
                        payload.append(float(cell))
                    except ValueError:
                        raise ValidationError(
                            f"{path}: row {row_no}: column {col!r} is not numeric: {cell!r}")
                try:
                    record = self.ingest_sample(payload, {
                        "equipment_id": row.get("equipment_id") or default_equipment,
                        "location": row.get("location", ""),
                        "captured_at": row["ts"],
                    })
                except ValidationError as exc:
                    raise ValidationError(f"{path}: row {row_no}: {exc}") from exc
                label = (row.get("label") or "").strip()
                if label:
                    self.attach_annotation(record.sample_id, float(label),
                                           author="bulk-import", origin="system")
                ids.append(record.sample_id)
        return ids

    def _ingest_json(self, path: Path, default_equipment: str) -> list[str]:
        try:
            entries = json.loads(path.read_text("utf-8"))
        except ValueError as exc:
            raise ValidationError(f"{path}: invalid JSON: {exc}") from exc
        if not isinstance(entries, list):
            raise ValidationError(f"{path}: JSON ingest expects an array of objects")
        ids = []
        for i, entry in enumerate(entries):
            provenance = dict(entry.get("provenance", {}))
            provenance.setdefault("equipment_id", default_equipment)
            try:
                record = self.ingest_sample(entry["payload"], provenance,
                                            entry.get("format_tag", "tabular_row"))
            except (ValidationError, KeyError) as exc:
                raise ValidationError(f"{path}: entry {i}: {exc}") from exc
            if entry.get("label") is not None:
                self.attach_annotation(record.sample_id, entry["label"],
                                       author="bulk-import", origin="system")
            ids.append(record.sample_id)
        return ids

    def get_sample(self, sample_id: str) -> SampleRecord:
        return SampleRecord.from_doc(self._store.get_meta(KIND_SAMPLE, sample_id))

    # -- datasets ----------------------------------------------------------

    def define_dataset(self, sample_ids: list[str], recipe: str | None = None,
                       parent: str | None = None) -> DatasetVersion:
        if not sample_ids:
            raise ValidationError("a dataset needs at least one member")
        for sid in sample_ids:
            if not self._store.has_meta(KIND_SAMPLE, sid):
                raise UnknownEntityError(KIND_SAMPLE, sid)
            if self._store.has_meta(KIND_EXCLUSION, sid):
                raise ExcludedSampleError(sid)
        if recipe is not None and not self._store.has_meta(KIND_RECIPE, recipe):
            raise UnknownEntityError(KIND_RECIPE, recipe)
        dataset = DatasetVersion.create(sample_ids, recipe, parent)
        if self._store.has_meta(KIND_DATASET, dataset.dataset_id):
            return self.get_dataset(dataset.dataset_id)  # idempotent redefine
        self._store.put_meta(KIND_DATASET, dataset.dataset_id, dataset.to_doc())
        for sid in dataset.members:
            self._graph.add_edge(dataset.dataset_id, sid, "derived_from")
        if recipe is not None:
            self._graph.add_edge(dataset.dataset_id, recipe, "derived_from")
        if parent is not None:
            self._graph.add_edge(dataset.dataset_id, parent, "derived_from")
        return dataset

    def get_dataset(self, dataset_id: str) -> DatasetVersion:
        return DatasetVersion.from_doc(self._store.get_meta(KIND_DATASET, dataset_id))

    def seal_dataset(self, dataset_id: str) -> DatasetVersion:
        """One-way seal; sealing an already sealed dataset is a no-op."""
        dataset = self.get_dataset(dataset_id)
        if dataset.sealed:
            return dataset

        def _seal(doc):
            doc["sealed"] = True
            return doc

        return DatasetVersion.from_doc(
            self._store.update_meta(KIND_DATASET, dataset_id, _seal))

    def append_to_dataset(self, dataset_id: str, sample_ids: list[str]) -> DatasetVersion:
        """Extend an unsealed dataset, yielding a new version (ids are
        content addressed, so the extended member list is a new dataset
        with the old one as parent). Sealed datasets refuse."""
        dataset = self.get_dataset(dataset_id)
        if dataset.sealed:
            raise ImmutabilityError(
                f"dataset {dataset_id} is sealed; members are immutable")
        return self.define_dataset(dataset.members + list(sample_ids),
                                   dataset.recipe, parent=dataset_id)

    def set_dataset_recipe(self, dataset_id: str, recipe: str | None) -> DatasetVersion:
        """Recipe change on an unsealed dataset; new version, same rules."""
        dataset = self.get_dataset(dataset_id)
        if dataset.sealed:
            raise ImmutabilityError(
                f"dataset {dataset_id} is sealed; recipe is immutable")
        return self.define_dataset(dataset.members, recipe, parent=dataset_id)

    # -- recipes -----------------------------------------------------------

    def create_recipe(self, steps: list[dict]) -> PreprocessingRecipe:
        recipe = PreprocessingRecipe.create(steps)
        self._store.put_meta(KIND_RECIPE, recipe.recipe_id, recipe.to_doc())
        return recipe

    def get_recipe(self, recipe_id: str) -> PreprocessingRecipe:
        return PreprocessingRecipe.from_doc(self._store.get_meta(KIND_RECIPE, recipe_id))

    def apply_recipe(self, dataset_id: str, recipe_id: str) -> DatasetVersion:
        """Derive a new sealed dataset by running the recipe over a sealed
        source. Deterministic: rerunning yields the byte-identical id.

        Derived samples are first-class SampleRecords whose sensor_config
        records the source sample and recipe.
        """
        source = self.get_dataset(dataset_id)
        if not source.sealed:
            raise ValidationError(f"dataset {dataset_id} must be sealed before preprocessing")
        if not source.members:
            raise ValidationError("cannot preprocess an empty dataset")
        recipe = self.get_recipe(recipe_id)
        samples = [self.get_sample(sid) for sid in source.members]
        payloads = [list(s.payload) for s in samples]
        origins = list(range(len(samples)))  # index into samples per payload
        offsets = [None] * len(samples)
        warnings: list[str] = []

        for step in recipe.steps:
            payloads, origins, offsets, step_warnings = _apply_step(
                step, payloads, origins, offsets)
            warnings.extend(step_warnings)

        derived_ids = []
        for payload, origin_idx, offset in zip(payloads, origins, offsets):
            src = samples[origin_idx]
            sensor_config = dict(src.source.get("sensor_config", {}))
            sensor_config["derived_from_sample"] = src.sample_id
            sensor_config["recipe"] = recipe.recipe_id
            if offset is not None:
                sensor_config["window_offset"] = offset
            tag = "timeseries_window" if offset is not None else src.format_tag
            record = SampleRecord.create(payload, src.captured_at, {
                "equipment_id": src.source["equipment_id"],
                "location": src.source.get("location", ""),
                "sensor_config": sensor_config,
            }, tag)
            self._store.put_meta(KIND_SAMPLE, record.sample_id, record.to_doc())
            derived_ids.append(record.sample_id)

        derived = DatasetVersion.create(derived_ids, recipe.recipe_id, parent=dataset_id)
        if self._store.has_meta(KIND_DATASET, derived.dataset_id):
            return self.get_dataset(derived.dataset_id)  # idempotent rerun
        derived.sealed = True
        derived.warnings = warnings
        self._store.put_meta(KIND_DATASET, derived.dataset_id, derived.to_doc())
        for sid in derived_ids:
            self._graph.add_edge(derived.dataset_id, sid, "derived_from")
        self._graph.add_edge(derived.dataset_id, recipe.recipe_id, "derived_from")
        self._graph.add_edge(derived.dataset_id, dataset_id, "derived_from")
        return derived

    # -- annotations ---------------------------------------------------------

    def attach_annotation(self, sample_id: str, label, author: str,
                          origin: str = "human", created_at=None) -> Annotation:
        if not self._store.has_meta(KIND_SAMPLE, sample_id):
            raise UnknownEntityError(KIND_SAMPLE, sample_id)
        annotation = Annotation.create(sample_id, label, author, origin, created_at)
        self._store.put_meta(KIND_ANNOTATION, annotation.annotation_id, annotation.to_doc())
        self._graph.add_edge(annotation.annotation_id, sample_id, "feedback_on")
        return annotation

    def annotations_for(self, sample_id: str) -> list[Annotation]:
        out = [Annotation.from_doc(doc) for doc in self._store.iter_meta(KIND_ANNOTATION)
               if doc["sample_id"] == sample_id]
        out.sort(key=lambda a: (a.created_at, a.annotation_id))
        return out

    def latest_label(self, sample_id: str) -> float | None:
        """Label used for training: latest annotation by timestamp wins;
        earlier ones are retained for audit."""
        anns = self.annotations_for(sample_id)
        return anns[-1].label if anns else None

    def labels_for(self, sample_ids: list[str]) -> dict[str, float | None]:
        by_sample: dict[str, Annotation] = {}
        for doc in self._store.iter_meta(KIND_ANNOTATION):
            ann = Annotation.from_doc(doc)
            cur = by_sample.get(ann.sample_id)
            if cur is None or (ann.created_at, ann.annotation_id) > (cur.created_at, cur.annotation_id):
                by_sample[ann.sample_id] = ann
        return {sid: (by_sample[sid].label if sid in by_sample else None)
                for sid in sample_ids}

    # -- exclusion ----------------------------------------------------------

    def mark_bad(self, sample_id: str, reason: str, author: str) -> ExclusionMark:
        """Exclude a sample from all future datasets. Idempotent; there is
        no unmark. Existing sealed datasets keep the sample."""
        if not self._store.has_meta(KIND_SAMPLE, sample_id):
            raise UnknownEntityError(KIND_SAMPLE, sample_id)
        if self._store.has_meta(KIND_EXCLUSION, sample_id):
            return ExclusionMark.from_doc(self._store.get_meta(KIND_EXCLUSION, sample_id))
        mark = ExclusionMark(sample_id, reason, author, _utcnow())
        self._store.put_meta(KIND_EXCLUSION, sample_id, mark.to_doc())
        self._graph.add_edge(f"exclusion:{sample_id}", sample_id, "feedback_on")
        return mark

    def is_excluded(self, sample_id: str) -> bool:
        return self._store.has_meta(KIND_EXCLUSION, sample_id)

    def exclusion_set(self) -> set[str]:
        return set(self._store.list_meta(KIND_EXCLUSION))

    # -- similarity -----------------------------------------------------------

    def find_similar(self, sample_id: str, k: int) -> list[tuple[str, float]]:
        """k nearest stored samples by Euclidean distance, ascending;
        ties broken by lexicographic id; the query itself is excluded.
        Samples with missing cells cannot be measured and are skipped."""
        if k < 1:
            raise ValidationError("k must be >= 1")
        query = self.get_sample(sample_id)
        if any(c is None for c in query.payload):
            raise ValidationError("query sample has missing cells; distance undefined")
        q = np.asarray(query.payload, dtype=float)
        scored = []
        for other_id in self._store.list_meta(KIND_SAMPLE):
            if other_id == sample_id:
                continue
            other = self.get_sample(other_id)
            if any(c is None for c in other.payload):
                continue
            if len(other.payload) != len(query.payload):
                raise ValidationError(
                    f"dimension mismatch: sample {other_id} has {len(other.payload)} "
                    f"features, query has {len(query.payload)}")
            dist = float(np.linalg.norm(q - np.asarray(other.payload, dtype=float)))
            scored.append((other_id, dist))
        scored.sort(key=lambda item: (item[1], item[0]))
        return scored[:k]


# -- preprocessing steps ------------------------------------------------------


def _apply_step(step, payloads, origins, offsets):
    name, params = step["name"], step.get("params", {})
    if name == "clip":
        return _clip(payloads, params), origins, offsets, []
    if name == "impute_mean":
        return _impute_mean(payloads), origins, offsets, []
    if name == "standardize":
        new_payloads, warnings = _standardize(payloads)
        return new_payloads, origins, offsets, warnings
    if name == "window":
        return _window(payloads, origins, params)
    raise ValidationError(f"unknown recipe step: {name!r}")


def _clip(payloads, params):
    try:
        lo, hi = float(params["lo"]), float(params["hi"])
    except (KeyError, TypeError, ValueError):
        raise ValidationError("clip requires numeric lo and hi params")
    if not lo < hi:
        raise ValidationError(f"clip requires lo < hi, got lo={lo}, hi={hi}")
    return [[None if c is None else min(max(c, lo), hi) for c in p] for p in payloads]


def _require_rectangular(payloads, what):
    width = len(payloads[0])
    if any(len(p) != width for p in payloads):
        raise ValidationError(f"{what} requires equal-length payloads")
    return width


def _impute_mean(payloads):
    width = _require_rectangular(payloads, "impute_mean")
    means = []
    for j in range(width):
        col = [p[j] for p in payloads if p[j] is not None]
        if not col:
            raise ValidationError(f"impute_mean: feature {j} has no observed values")
        means.append(float(np.mean(col)))
    return [[means[j] if p[j] is None else p[j] for j in range(width)] for p in payloads]


def _standardize(payloads):
    """Center and scale each feature by its population std. Zero-variance
    features pass through unchanged, with a warning recorded."""
    width = _require_rectangular(payloads, "standardize")
    if any(c is None for p in payloads for c in p):
        raise ValidationError("standardize requires complete payloads; impute first")
    matrix = np.asarray(payloads, dtype=float)
    mean = matrix.mean(axis=0)
    std = matrix.std(axis=0)  # population std: exact on two-point datasets
    warnings = []
    for j in range(width):
        if std[j] == 0.0:
            warnings.append(f"standardize: feature {j} has zero variance; passed through")
    scaled = np.where(std == 0.0, matrix, (matrix - mean) / np.where(std == 0.0, 1.0, std))
    return [list(map(float, row)) for row in scaled], warnings


def _window(payloads, origins, params):
    try:
        length = int(params["length"])
    except (KeyError, TypeError, ValueError):
        raise ValidationError("window requires an integer length param")
    if length < 1:
        raise ValidationError(f"window requires length >= 1, got {length}")
    stride = int(params.get("stride", length))
    if stride < 1:
        raise ValidationError(f"window stride must be >= 1, got {stride}")
    new_payloads, new_origins, new_offsets = [], [], []
    for p, origin in zip(payloads, origins):
        start = 0
        while start + length <= len(p):
            new_payloads.append(p[start:start + length])
            new_origins.append(origin)
            new_offsets.append(start)
            start += stride
    if not new_payloads:
        raise ValidationError(
            f"window length {length} exceeds every payload in the dataset")
    return new_payloads, new_origins, new_offsets, []
