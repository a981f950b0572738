from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from xmlops import Config, Platform
from xmlops.training import SplitSpec

TS = "2024-01-01T00:00:00+00:00"


def pytest_runtest_logreport(report):
    """One pass/fail line per acceptance criterion."""
    if report.when == "call" and "test_acceptance" in report.nodeid:
        status = "PASS" if report.passed else "FAIL"
        name = report.nodeid.split("::")[-1]
        print(f"\nACCEPTANCE {status}: {name}", flush=True)


@pytest.fixture
def platform(tmp_path) -> Platform:
    return Platform(Config(store_path=str(tmp_path / "store")))


def ingest_samples(platform: Platform, payloads, labels=None, equipment="rig-1"):
    """Ingest payloads with distinct timestamps; optionally annotate."""
    ids = []
    for i, payload in enumerate(payloads):
        record = platform.admin.ingest_sample(payload, {
            "equipment_id": equipment,
            "captured_at": f"2024-01-01T00:{i // 60:02d}:{i % 60:02d}+00:00",
            "sensor_config": {"n": i},
        })
        ids.append(record.sample_id)
        if labels is not None:
            platform.admin.attach_annotation(record.sample_id, labels[i],
                                             author="fixture", origin="system")
    return ids


def sealed_dataset(platform: Platform, payloads, labels=None):
    ids = ingest_samples(platform, payloads, labels)
    dataset = platform.admin.define_dataset(ids)
    platform.admin.seal_dataset(dataset.dataset_id)
    return platform.admin.get_dataset(dataset.dataset_id)


def linear_fixture(platform: Platform, n=40, seed=3, noise=0.0, slope=2.0, bias=1.0):
    """y = slope*x + bias dataset plus a trained linear model."""
    rng = np.random.default_rng(seed)
    X = rng.uniform(-3, 3, size=(n, 1))
    y = slope * X[:, 0] + bias + (rng.normal(0, noise, n) if noise else 0.0)
    dataset = sealed_dataset(platform, [[float(v)] for v in X[:, 0]],
                             [float(v) for v in y])
    spec = SplitSpec(0.6, 0.2, 0.2, seed=11)
    run, model = platform.trainer.train("linear_regression", dataset.dataset_id,
                                        spec, {"ridge_lambda": 0.0}, seed=1)
    return dataset, run, model


def logistic_fixture(platform: Platform, n=60, seed=5, margin=1.0):
    """Linearly separable two-cluster data and a trained logistic model."""
    rng = np.random.default_rng(seed)
    half = n // 2
    neg = rng.normal(-2.0, 0.5, size=(half, 2))
    pos = rng.normal(2.0, 0.5, size=(n - half, 2))
    X = np.vstack([neg, pos])
    y = np.array([0.0] * half + [1.0] * (n - half))
    order = rng.permutation(n)
    dataset = sealed_dataset(platform, [[float(a), float(b)] for a, b in X[order]],
                             [float(v) for v in y[order]])
    spec = SplitSpec(0.6, 0.2, 0.2, seed=7)
    run, model = platform.trainer.train(
        "logistic_regression", dataset.dataset_id, spec,
        {"learning_rate": 0.5, "epochs": 400}, seed=2)
    return dataset, run, model
