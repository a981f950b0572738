from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import sealed_dataset
from oracles import oracle_ks, oracle_psi
from xmlops.drift import ks_two_sample, psi_from_probs
from xmlops.errors import ValidationError

# pinned Monte-Carlo seeds; expected ranges measured before build:
# stable-window PSI max 0.0427, shifted-window PSI min 0.838 over these seeds
MC_SEEDS = list(range(2401, 2411))


def normal_dataset(platform, n=100, seed=0, mean=0.0):
    rng = np.random.default_rng(seed)
    return sealed_dataset(platform, [[float(v)] for v in rng.normal(mean, 1.0, n)])


class TestBaseline:
    def test_quantile_bins_hold_a_tenth_each(self, platform):
        dataset = normal_dataset(platform, n=100, seed=1)
        baseline = platform.drift.fit_baseline(platform.admin, dataset.dataset_id)
        probs = baseline.features[0].probs
        assert len(probs) == 10
        assert sum(probs) == pytest.approx(1.0, abs=1e-9)
        assert all(abs(p - 0.1) <= 0.02 for p in probs)  # discreteness slack

    def test_too_few_samples_rejected(self, platform):
        dataset = sealed_dataset(platform, [[float(i)] for i in range(19)])
        with pytest.raises(ValidationError, match=">= 20"):
            platform.drift.fit_baseline(platform.admin, dataset.dataset_id)

    def test_unsealed_dataset_rejected(self, platform):
        from conftest import ingest_samples

        ids = ingest_samples(platform, [[float(i)] for i in range(25)])
        dataset = platform.admin.define_dataset(ids)
        with pytest.raises(ValidationError, match="sealed"):
            platform.drift.fit_baseline(platform.admin, dataset.dataset_id)

    def test_constant_feature_degenerate_bin_flagged(self, platform):
        dataset = sealed_dataset(platform, [[5.0]] * 25)
        baseline = platform.drift.fit_baseline(platform.admin, dataset.dataset_id)
        bins = baseline.features[0]
        assert bins.degenerate
        assert bins.probs == [1.0]


class TestPsi:
    def test_window_from_baseline_distribution_is_small(self, platform):
        rng = np.random.default_rng(7)
        dataset = sealed_dataset(platform,
                                 [[float(v)] for v in rng.normal(0, 1, 1000)])
        baseline = platform.drift.fit_baseline(platform.admin, dataset.dataset_id)
        window = [[float(v)] for v in rng.normal(0, 1, 1000)]
        assert platform.drift.psi(baseline, window)[0] < 0.05

    def test_single_sample_window_is_finite(self, platform):
        dataset = normal_dataset(platform, n=50, seed=3)
        baseline = platform.drift.fit_baseline(platform.admin, dataset.dataset_id)
        value = platform.drift.psi(baseline, [[0.0]])[0]
        assert np.isfinite(value) and value >= 0.0

    def test_matches_hand_oracle_on_probs(self):
        p = [0.5, 0.3, 0.2]
        q = [0.2, 0.3, 0.5]
        assert psi_from_probs(p, q) == pytest.approx(oracle_psi(p, q), rel=1e-12)

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.floats(0.0, 1.0), min_size=2, max_size=12),
           st.lists(st.floats(0.0, 1.0), min_size=2, max_size=12))
    def test_symmetric_and_nonnegative(self, p, q):
        size = min(len(p), len(q))
        p, q = p[:size], q[:size]
        forward = psi_from_probs(p, q)
        assert forward >= 0.0
        assert forward == pytest.approx(psi_from_probs(q, p), rel=1e-9, abs=1e-12)


class TestKs:
    def test_identical_samples_zero(self):
        assert ks_two_sample([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == 0.0

    def test_disjoint_supports_one(self):
        assert ks_two_sample([1.0, 2.0], [10.0, 11.0]) == 1.0

    def test_hand_enumerated_example(self):
        # ECDFs: base jumps at 1,2,3,4; window at 3,4,5,6; sup gap = 0.5
        assert ks_two_sample([1, 2, 3, 4], [3, 4, 5, 6]) == pytest.approx(0.5)

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(11)
        a = rng.normal(0, 1, 40)
        b = rng.normal(0.5, 1.3, 55)
        assert ks_two_sample(a, b) == pytest.approx(oracle_ks(a, b), abs=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.integers(-5000, 5000), min_size=2, max_size=30),
           st.lists(st.integers(-5000, 5000), min_size=2, max_size=30))
    def test_invariant_under_strictly_monotone_transforms(self, a, b):
        # grid-spaced values keep exp() injective in float64
        a = [v / 100.0 for v in a]
        b = [v / 100.0 for v in b]
        base = ks_two_sample(a, b)
        affine = ks_two_sample([3.0 * v + 2.0 for v in a], [3.0 * v + 2.0 for v in b])
        expmap = ks_two_sample(np.exp(np.asarray(a) / 50.0),
                               np.exp(np.asarray(b) / 50.0))
        assert affine == pytest.approx(base, abs=1e-12)
        assert expmap == pytest.approx(base, abs=1e-12)


class TestEvaluateDrift:
    def test_stable_window_no_alert(self, platform):
        rng = np.random.default_rng(21)
        dataset = sealed_dataset(platform,
                                 [[float(v)] for v in rng.normal(0, 1, 500)])
        baseline = platform.drift.fit_baseline(platform.admin, dataset.dataset_id)
        report = platform.drift.evaluate_drift(
            baseline, [[float(v)] for v in rng.normal(0, 1, 500)])
        assert report.verdict == "stable"
        assert report.alert_id is None
        assert platform.alerts.list_alerts() == []

    def test_shifted_window_drifts_with_exactly_one_alert(self, platform):
        rng = np.random.default_rng(22)
        dataset = sealed_dataset(platform,
                                 [[float(v)] for v in rng.normal(0, 1, 1000)])
        baseline = platform.drift.fit_baseline(platform.admin, dataset.dataset_id)
        report = platform.drift.evaluate_drift(
            baseline, [[float(v)] for v in rng.normal(1, 1, 1000)])
        assert report.verdict == "drifting"
        assert report.features[0]["psi"] > 0.25
        alerts = platform.alerts.list_alerts(source="data_drift")
        assert len(alerts) == 1
        assert alerts[0].alert_id == report.alert_id

    def test_infinite_thresholds_always_stable(self, platform):
        rng = np.random.default_rng(23)
        dataset = sealed_dataset(platform,
                                 [[float(v)] for v in rng.normal(0, 1, 200)])
        baseline = platform.drift.fit_baseline(platform.admin, dataset.dataset_id)
        report = platform.drift.evaluate_drift(
            baseline, [[float(v)] for v in rng.normal(50, 1, 200)],
            thresholds={"psi_alert": float("inf"), "ks_alert": float("inf")})
        assert report.verdict == "stable"

    def test_dimension_mismatch_propagates(self, platform):
        dataset = normal_dataset(platform, n=30, seed=4)
        baseline = platform.drift.fit_baseline(platform.admin, dataset.dataset_id)
        with pytest.raises(ValidationError, match="dimension mismatch"):
            platform.drift.evaluate_drift(baseline, [[1.0, 2.0]])

    def test_monte_carlo_pinned_seeds(self, platform):
        for seed in MC_SEEDS:
            rng = np.random.default_rng(seed)
            dataset = sealed_dataset(
                platform, [[float(v)] for v in rng.normal(0, 1, 1000)])
            baseline = platform.drift.fit_baseline(platform.admin, dataset.dataset_id)
            stable = platform.drift.psi(baseline,
                                        [[float(v)] for v in rng.normal(0, 1, 1000)])
            shifted = platform.drift.psi(baseline,
                                         [[float(v)] for v in rng.normal(1, 1, 1000)])
            assert stable[0] < 0.05, f"seed {seed}: stable PSI {stable[0]}"
            assert shifted[0] > 0.25, f"seed {seed}: shifted PSI {shifted[0]}"
