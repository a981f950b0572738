"""Data-drift detection on a shifting production stream.

Fits a 10-quantile-bin baseline on training data, then scores a stable
window and a progressively shifting window with PSI and the two-sample KS
statistic. Run with:

    python demos/drift_demo.py
"""

import tempfile

import numpy as np

from xmlops import Config, Platform


def main():
    platform = Platform(Config(
        store_path=tempfile.mkdtemp(prefix="xmlops-drift-") + "/store"))
    rng = np.random.default_rng(11)

    sample_ids = []
    for i, value in enumerate(rng.normal(0.0, 1.0, 400)):
        record = platform.admin.ingest_sample([float(value)], {
            "equipment_id": "mill-3",
            "captured_at": f"2024-03-01T{i // 60:02d}:{i % 60:02d}:00+00:00",
        })
        sample_ids.append(record.sample_id)
    dataset = platform.admin.define_dataset(sample_ids)
    platform.admin.seal_dataset(dataset.dataset_id)

    baseline = platform.drift.fit_baseline(platform.admin, dataset.dataset_id)
    print(f"baseline {baseline.baseline_id[:12]} over {len(sample_ids)} samples")
    print(f"bin probabilities: {[round(p, 3) for p in baseline.features[0].probs]}\n")

    print(f"{'shift':>6} {'psi':>8} {'ks':>6}  verdict")
    for shift in (0.0, 0.25, 0.5, 1.0, 2.0):
        window = [[float(v)] for v in rng.normal(shift, 1.0, 500)]
        report = platform.drift.evaluate_drift(baseline, window)
        f = report.features[0]
        print(f"{shift:6.2f} {f['psi']:8.3f} {f['ks']:6.3f}  {report.verdict}")

    alerts = platform.alerts.list_alerts(source="data_drift")
    print(f"\n{len(alerts)} drift alert(s) raised; thresholds "
          f"psi > {report.thresholds['psi_alert']}, ks > {report.thresholds['ks_alert']}")


if __name__ == "__main__":
    main()
