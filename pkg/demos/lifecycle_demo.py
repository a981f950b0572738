"""End-to-end lifecycle walkthrough, in-process.

Ingest -> dataset -> train -> register -> shadow deploy -> serve ->
review feedback -> degradation trigger -> retrain -> promote, then print
the promoted model's lineage. Run with:

    python demos/lifecycle_demo.py
"""

import json
import tempfile

import numpy as np

from xmlops import Config, Platform
from xmlops.lineage import to_dot
from xmlops.training import SplitSpec


def main():
    workdir = tempfile.mkdtemp(prefix="xmlops-demo-")
    platform = Platform(Config(store_path=f"{workdir}/store"))
    print(f"store: {workdir}/store\n")

    # 1. ingest 120 sensor readings following y = 2x + 1
    rng = np.random.default_rng(7)
    sample_ids = []
    for i in range(120):
        x = float(rng.uniform(-3, 3))
        record = platform.admin.ingest_sample([x], {
            "equipment_id": "pump-7",
            "captured_at": f"2024-03-01T{i // 60:02d}:{i % 60:02d}:00+00:00",
            "sensor_config": {"sampling_hz": 100},
        })
        platform.admin.attach_annotation(record.sample_id, 2.0 * x + 1.0,
                                         author="demo", origin="system")
        sample_ids.append(record.sample_id)
    print(f"1. ingested {len(sample_ids)} labeled samples")

    # 2. immutable dataset
    dataset = platform.admin.define_dataset(sample_ids)
    platform.admin.seal_dataset(dataset.dataset_id)
    print(f"2. sealed dataset {dataset.dataset_id[:12]}")

    # 3. tracked training run
    run, model = platform.trainer.train(
        "linear_regression", dataset.dataset_id,
        SplitSpec(0.8, 0.1, 0.1, seed=1), {"ridge_lambda": 0.0}, seed=0)
    print(f"3. trained {model.model_id[:12]}, "
          f"test mse = {model.metrics['mse']:.3g}")

    # 4. register and deploy as shadow (candidate = same model here)
    platform.registry.register_model(model.model_id)
    deployment = platform.serving.create_deployment(
        "shadow", model.model_id, model.model_id)
    print(f"4. shadow deployment {deployment.deployment_id[:12]} active")

    # 5. production traffic
    served = [platform.serving.infer(deployment.deployment_id,
                                     [float(rng.uniform(-3, 3))],
                                     request_key=f"req-{i}")
              for i in range(200)]
    print(f"5. served {len(served)} requests")

    # 6. reviewers correct 40 predictions (the process drifted: labels moved)
    for result in served[:40]:
        platform.feedback.submit_feedback(
            "prediction", result["request_id"], "reject",
            corrected_label=result["output"]["value"] + 1.5, author="reviewer")
    print("6. recorded 40 corrected labels")

    # 7. monitoring notices the degradation and fires a retrain trigger
    cycle = platform.run_monitor_cycle()
    degradation = cycle[deployment.deployment_id]["degradation"]
    print(f"7. degradation check: {degradation['status']} "
          f"(rolling {degradation.get('rolling', 0):.3f})")

    # 8. consume the trigger: retrain lands as a new shadow
    trigger = platform.observer.list_triggers(deployment.deployment_id)[-1]
    outcome = platform.observer.retrain(trigger.trigger_id)
    print(f"8. retrain: {outcome['status']}, new model {outcome['model_id'][:12]} "
          f"in shadow (incumbent still serves)")

    # 9. human promotes the candidate
    promoted = platform.serving.promote(outcome["deployment_id"])
    print(f"9. promoted: single deployment {promoted.deployment_id[:12]} "
          f"now serves {promoted.primary_model[:12]}")

    # 10. the promoted model's lineage reaches the original samples
    lineage = platform.resolve_lineage(promoted.primary_model)
    reached = set(lineage["ancestors"]) & set(sample_ids)
    print(f"10. lineage of the final model reaches {len(reached)} "
          f"of the original samples")
    dot = to_dot(lineage)
    edges = [line for line in dot.splitlines() if "->" in line]
    print(f"    lineage graph: {len(lineage['nodes'])} nodes, {len(edges)} edges; "
          f"sample edge lines:")
    for line in edges[-4:]:
        print("   " + line)


if __name__ == "__main__":
    main()
