"""Command-line surface: every lifecycle operation, scriptable end to end.

Exit codes: 0 success, 1 validation/usage error, 2 internal error.
`--json` switches output to machine-readable JSON documents.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .config import Config
from .errors import (
    StoreCorruptionError,
    StoreVersionError,
    ValidationError,
    XmlopsError,
)
from .platform import Platform
from .training import SplitSpec


def _platform(ctx) -> Platform:
    if ctx.obj.get("platform") is None:
        config = Config.load(ctx.obj.get("config_path"))
        if ctx.obj.get("store_path"):
            config.store_path = ctx.obj["store_path"]
        ctx.obj["platform"] = Platform(config)
    return ctx.obj["platform"]


def _emit(ctx, doc, human: str | None = None):
    if ctx.obj.get("json") or human is None:
        click.echo(json.dumps(doc, indent=2, sort_keys=True, default=str))
    else:
        click.echo(human)


def _parse_json_arg(text: str, what: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"invalid JSON for {what}: {exc}") from exc


@click.group()
@click.option("--store", "store_path", type=click.Path(), default=None,
              help="Store directory (overrides config).")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="YAML config file (default: $XMLOPS_CONFIG).")
@click.option("--json", "json_output", is_flag=True, help="Machine-readable output.")
@click.pass_context
def cli(ctx, store_path, config_path, json_output):
    """xmlops: explainable MLOps platform."""
    ctx.ensure_object(dict)
    ctx.obj.update(store_path=store_path, config_path=config_path, json=json_output)


# -- data ---------------------------------------------------------------------


@cli.command()
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), required=True)
@click.option("--equipment", default="bulk-import", help="Default equipment id.")
@click.argument("path", type=click.Path(exists=True))
@click.pass_context
def ingest(ctx, fmt, equipment, path):
    """Bulk ingest samples from a CSV or JSON file."""
    platform = _platform(ctx)
    ids = platform.admin.ingest_file(path, fmt, default_equipment=equipment)
    _emit(ctx, {"ingested": len(ids), "sample_ids": ids},
          f"ingested {len(ids)} samples")


@cli.group()
def dataset():
    """Define, seal, and preprocess datasets."""


@dataset.command("define")
@click.option("--samples", "sample_ids", multiple=True, help="Member sample ids.")
@click.option("--from-file", "from_file", type=click.Path(exists=True),
              help="File with one sample id per line.")
@click.option("--recipe", default=None, help="Recipe id to attach.")
@click.pass_context
def dataset_define(ctx, sample_ids, from_file, recipe):
    platform = _platform(ctx)
    ids = list(sample_ids)
    if from_file:
        ids += [line.strip() for line in Path(from_file).read_text().splitlines()
                if line.strip()]
    if not ids:
        raise ValidationError("no sample ids given (--samples or --from-file)")
    doc = platform.admin.define_dataset(ids, recipe).to_doc()
    _emit(ctx, doc, f"dataset {doc['dataset_id']} ({len(ids)} members, unsealed)")


@dataset.command("seal")
@click.argument("dataset_id")
@click.pass_context
def dataset_seal(ctx, dataset_id):
    doc = _platform(ctx).admin.seal_dataset(dataset_id).to_doc()
    _emit(ctx, doc, f"dataset {dataset_id} sealed")


@dataset.command("recipe")
@click.option("--steps", required=True, help="JSON list of recipe steps.")
@click.pass_context
def dataset_recipe(ctx, steps):
    doc = _platform(ctx).admin.create_recipe(
        _parse_json_arg(steps, "--steps")).to_doc()
    _emit(ctx, doc, f"recipe {doc['recipe_id']}")


@dataset.command("apply")
@click.argument("dataset_id")
@click.argument("recipe_id")
@click.pass_context
def dataset_apply(ctx, dataset_id, recipe_id):
    doc = _platform(ctx).admin.apply_recipe(dataset_id, recipe_id).to_doc()
    _emit(ctx, doc,
          f"derived dataset {doc['dataset_id']} ({len(doc['members'])} members, sealed)")


@cli.command()
@click.argument("sample_id")
@click.argument("label", type=float)
@click.option("--author", default="cli")
@click.option("--origin", type=click.Choice(["human", "system"]), default="human")
@click.pass_context
def annotate(ctx, sample_id, label, author, origin):
    """Attach a label to a sample."""
    doc = _platform(ctx).admin.attach_annotation(sample_id, label, author,
                                                 origin).to_doc()
    _emit(ctx, doc, f"annotation {doc['annotation_id']} on {sample_id}")


# -- training -------------------------------------------------------------------


@cli.command()
@click.option("--architecture", required=True,
              type=click.Choice(["linear_regression", "logistic_regression", "knn"]))
@click.option("--dataset", "dataset_id", required=True)
@click.option("--split", default="0.8,0.1,0.1", help="train,val,test fractions.")
@click.option("--split-seed", default=0, type=int)
@click.option("--seed", default=0, type=int)
@click.option("--hyperparams", default="{}", help="JSON hyperparameter map.")
@click.pass_context
def train(ctx, architecture, dataset_id, split, split_seed, seed, hyperparams):
    """Train a model, tracking the full run."""
    platform = _platform(ctx)
    try:
        fracs = [float(v) for v in split.split(",")]
        if len(fracs) != 3:
            raise ValueError("need three fractions")
    except ValueError as exc:
        raise ValidationError(f"invalid --split {split!r}: {exc}") from exc
    run, model = platform.trainer.train(
        architecture, dataset_id, SplitSpec(*fracs, seed=split_seed),
        _parse_json_arg(hyperparams, "--hyperparams"), seed)
    _emit(ctx, {"run": run.to_doc(), "model": model.to_doc()},
          f"run {run.run_id}\nmodel {model.model_id}\n"
          f"test metrics: {json.dumps(model.metrics, sort_keys=True)}")


@cli.command()
@click.argument("model_id")
@click.pass_context
def register(ctx, model_id):
    """Register a trained model (idempotent)."""
    doc = _platform(ctx).registry.register_model(model_id).to_doc()
    _emit(ctx, doc, f"model {model_id} registered (seq {doc['registry_seq']})")


@cli.group()
def explainer():
    """Register and list explainers."""


@explainer.command("register")
@click.option("--method", required=True,
              type=click.Choice(["linear_exact", "permutation_importance",
                                 "local_surrogate", "counterfactual"]))
@click.option("--kind", default="post_hoc",
              type=click.Choice(["post_hoc", "interpretable", "data"]))
@click.option("--config", "config_json", default="{}")
@click.option("--models", required=True, help="Comma-separated compatible model ids.")
@click.pass_context
def explainer_register(ctx, method, kind, config_json, models):
    doc = _platform(ctx).registry.register_explainer(
        method, kind, _parse_json_arg(config_json, "--config"),
        [m for m in models.split(",") if m]).to_doc()
    _emit(ctx, doc, f"explainer {doc['explainer_id']} ({method})")


@explainer.command("list")
@click.pass_context
def explainer_list(ctx):
    docs = [e.to_doc() for e in _platform(ctx).registry.list_explainers()]
    _emit(ctx, docs, "\n".join(f"{d['explainer_id']} {d['method']}" for d in docs)
          or "no explainers")


# -- serving -------------------------------------------------------------------


@cli.group()
def deploy():
    """Create, list, and promote deployments."""


@deploy.command("create")
@click.option("--scheme", required=True,
              type=click.Choice(["single", "shadow", "canary", "ab"]))
@click.option("--primary", required=True)
@click.option("--secondary", default=None)
@click.option("--fraction", default=None, type=float)
@click.option("--explainer", "explainer_id", default=None)
@click.option("--endpoint", default="default")
@click.option("--defer-explanations", is_flag=True)
@click.pass_context
def deploy_create(ctx, scheme, primary, secondary, fraction, explainer_id,
                  endpoint, defer_explanations):
    doc = _platform(ctx).serving.create_deployment(
        scheme, primary, secondary, fraction, explainer_id, endpoint,
        defer_explanations).to_doc()
    _emit(ctx, doc, f"deployment {doc['deployment_id']} ({scheme}, active)")


@deploy.command("promote")
@click.argument("deployment_id")
@click.pass_context
def deploy_promote(ctx, deployment_id):
    doc = _platform(ctx).serving.promote(deployment_id).to_doc()
    _emit(ctx, doc,
          f"promoted: new single deployment {doc['deployment_id']} "
          f"serving {doc['primary_model']}")


@deploy.command("list")
@click.option("--active-only", is_flag=True)
@click.pass_context
def deploy_list(ctx, active_only):
    docs = [d.to_doc() for d in _platform(ctx).serving.list_deployments(active_only)]
    _emit(ctx, docs, "\n".join(
        f"{d['deployment_id'][:12]} {d['scheme']:7s} {d['status']:8s} "
        f"endpoint={d['endpoint']}" for d in docs) or "no deployments")


@cli.command()
@click.option("--deployment", "deployment_id", required=True)
@click.option("--payload", default=None, help="JSON payload vector.")
@click.option("--key", default=None, help="Request key for routing.")
@click.option("--batch", type=click.Path(exists=True), default=None,
              help="JSON file: array of {payload, request_key}.")
@click.pass_context
def infer(ctx, deployment_id, payload, key, batch):
    """Serve one request or a batch file."""
    platform = _platform(ctx)
    if batch is not None:
        entries = _parse_json_arg(Path(batch).read_text(), "--batch file")
        results = [platform.serving.infer(deployment_id, entry["payload"],
                                          entry.get("request_key") or entry.get("key")
                                          or f"batch-{i}")
                   for i, entry in enumerate(entries)]
        _emit(ctx, results, f"served {len(results)} requests")
        return
    if payload is None:
        raise ValidationError("need --payload or --batch")
    result = platform.serving.infer(deployment_id,
                                    _parse_json_arg(payload, "--payload"),
                                    key or "cli")
    _emit(ctx, result, json.dumps(result["output"], sort_keys=True))


@cli.command()
@click.option("--model", "model_id", required=True)
@click.option("--explainer", "explainer_id", required=True)
@click.option("--payload", default=None, help="JSON payload vector.")
@click.option("--sample", "sample_id", default=None)
@click.pass_context
def explain(ctx, model_id, explainer_id, payload, sample_id):
    """Generate (or fetch) an explanation for one input."""
    doc = _platform(ctx).explain.explain(
        model_id, explainer_id,
        payload=_parse_json_arg(payload, "--payload") if payload else None,
        sample_id=sample_id).to_doc()
    _emit(ctx, doc,
          f"explanation {doc['explanation_id']}\n"
          f"attributions: {json.dumps(doc['attributions'])}\n"
          f"quality: {json.dumps(doc['quality'], sort_keys=True)}")


# -- feedback -------------------------------------------------------------------


@cli.command()
@click.option("--kind", type=click.Choice(["prediction", "data_quality", "explanation"]),
              default=None)
@click.option("--target", "target_id", default=None)
@click.option("--verdict", type=click.Choice(["accept", "reject"]), default=None)
@click.option("--corrected-label", default=None, type=float)
@click.option("--comment", default="")
@click.option("--author", default="cli")
@click.option("--batch", type=click.Path(exists=True), default=None,
              help="JSON file: array of feedback objects.")
@click.pass_context
def feedback(ctx, kind, target_id, verdict, corrected_label, comment, author, batch):
    """Submit one verdict or a batch file."""
    platform = _platform(ctx)
    if batch is not None:
        entries = _parse_json_arg(Path(batch).read_text(), "--batch file")
        docs = [platform.feedback.submit_feedback(
            entry["kind"], entry["target_id"], entry["verdict"],
            entry.get("corrected_label"), entry.get("comment", ""),
            entry.get("author", author)).to_doc() for entry in entries]
        _emit(ctx, docs, f"submitted {len(docs)} feedback records")
        return
    if not (kind and target_id and verdict):
        raise ValidationError("need --kind, --target, and --verdict (or --batch)")
    doc = platform.feedback.submit_feedback(kind, target_id, verdict,
                                            corrected_label, comment, author).to_doc()
    _emit(ctx, doc, f"feedback {doc['feedback_id']} recorded")


# -- monitoring -------------------------------------------------------------------


@cli.group()
def monitor():
    """Run monitoring checks, list alerts, consume retrain triggers."""


@monitor.command("run")
@click.option("--force-drift", is_flag=True,
              help="Evaluate drift even below the record cadence.")
@click.pass_context
def monitor_run(ctx, force_drift):
    results = _platform(ctx).run_monitor_cycle(force_drift=force_drift)
    human = []
    for deployment_id, entry in results.items():
        drift = entry["drift"]
        verdict = drift.get("verdict") if drift else "skipped"
        human.append(f"{deployment_id[:12]}: drift={verdict} "
                     f"degradation={entry['degradation']['status']} "
                     f"explainers={entry['explainers']['status']}")
    _emit(ctx, results, "\n".join(human) or "no active deployments")


@monitor.command("alerts")
@click.option("--deployment", default=None)
@click.option("--source", default=None)
@click.pass_context
def monitor_alerts(ctx, deployment, source):
    docs = [a.to_doc() for a in _platform(ctx).alerts.list_alerts(deployment, source)]
    _emit(ctx, docs, "\n".join(f"[{d['source']}] {d['fired_at']} {d['message']}"
                               for d in docs) or "no alerts")


@monitor.command("triggers")
@click.option("--deployment", default=None)
@click.pass_context
def monitor_triggers(ctx, deployment):
    docs = [t.to_doc() for t in _platform(ctx).observer.list_triggers(deployment)]
    _emit(ctx, docs, "\n".join(
        f"{d['trigger_id'][:12]} cause={d['cause']} consumed={d['consumed']}"
        for d in docs) or "no triggers")


@monitor.command("retrain")
@click.argument("trigger_id")
@click.pass_context
def monitor_retrain(ctx, trigger_id):
    result = _platform(ctx).observer.retrain(trigger_id)
    _emit(ctx, result, f"retrain: {result['status']}"
          + (f" (run {result['run_id']})" if result.get("run_id") else ""))


# -- lineage and server ------------------------------------------------------------


@cli.command()
@click.argument("entity_id")
@click.option("--format", "fmt", type=click.Choice(["dot", "json"]), default="dot")
@click.pass_context
def lineage(ctx, entity_id, fmt):
    """Resolve an entity's lineage; DOT graph by default."""
    platform = _platform(ctx)
    if fmt == "json" or ctx.obj.get("json"):
        _emit(ctx, platform.resolve_lineage(entity_id))
    else:
        click.echo(platform.lineage_dot(entity_id))


@cli.command()
@click.pass_context
def serve(ctx):
    """Run the HTTP API until interrupted."""
    from .api import serve as run_server

    config = Config.load(ctx.obj.get("config_path"))
    if ctx.obj.get("store_path"):
        config.store_path = ctx.obj["store_path"]
    run_server(config)


def entrypoint(argv=None) -> int:
    """CLI main with the documented exit-code contract."""
    try:
        cli.main(args=argv, standalone_mode=False, obj={})
        return 0
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.UsageError as exc:
        click.echo(exc.format_message(), err=True)
        if exc.ctx is not None:
            click.echo(exc.ctx.get_usage(), err=True)
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except (StoreCorruptionError, StoreVersionError) as exc:
        click.echo(f"internal error: {exc}", err=True)
        return 2
    except XmlopsError as exc:
        # validation and contract violations: caller-fixable
        click.echo(f"error: {exc}", err=True)
        return 1
    except KeyboardInterrupt:
        return 130
    except Exception as exc:  # noqa: BLE001 - the documented internal-error path
        click.echo(f"internal error: {type(exc).__name__}: {exc}", err=True)
        return 2


def main() -> None:
    sys.exit(entrypoint())


if __name__ == "__main__":
    main()
