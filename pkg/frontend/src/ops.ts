/**
 * Ops screen: production oversight. Deployments table (scheme, models,
 * bound explainer), drift and rolling-performance sparklines, the alert
 * feed, and the manual actions: promote, run a monitoring cycle, and
 * consume retrain triggers.
 */

import { ApiClient, Trigger } from "./api.js";
import { el, sparkline } from "./charts.js";
import type { Alert, Deployment, DriftReport, PerformanceWindow } from "./types.js";

export class OpsScreen {
  root: HTMLElement;
  deployments: Deployment[] = [];
  alerts: Alert[] = [];
  triggers: Trigger[] = [];
  drift = new Map<string, DriftReport>();
  performance = new Map<string, PerformanceWindow>();
  private metricHistory = new Map<string, number[]>();
  actionMessage: string | null = null;

  constructor(
    private api: ApiClient,
    private doc: Document,
  ) {
    this.root = el(doc, "section", { class: "screen ops-screen" });
  }

  async refresh(): Promise<void> {
    this.deployments = await this.api.getDeployments();
    this.alerts = await this.api.getAlerts();
    this.triggers = await this.api.getTriggers();
    for (const deployment of this.deployments) {
      if (deployment.status !== "active") continue;
      const id = deployment.deployment_id;
      try {
        this.drift.set(id, await this.api.getDrift(id));
      } catch {
        /* drift needs a baseline; optional per deployment */
      }
      const perf = await this.api.getPerformance(id);
      this.performance.set(id, perf);
      const primary = this.primaryMetric(perf);
      if (primary !== null) {
        const history = this.metricHistory.get(id) ?? [];
        history.push(primary);
        this.metricHistory.set(id, history.slice(-50));
      }
    }
    this.render();
  }

  private primaryMetric(perf: PerformanceWindow): number | null {
    if (!perf.rolling) return null;
    const name = perf.task === "regression" ? "mse" : "f1";
    return perf.rolling.values[name] ?? null;
  }

  render(): void {
    this.root.replaceChildren();
    if (this.actionMessage) {
      this.root.append(
        el(this.doc, "div", { class: "banner action" }, [this.actionMessage]),
      );
    }
    this.root.append(this.deploymentsTable());
    this.root.append(this.triggersPanel());
    this.root.append(this.alertFeed());
  }

  private deploymentsTable(): HTMLElement {
    const wrap = el(this.doc, "div", { class: "deployments" });
    wrap.append(el(this.doc, "h3", {}, ["deployments"]));
    const monitor = el(this.doc, "button", { class: "run-monitor" },
                       ["run monitoring cycle"]);
    monitor.addEventListener("click", () => void this.runMonitor());
    wrap.append(monitor);

    const table = el(this.doc, "table", { class: "deployment-table" });
    const header = el(this.doc, "tr");
    for (const text of ["id", "endpoint", "scheme", "primary", "secondary",
                        "explainer", "status", "drift", "rolling", ""]) {
      header.append(el(this.doc, "th", {}, [text]));
    }
    table.append(header);
    for (const deployment of this.deployments) {
      table.append(this.deploymentRow(deployment));
    }
    wrap.append(table);
    return wrap;
  }

  private deploymentRow(deployment: Deployment): HTMLElement {
    const id = deployment.deployment_id;
    const row = el(this.doc, "tr", {
      class: `deployment ${deployment.status}`,
      "data-deployment-id": id,
    });
    row.append(el(this.doc, "td", {}, [el(this.doc, "code", {}, [id.slice(0, 12)])]));
    row.append(el(this.doc, "td", {}, [deployment.endpoint]));
    row.append(el(this.doc, "td", { class: "scheme" }, [deployment.scheme]));
    row.append(el(this.doc, "td", {}, [deployment.primary_model.slice(0, 12)]));
    row.append(el(this.doc, "td", {},
                  [deployment.secondary_model?.slice(0, 12) ?? "-"]));
    row.append(el(this.doc, "td", {},
                  [deployment.bound_explainer?.slice(0, 12) ?? "-"]));
    row.append(el(this.doc, "td", { class: "status" }, [deployment.status]));

    const driftCell = el(this.doc, "td", { class: "drift-cell" });
    const report = this.drift.get(id);
    if (report && report.features) {
      driftCell.append(
        el(this.doc, "span", { class: `verdict ${report.verdict}` },
           [report.verdict]),
      );
      driftCell.append(sparkline(this.doc, report.features.map((f) => f.psi)));
    } else {
      driftCell.append("-");
    }
    row.append(driftCell);

    const perfCell = el(this.doc, "td", { class: "perf-cell" });
    const history = this.metricHistory.get(id);
    if (history && history.length > 0) {
      perfCell.append(sparkline(this.doc, history));
      perfCell.append(
        el(this.doc, "span", { class: "rolling-value" },
           [String(history[history.length - 1])]),
      );
    } else {
      perfCell.append("-");
    }
    row.append(perfCell);

    const actionCell = el(this.doc, "td", { class: "row-actions" });
    if (deployment.status === "active" && deployment.scheme !== "single") {
      const promote = el(this.doc, "button", { class: "promote" }, ["promote"]);
      promote.addEventListener("click", () => void this.promote(id));
      actionCell.append(promote);
    }
    row.append(actionCell);
    return row;
  }

  private triggersPanel(): HTMLElement {
    const panel = el(this.doc, "div", { class: "triggers" });
    panel.append(el(this.doc, "h3", {}, ["retrain triggers"]));
    const open = this.triggers.filter((t) => !t.consumed);
    if (open.length === 0) {
      panel.append(el(this.doc, "p", {}, ["no open triggers"]));
      return panel;
    }
    const list = el(this.doc, "ul", { class: "trigger-list" });
    for (const trigger of open) {
      const item = el(this.doc, "li", { "data-trigger-id": trigger.trigger_id });
      item.append(
        el(this.doc, "span", {},
           [`${trigger.cause} on ${trigger.deployment_id.slice(0, 12)}`]),
      );
      const retrain = el(this.doc, "button", { class: "retrain" }, ["retrain"]);
      retrain.addEventListener("click", () => void this.retrain(trigger.trigger_id));
      item.append(retrain);
      list.append(item);
    }
    panel.append(list);
    return panel;
  }

  private alertFeed(): HTMLElement {
    const feed = el(this.doc, "div", { class: "alert-feed" });
    feed.append(el(this.doc, "h3", {}, [`alerts (${this.alerts.length})`]));
    const list = el(this.doc, "ul", { class: "alerts" });
    for (const alert of [...this.alerts].reverse().slice(0, 25)) {
      const item = el(this.doc, "li", { class: `alert ${alert.source}` });
      item.append(el(this.doc, "span", { class: "badge" }, [alert.source]));
      item.append(el(this.doc, "span", { class: "when" }, [alert.fired_at]));
      item.append(el(this.doc, "span", { class: "message" }, [alert.message]));
      list.append(item);
    }
    feed.append(list);
    return feed;
  }

  async promote(deploymentId: string): Promise<void> {
    try {
      const promoted = await this.api.postPromote(deploymentId);
      this.actionMessage =
        `promoted: ${promoted.deployment_id.slice(0, 12)} now serves ` +
        promoted.primary_model.slice(0, 12);
    } catch (err) {
      this.actionMessage = err instanceof Error ? err.message : String(err);
    }
    await this.refresh();
  }

  async runMonitor(): Promise<void> {
    try {
      await this.api.postMonitorRun();
      this.actionMessage = "monitoring cycle complete";
    } catch (err) {
      this.actionMessage = err instanceof Error ? err.message : String(err);
    }
    await this.refresh();
  }

  async retrain(triggerId: string): Promise<void> {
    try {
      const outcome = await this.api.postRetrain(triggerId);
      this.actionMessage = `retrain: ${String(outcome.status)}`;
    } catch (err) {
      this.actionMessage = err instanceof Error ? err.message : String(err);
    }
    await this.refresh();
  }
}
