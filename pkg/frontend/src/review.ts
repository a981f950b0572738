/**
 * Review screen: the hard-sample queue for one deployment.
 *
 * Each item shows the input, the prediction, the attribution bar chart
 * and counterfactual diff when an explanation is attached, and three
 * actions (accept / reject / correct label) that POST to /feedback.
 * Submission is optimistic: the item leaves the queue immediately and
 * comes back (with an error banner) if the POST fails. A rolling-metric
 * panel tracks the deployment's resolved-label performance.
 */

import { ApiClient, ApiError } from "./api.js";
import { attributionBarChart, counterfactualDiff, el } from "./charts.js";
import type { Explanation, PerformanceWindow, ReviewItem } from "./types.js";

export class ReviewScreen {
  root: HTMLElement;
  items: ReviewItem[] = [];
  performance: PerformanceWindow | null = null;
  offline = false;
  private explanations = new Map<string, Explanation>();

  constructor(
    private api: ApiClient,
    private doc: Document,
    public deploymentId: string,
    private author = "reviewer",
  ) {
    this.root = el(doc, "section", { class: "screen review-screen" });
  }

  async refresh(): Promise<void> {
    try {
      const [items, performance] = await Promise.all([
        this.api.getReviewQueue(this.deploymentId),
        this.api.getPerformance(this.deploymentId),
      ]);
      this.items = items;
      this.performance = performance;
      for (const item of items) {
        if (item.explanation && !this.explanations.has(item.explanation)) {
          this.explanations.set(
            item.explanation,
            await this.api.getExplanation(item.explanation),
          );
        }
      }
      this.offline = false;
    } catch (err) {
      if (err instanceof ApiError && err.status === 0) {
        this.offline = true;
      } else {
        throw err;
      }
    }
    this.render();
  }

  render(): void {
    this.root.replaceChildren();
    if (this.offline) {
      this.root.append(
        el(this.doc, "div", { class: "banner offline" },
           ["server unreachable; retrying on the next poll"]),
      );
    }
    this.root.append(this.metricPanel());
    if (this.items.length === 0 && !this.offline) {
      this.root.append(
        el(this.doc, "p", { class: "empty-state" }, ["all reviewed"]),
      );
      return;
    }
    const list = el(this.doc, "ul", { class: "queue" });
    for (const item of this.items) {
      list.append(this.renderItem(item));
    }
    this.root.append(list);
  }

  private metricPanel(): HTMLElement {
    const panel = el(this.doc, "div", { class: "metric-panel" });
    panel.append(el(this.doc, "h3", {}, ["rolling performance"]));
    if (!this.performance || this.performance.rolling === null) {
      panel.append(el(this.doc, "p", {}, ["no resolved labels yet"]));
      return panel;
    }
    panel.append(
      el(this.doc, "p", { class: "resolved-count" },
         [`${this.performance.resolved} resolved labels`]),
    );
    const dl = el(this.doc, "dl", { class: "metric-values" });
    for (const [name, value] of Object.entries(this.performance.rolling.values)) {
      dl.append(el(this.doc, "dt", {}, [name]));
      dl.append(
        el(this.doc, "dd", { "data-metric": name },
           [value === null ? "n/a" : String(value)]),
      );
    }
    panel.append(dl);
    return panel;
  }

  private renderItem(item: ReviewItem): HTMLElement {
    const li = el(this.doc, "li", {
      class: "review-item",
      "data-request-id": item.request_id,
    });
    li.append(
      el(this.doc, "div", { class: "item-head" }, [
        el(this.doc, "code", {}, [item.request_id.slice(0, 12)]),
        el(this.doc, "span", { class: "uncertainty" },
           [`uncertainty ${String(item.uncertainty)}`]),
      ]),
    );
    li.append(
      el(this.doc, "p", { class: "input-vector" },
         [`input: [${item.input.map(String).join(", ")}]`]),
    );
    const output =
      item.output.class !== undefined
        ? `class ${String(item.output.class)} (p=${String(item.output.probability)})`
        : `value ${String(item.output.value)}`;
    li.append(el(this.doc, "p", { class: "prediction" }, [`prediction: ${output}`]));

    const explanation = item.explanation
      ? this.explanations.get(item.explanation)
      : undefined;
    if (explanation) {
      li.append(attributionBarChart(this.doc, explanation.attributions));
      if (explanation.counterfactual?.found && explanation.counterfactual.payload) {
        li.append(
          counterfactualDiff(this.doc, explanation.input,
                             explanation.counterfactual.payload),
        );
      }
    }

    const actions = el(this.doc, "div", { class: "actions" });
    const accept = el(this.doc, "button", { class: "accept" }, ["accept"]);
    accept.addEventListener("click", () => void this.accept(item));
    const reject = el(this.doc, "button", { class: "reject" }, ["reject"]);
    reject.addEventListener("click", () => void this.reject(item, null));
    const labelInput = el(this.doc, "input", {
      class: "corrected-label",
      type: "number",
      placeholder: "corrected label",
    });
    const correct = el(this.doc, "button", { class: "correct" }, ["correct label"]);
    correct.addEventListener("click", () => {
      const value = Number.parseFloat(labelInput.value);
      if (Number.isNaN(value)) {
        this.showError(li, "corrected label must be a number");
        return;
      }
      void this.reject(item, value);
    });
    actions.append(accept, reject, labelInput, correct);
    li.append(actions);
    return li;
  }

  async accept(item: ReviewItem): Promise<void> {
    await this.submit(item, "accept", null);
  }

  async reject(item: ReviewItem, correctedLabel: number | null): Promise<void> {
    await this.submit(item, "reject", correctedLabel);
  }

  private async submit(
    item: ReviewItem,
    verdict: "accept" | "reject",
    correctedLabel: number | null,
  ): Promise<void> {
    const snapshot = [...this.items];
    this.items = this.items.filter((i) => i.request_id !== item.request_id);
    this.render();
    try {
      await this.api.postFeedback({
        kind: "prediction",
        target_id: item.request_id,
        verdict,
        corrected_label: correctedLabel,
        comment: "",
        author: this.author,
      });
      this.performance = await this.api.getPerformance(this.deploymentId);
      this.render();
    } catch (err) {
      this.items = snapshot; // rollback the optimistic removal
      this.render();
      this.showError(this.root, err instanceof Error ? err.message : String(err));
    }
  }

  private showError(into: HTMLElement, message: string): void {
    into.prepend(el(this.doc, "div", { class: "banner error" }, [message]));
  }
}
