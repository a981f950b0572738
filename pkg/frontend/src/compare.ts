/**
 * Compare screen: the same data through multiple explainers/models, or
 * multiple payloads through one model, rendered as aligned panes.
 * Selections that the server rejects (dimension mismatch, unknown ids)
 * surface as inline validation, never a blank screen.
 */

import { ApiClient, ApiError, CompareResult } from "./api.js";
import { attributionBarChart, el } from "./charts.js";

export class CompareScreen {
  root: HTMLElement;
  result: CompareResult | null = null;
  validationMessage: string | null = null;

  constructor(
    private api: ApiClient,
    private doc: Document,
  ) {
    this.root = el(doc, "section", { class: "screen compare-screen" });
    this.render();
  }

  async compare(
    payloads: number[][],
    entries: { model_id?: string; explainer_id?: string }[],
  ): Promise<void> {
    try {
      this.result = await this.api.postCompare(payloads, entries);
      this.validationMessage = null;
    } catch (err) {
      this.result = null;
      this.validationMessage =
        err instanceof ApiError ? err.detail : String(err);
    }
    this.render();
  }

  async refresh(): Promise<void> {
    // comparison is demand-driven; polling keeps the last result on screen
    this.render();
  }

  render(): void {
    this.root.replaceChildren();
    this.root.append(this.form());
    if (this.validationMessage) {
      this.root.append(
        el(this.doc, "div", { class: "banner validation" },
           [this.validationMessage]),
      );
    }
    if (!this.result) {
      return;
    }
    const panes = el(this.doc, "div", { class: "compare-panes" });
    for (const entry of this.result.entries) {
      const pane = el(this.doc, "div", { class: "compare-pane" });
      pane.append(
        el(this.doc, "h3", {}, [
          entry.explainer_id
            ? `explainer ${entry.explainer_id.slice(0, 12)}`
            : `model ${entry.model_id.slice(0, 12)}`,
        ]),
      );
      entry.cells.forEach((cell, i) => {
        const card = el(this.doc, "div", { class: "compare-cell" });
        const output =
          cell.output.class !== undefined
            ? `class ${String(cell.output.class)} (p=${String(cell.output.probability)})`
            : `value ${String(cell.output.value)}`;
        card.append(
          el(this.doc, "p", { class: "cell-output" },
             [`payload ${i}: ${output}`]),
        );
        if (cell.attributions) {
          card.append(attributionBarChart(this.doc, cell.attributions));
        }
        pane.append(card);
      });
      panes.append(pane);
    }
    this.root.append(panes);
  }

  private form(): HTMLElement {
    const form = el(this.doc, "form", { class: "compare-form" });
    const payloads = el(this.doc, "input", {
      class: "payloads-input",
      placeholder: '[[1.0, 2.0]]',
    });
    const entries = el(this.doc, "input", {
      class: "entries-input",
      placeholder: '[{"explainer_id": "..."}]',
    });
    const go = el(this.doc, "button", { type: "submit" }, ["compare"]);
    form.append(payloads, entries, go);
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      let parsedPayloads: number[][];
      let parsedEntries: { model_id?: string; explainer_id?: string }[];
      try {
        parsedPayloads = JSON.parse(payloads.value);
        parsedEntries = JSON.parse(entries.value);
      } catch (err) {
        this.validationMessage = `invalid JSON: ${String(err)}`;
        this.render();
        return;
      }
      void this.compare(parsedPayloads, parsedEntries);
    });
    return form;
  }
}
