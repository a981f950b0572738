/**
 * Application shell: schema gate, tab navigation, 2-second polling of the
 * active screen. If the server's schema version does not match this
 * build, the app renders a blocking error state and nothing else.
 */

import { ApiClient, ApiError } from "./api.js";
import { el } from "./charts.js";
import { CompareScreen } from "./compare.js";
import { OpsScreen } from "./ops.js";
import { ReviewScreen } from "./review.js";
import { schemaMismatch } from "./types.js";

export const POLL_INTERVAL_MS = 2000;

type ScreenName = "review" | "compare" | "ops";

export class App {
  review: ReviewScreen | null = null;
  compare: CompareScreen;
  ops: OpsScreen;
  active: ScreenName = "ops";
  blocked: string | null = null;
  private timer: ReturnType<typeof setInterval> | null = null;
  private content: HTMLElement;

  constructor(
    private root: HTMLElement,
    private api: ApiClient,
    private doc: Document,
  ) {
    this.compare = new CompareScreen(api, doc);
    this.ops = new OpsScreen(api, doc);
    this.content = el(doc, "main", { class: "content" });
  }

  /** Gate on the server schema, then start polling. */
  async boot(): Promise<void> {
    try {
      const schema = await this.api.getSchema();
      this.blocked = schemaMismatch(schema);
    } catch (err) {
      this.blocked =
        err instanceof ApiError && err.status === 0
          ? `cannot reach server: ${err.detail}`
          : `schema fetch failed: ${String(err)}`;
    }
    if (this.blocked !== null) {
      this.renderBlocked();
      return;
    }
    this.renderShell();
    await this.showScreen(this.active);
    this.timer = setInterval(() => void this.poll(), POLL_INTERVAL_MS);
  }

  stop(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }

  async poll(): Promise<void> {
    try {
      await this.currentScreen()?.refresh();
    } catch {
      /* next poll retries; screens render their own offline banners */
    }
  }

  async showScreen(name: ScreenName, deploymentId?: string): Promise<void> {
    this.active = name;
    if (name === "review") {
      const target = deploymentId ?? (await this.defaultDeployment());
      if (target === null) {
        this.content.replaceChildren(
          el(this.doc, "p", { class: "empty-state" },
             ["no active deployment to review"]),
        );
        return;
      }
      if (this.review === null || this.review.deploymentId !== target) {
        this.review = new ReviewScreen(this.api, this.doc, target);
      }
    }
    const screen = this.currentScreen();
    if (screen) {
      this.content.replaceChildren(screen.root);
      await screen.refresh();
    }
  }

  private currentScreen(): { root: HTMLElement; refresh(): Promise<void> } | null {
    switch (this.active) {
      case "review":
        return this.review;
      case "compare":
        return this.compare;
      case "ops":
        return this.ops;
    }
  }

  private async defaultDeployment(): Promise<string | null> {
    const deployments = await this.api.getDeployments();
    const active = deployments.filter((d) => d.status === "active");
    return active.length > 0 ? active[active.length - 1].deployment_id : null;
  }

  private renderShell(): void {
    this.root.replaceChildren();
    const nav = el(this.doc, "nav", { class: "tabs" });
    for (const name of ["review", "compare", "ops"] as const) {
      const tab = el(this.doc, "button", { class: `tab tab-${name}` }, [name]);
      tab.addEventListener("click", () => void this.showScreen(name));
      nav.append(tab);
    }
    this.root.append(el(this.doc, "header", {}, [
      el(this.doc, "h1", {}, ["model review"]),
      nav,
    ]));
    this.root.append(this.content);
  }

  private renderBlocked(): void {
    this.root.replaceChildren(
      el(this.doc, "div", { class: "blocking-error" }, [
        el(this.doc, "h1", {}, ["cannot render"]),
        el(this.doc, "p", { class: "reason" }, [this.blocked ?? "unknown"]),
        el(this.doc, "p", {}, [
          "the server and this dashboard build disagree; refresh after upgrading",
        ]),
      ]),
    );
  }
}
