/**
 * Thin typed client over the platform's JSON API. The UI touches the
 * server exclusively through this module; nothing here reshapes numbers,
 * so everything rendered is exactly what the server sent.
 */

import type {
  Alert,
  Deployment,
  DriftReport,
  Explanation,
  FeedbackSubmission,
  PerformanceWindow,
  ReviewItem,
  SchemaDocument,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

/**
 * Canonical serialization of a feedback action. Field order is fixed so
 * the POST body is byte-for-byte reproducible (and testable against the
 * server's feedback_submission schema).
 */
export function serializeFeedback(body: FeedbackSubmission): string {
  return JSON.stringify({
    kind: body.kind,
    target_id: body.target_id,
    verdict: body.verdict,
    corrected_label: body.corrected_label,
    comment: body.comment,
    author: body.author,
  });
}

export class ApiClient {
  constructor(
    private baseUrl: string = "",
    private fetchFn: typeof fetch = globalThis.fetch.bind(globalThis),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchFn(this.baseUrl + path, init);
    } catch (err) {
      throw new ApiError(0, `network unreachable: ${String(err)}`);
    }
    const text = await response.text();
    if (!response.ok) {
      let detail = text;
      try {
        detail = (JSON.parse(text) as { detail?: string }).detail ?? text;
      } catch {
        /* non-JSON error body */
      }
      throw new ApiError(response.status, detail);
    }
    return JSON.parse(text) as T;
  }

  private post<T>(path: string, body: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: typeof body === "string" ? body : JSON.stringify(body),
    });
  }

  getSchema(): Promise<SchemaDocument> {
    return this.request("/schema");
  }

  getReviewQueue(deploymentId: string, limit = 20): Promise<ReviewItem[]> {
    return this.request(
      `/review-queue?deployment=${encodeURIComponent(deploymentId)}&limit=${limit}`,
    );
  }

  getExplanation(explanationId: string): Promise<Explanation> {
    return this.request(`/explanations/${encodeURIComponent(explanationId)}`);
  }

  postFeedback(body: FeedbackSubmission): Promise<Record<string, unknown>> {
    return this.post("/feedback", serializeFeedback(body));
  }

  postCompare(
    payloads: number[][],
    entries: { model_id?: string; explainer_id?: string }[],
  ): Promise<CompareResult> {
    return this.post("/compare", { payloads, entries });
  }

  getDeployments(): Promise<Deployment[]> {
    return this.request("/deployments");
  }

  getAlerts(): Promise<Alert[]> {
    return this.request("/alerts");
  }

  getDrift(deploymentId: string): Promise<DriftReport> {
    return this.request(`/deployments/${encodeURIComponent(deploymentId)}/drift`);
  }

  getPerformance(deploymentId: string): Promise<PerformanceWindow> {
    return this.request(
      `/deployments/${encodeURIComponent(deploymentId)}/performance`,
    );
  }

  postPromote(deploymentId: string): Promise<Deployment> {
    return this.post(`/deployments/${encodeURIComponent(deploymentId)}/promote`, {});
  }

  postMonitorRun(): Promise<Record<string, unknown>> {
    return this.post("/monitor/run", {});
  }

  getTriggers(): Promise<Trigger[]> {
    return this.request("/triggers");
  }

  postRetrain(triggerId: string): Promise<Record<string, unknown>> {
    return this.post(`/triggers/${encodeURIComponent(triggerId)}/retrain`, {});
  }
}

export interface Trigger {
  trigger_id: string;
  cause: string;
  deployment_id: string;
  fired_at: string;
  consumed: boolean;
  resulting_run: string | null;
  outcome: string | null;
}

export interface CompareResult {
  payloads: number[][];
  entries: {
    model_id: string;
    explainer_id: string | null;
    cells: {
      output: { value?: number; class?: number; probability?: number };
      attributions?: number[];
      quality?: Record<string, number>;
      explanation_id?: string;
    }[];
  }[];
}
