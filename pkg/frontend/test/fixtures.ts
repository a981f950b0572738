/** Load recorded server responses and build an ApiClient stubbed on them. */

import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import { ApiClient } from "../src/api.js";

const here = dirname(fileURLToPath(import.meta.url));

export function fixtureText(name: string): string {
  return readFileSync(join(here, "fixtures", name), "utf-8");
}

export function fixture<T>(name: string): T {
  return JSON.parse(fixtureText(name)) as T;
}

export const manifest = fixture<{
  deployment_id: string;
  model_id: string;
  explainer_id: string;
  trigger_id: string;
  unresolved_request_ids: string[];
  explanation_ids: string[];
}>("manifest.json");

export interface RecordedCall {
  path: string;
  method: string;
  body: string | null;
}

/**
 * ApiClient whose fetch serves the recorded fixtures. POSTs are recorded
 * for byte-level assertions and answered with a generic success document.
 */
export function fixtureClient(overrides: Record<string, string> = {}): {
  api: ApiClient;
  calls: RecordedCall[];
} {
  const calls: RecordedCall[] = [];
  const routes: [RegExp, string][] = [
    [/^\/schema$/, "schema.json"],
    [/^\/review-queue\?/, "review_queue.json"],
    [/^\/deployments\/[^/]+\/drift$/, "drift.json"],
    [/^\/deployments\/[^/]+\/performance$/, "performance.json"],
    [/^\/deployments$/, "deployments.json"],
    [/^\/alerts$/, "alerts.json"],
    [/^\/triggers$/, "triggers.json"],
    [/^\/explanations\//, "explanation.json"],
    [/^\/compare$/, "compare.json"],
  ];
  const fetchFn = (async (input: RequestInfo | URL, init?: RequestInit) => {
    const path = String(input);
    const method = init?.method ?? "GET";
    calls.push({ path, method, body: (init?.body as string) ?? null });
    if (path in overrides) {
      return new Response(overrides[path], { status: 200 });
    }
    if (method === "POST" && path === "/compare") {
      return new Response(fixtureText("compare.json"), { status: 200 });
    }
    if (method === "POST") {
      return new Response(JSON.stringify({ ok: true, status: "accepted" }),
                          { status: 201 });
    }
    for (const [pattern, file] of routes) {
      if (pattern.test(path)) {
        return new Response(fixtureText(file), { status: 200 });
      }
    }
    return new Response(JSON.stringify({ detail: `no fixture for ${path}` }),
                        { status: 404 });
  }) as typeof fetch;
  return { api: new ApiClient("", fetchFn), calls };
}
