/**
 * Client-side view models mirroring the server's wire schemas, plus the
 * validator used to refuse rendering when the server's schema version or
 * payload shapes do not match what this build was compiled against.
 */

export const UI_SCHEMA_VERSION = "1";

export interface SchemaDocument {
  schema_version: string;
  schemas: Record<string, JsonSchema>;
}

export interface JsonSchema {
  type: string | string[];
  required?: string[];
  properties?: Record<string, JsonSchema>;
  items?: JsonSchema;
  enum?: unknown[];
  minimum?: number;
  maximum?: number;
}

export interface ReviewItem {
  request_id: string;
  deployment_id: string;
  input: number[];
  output: { value?: number; class?: number; probability?: number };
  explanation: string | null;
  uncertainty: number;
  resolved: boolean;
  created_at: string;
}

export interface Explanation {
  explanation_id: string;
  explainer: string;
  model: string;
  input: number[];
  baseline: number[];
  attributions: number[];
  quality: Record<string, number>;
  surrogate: { weights: number[]; intercept: number; fidelity_r2: number | null } | null;
  counterfactual: {
    found: boolean;
    payload: number[] | null;
    distance_l1: number | null;
    predicted_class: number | null;
  } | null;
  created_at: string;
}

export interface Deployment {
  deployment_id: string;
  endpoint: string;
  scheme: "single" | "shadow" | "canary" | "ab";
  primary_model: string;
  secondary_model: string | null;
  traffic_fraction: number | null;
  bound_explainer: string | null;
  status: "active" | "retired";
  created_at: string;
}

export interface Alert {
  alert_id: string;
  source: "data_drift" | "performance" | "explainer";
  deployment_id: string | null;
  metric: string | null;
  message: string;
  details: Record<string, unknown>;
  fired_at: string;
}

export interface DriftReport {
  baseline_id: string;
  deployment_id: string | null;
  features: { psi: number; ks: number }[];
  window: string[];
  verdict: "stable" | "drifting" | "no_data";
  thresholds: Record<string, number | null>;
  created_at: string;
}

export interface MetricReport {
  values: Record<string, number | null>;
  reasons: Record<string, string>;
  split: string | null;
  tau: number;
}

export interface PerformanceWindow {
  deployment_id: string;
  task: string;
  resolved: number;
  window_capacity: number;
  rolling: MetricReport | null;
  reference: Record<string, number | null>;
}

export interface FeedbackSubmission {
  kind: "prediction" | "data_quality" | "explanation";
  target_id: string;
  verdict: "accept" | "reject";
  corrected_label: number | null;
  comment: string;
  author: string;
}

/** Minimal checker for the JSON-schema subset the server publishes. */
export function validateAgainstSchema(
  value: unknown,
  schema: JsonSchema,
  path = "$",
): string[] {
  const problems: string[] = [];
  const types = Array.isArray(schema.type) ? schema.type : [schema.type];

  const actual =
    value === null ? "null" : Array.isArray(value) ? "array" : typeof value;
  const matches = types.some((t) =>
    t === "number" ? actual === "number" : t === actual,
  );
  if (!matches) {
    problems.push(`${path}: expected ${types.join("|")}, got ${actual}`);
    return problems;
  }
  if (schema.enum && !schema.enum.includes(value)) {
    problems.push(`${path}: ${JSON.stringify(value)} not in ${JSON.stringify(schema.enum)}`);
  }
  if (actual === "number") {
    const n = value as number;
    if (schema.minimum !== undefined && n < schema.minimum) {
      problems.push(`${path}: ${n} < minimum ${schema.minimum}`);
    }
    if (schema.maximum !== undefined && n > schema.maximum) {
      problems.push(`${path}: ${n} > maximum ${schema.maximum}`);
    }
  }
  if (actual === "object") {
    const record = value as Record<string, unknown>;
    for (const key of schema.required ?? []) {
      if (!(key in record)) problems.push(`${path}: missing required ${key}`);
    }
    for (const [key, sub] of Object.entries(schema.properties ?? {})) {
      if (key in record) {
        problems.push(...validateAgainstSchema(record[key], sub, `${path}.${key}`));
      }
    }
  }
  if (actual === "array" && schema.items) {
    (value as unknown[]).forEach((item, i) => {
      problems.push(...validateAgainstSchema(item, schema.items!, `${path}[${i}]`));
    });
  }
  return problems;
}

/** Schema gate: null when compatible, otherwise the blocking reason. */
export function schemaMismatch(doc: SchemaDocument): string | null {
  if (doc.schema_version !== UI_SCHEMA_VERSION) {
    return (
      `server schema version ${doc.schema_version} does not match ` +
      `UI build ${UI_SCHEMA_VERSION}; refusing to render`
    );
  }
  for (const name of ["review_item", "explanation", "deployment", "alert",
                      "drift_report", "metric_report", "feedback_submission"]) {
    if (!(name in doc.schemas)) {
      return `server schema is missing ${name}; refusing to render`;
    }
  }
  return null;
}
