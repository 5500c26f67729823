// JSON shapes served by the session API.

export type Phase =
  | "initializing"
  | "awaiting_preference"
  | "optimizing"
  | "evaluating"
  | "menu_ready";

export interface DesignView {
  index: number;
  x: number[];
  y: number[];
}

export interface QueryView {
  m: number;
  left: DesignView;
  right: DesignView;
  attribute_labels: string[] | null;
}

export interface EvaluationView {
  n: number;
  x: number[];
  y: number[];
  acq_value: number | null;
}

export interface PreferenceView {
  m: number;
  i: number;
  j: number;
  a: number;
}

export interface PosteriorSummary {
  mean: number[];
  q05: number[];
  q25: number[];
  q50: number[];
  q75: number[];
  q95: number[];
  source: string;
  fallback: boolean;
  acceptance_rate: number;
  num_records?: number;
}

export interface MenuEntry {
  index: number;
  x: number[];
  y: number[];
}

export interface SessionState {
  id: string;
  phase: Phase;
  config: Record<string, unknown>;
  evaluator: { kind: string };
  init_count: number;
  iterations_total: number;
  iterations_done: number;
  evaluations: EvaluationView[];
  preferences: PreferenceView[];
  posterior: PosteriorSummary | null;
  pending_query: QueryView | null;
  pending_evaluation: { n: number; x: number[] } | null;
  menu: MenuEntry[];
  attribute_labels: string[] | null;
  last_error: string | null;
  seq: number;
}

export interface SessionSummary {
  id: string;
  phase: Phase;
  iterations_done: number;
  iterations_total: number;
  num_evaluations: number;
}

export interface PreferenceAck {
  accepted: boolean;
  m: number;
  phase: Phase;
  posterior: PosteriorSummary | null;
}

/** Stable key-sorted serialization, for mirroring checks and caching. */
export function canonicalJson(value: unknown): string {
  const normalize = (v: unknown): unknown => {
    if (Array.isArray(v)) return v.map(normalize);
    if (v !== null && typeof v === "object") {
      const out: Record<string, unknown> = {};
      for (const k of Object.keys(v as Record<string, unknown>).sort()) {
        out[k] = normalize((v as Record<string, unknown>)[k]);
      }
      return out;
    }
    return v;
  };
  return JSON.stringify(normalize(value));
}
