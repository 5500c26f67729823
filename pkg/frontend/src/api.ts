// Typed client for the session service. Every number shown in the UI
// originates from one of these responses.

import type {
  MenuEntry,
  PreferenceAck,
  QueryView,
  SessionState,
  SessionSummary,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    message: string,
    readonly status: number,
    readonly phase: string | null = null,
  ) {
    super(message);
  }

  get isPhaseConflict(): boolean {
    return this.status === 409;
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ServiceClient {
  constructor(
    readonly base: string = "",
    private readonly fetchFn: FetchLike = (...args) => globalThis.fetch(...args),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchFn(this.base + path, {
      headers: { "content-type": "application/json" },
      ...init,
    });
    let body: unknown = null;
    try {
      body = await resp.json();
    } catch {
      body = null;
    }
    if (!resp.ok) {
      const err = (body ?? {}) as { error?: string; detail?: unknown; phase?: string };
      const message =
        err.error ?? (typeof err.detail === "string" ? err.detail : resp.statusText);
      throw new ApiError(message || `request failed (${resp.status})`, resp.status, err.phase ?? null);
    }
    return body as T;
  }

  listSessions(): Promise<SessionSummary[]> {
    return this.request("/sessions");
  }

  createSession(config: Record<string, unknown>): Promise<{ id: string; state: SessionState }> {
    return this.request("/sessions", {
      method: "POST",
      body: JSON.stringify({ config, evaluator: { kind: "builtin" } }),
    });
  }

  getState(id: string): Promise<SessionState> {
    return this.request(`/sessions/${id}`);
  }

  getQuery(id: string): Promise<QueryView> {
    return this.request(`/sessions/${id}/query`);
  }

  submitPreference(id: string, m: number, a: -1 | 0 | 1): Promise<PreferenceAck> {
    return this.request(`/sessions/${id}/response`, {
      method: "POST",
      body: JSON.stringify({ m, a }),
    });
  }

  getMenu(id: string): Promise<MenuEntry[]> {
    return this.request(`/sessions/${id}/menu`);
  }
}
