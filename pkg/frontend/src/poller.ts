// Session state polling with a configurable minimum interval and
// subscriber notification only on actual state changes.

import type { ServiceClient } from "./api.js";
import type { SessionState } from "./types.js";
import { canonicalJson } from "./types.js";

export class Poller {
  private timer: ReturnType<typeof setTimeout> | null = null;
  private lastFetch = Number.NEGATIVE_INFINITY;
  private lastSnapshot = "";
  private listeners: Array<(s: SessionState) => void> = [];
  offline = false;

  constructor(
    private readonly client: ServiceClient,
    private readonly sessionId: string,
    readonly minIntervalMs: number = 1000,
  ) {}

  subscribe(fn: (s: SessionState) => void): void {
    this.listeners.push(fn);
  }

  /** Timestamps of the underlying fetches, for rate verification. */
  readonly fetchTimes: number[] = [];

  async tick(now: () => number = Date.now): Promise<SessionState | null> {
    const t = now();
    if (t - this.lastFetch < this.minIntervalMs) return null;
    this.lastFetch = t;
    this.fetchTimes.push(t);
    try {
      const state = await this.client.getState(this.sessionId);
      this.offline = false;
      const snapshot = canonicalJson(state);
      if (snapshot !== this.lastSnapshot) {
        this.lastSnapshot = snapshot;
        for (const fn of this.listeners) fn(state);
      }
      return state;
    } catch {
      this.offline = true;
      return null;
    }
  }

  start(): void {
    if (this.timer !== null) return;
    const loop = async () => {
      await this.tick();
      this.timer = setTimeout(loop, this.minIntervalMs);
    };
    this.timer = setTimeout(loop, 0);
  }

  stop(): void {
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
  }
}
