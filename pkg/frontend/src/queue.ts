// Serialized preference submission with per-iteration idempotency: no
// matter how many clicks arrive, at most one submission per iteration
// index ever reaches the service.

import { ApiError } from "./api.js";
import type { PreferenceAck } from "./types.js";

export type SubmitFn = (m: number, a: -1 | 0 | 1) => Promise<PreferenceAck>;

export type SubmitOutcome =
  | { kind: "accepted"; ack: PreferenceAck }
  | { kind: "duplicate" }
  | { kind: "phase_conflict"; message: string }
  | { kind: "error"; message: string };

export class SubmissionQueue {
  private readonly settled = new Set<number>();
  private inflight: number | null = null;

  constructor(private readonly submitFn: SubmitFn) {}

  isBlocked(m: number): boolean {
    return this.settled.has(m) || this.inflight === m;
  }

  async submit(m: number, a: -1 | 0 | 1): Promise<SubmitOutcome> {
    if (this.isBlocked(m)) return { kind: "duplicate" };
    this.inflight = m;
    try {
      const ack = await this.submitFn(m, a);
      this.settled.add(m);
      return { kind: "accepted", ack };
    } catch (err) {
      if (err instanceof ApiError && err.isPhaseConflict) {
        // the service already has an answer for this iteration
        this.settled.add(m);
        return { kind: "phase_conflict", message: err.message };
      }
      const message = err instanceof Error ? err.message : String(err);
      return { kind: "error", message };
    } finally {
      this.inflight = null;
    }
  }
}
