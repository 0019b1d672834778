/**
 * Client-side session state.
 *
 * Holds the latest service payloads plus the action timeline, and
 * enforces the single-writer contract: at most one mutating request in
 * flight per session. Read-only recommends are not gated.
 *
 * Timeline entries are appended only after the service acknowledges a
 * step, so the strip always mirrors the history the service stores.
 */

import { ApiError } from "./api.js";
import type {
  ActionName,
  HistoryEntry,
  ObservationPayload,
  RecommendResponse,
  SessionPayload,
  StepResponse,
} from "./types.js";

export class ConsoleState {
  session: SessionPayload | null = null;
  timeline: HistoryEntry[] = [];
  recommendation: RecommendResponse | null = null;
  banner: string | null = null;
  private mutating = false;

  get inFlight(): boolean {
    return this.mutating;
  }

  /** Claims the single mutation slot; false means one is already running. */
  beginMutation(): boolean {
    if (this.mutating) return false;
    this.mutating = true;
    return true;
  }

  endMutation(): void {
    this.mutating = false;
  }

  /** Adopts a full session payload (create or refresh). */
  applySession(payload: SessionPayload): void {
    this.session = payload;
    this.timeline = payload.history.slice();
    this.recommendation = null;
    this.banner = null;
  }

  /** Folds an acknowledged step into the session and the timeline. */
  applyStep(
    action: ActionName,
    observation: ObservationPayload,
    payload: StepResponse,
  ): void {
    if (this.session === null) return;
    this.session.belief = payload.belief;
    this.session.marginals = payload.marginals;
    this.timeline.push({ action, observation });
    this.banner = payload.warning ?? null;
  }

  applyRecommend(payload: RecommendResponse): void {
    this.recommendation = payload;
  }

  /** Routes any failure into the banner; service details verbatim. */
  applyError(error: unknown): void {
    if (error instanceof ApiError) {
      this.banner = error.message;
    } else if (error instanceof Error) {
      this.banner = error.message;
    } else {
      this.banner = String(error);
    }
  }

  dismissBanner(): void {
    this.banner = null;
  }
}
