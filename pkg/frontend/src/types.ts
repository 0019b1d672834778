/**
 * Wire types for the /v1 session service.
 *
 * These mirror the JSON schemas published by the service; the console
 * deliberately shares no code with the engine, so the shapes here are
 * the whole contract.
 */

export type ActionName =
  | "WAIT"
  | "HOSP"
  | "DSA"
  | "COIL"
  | "EMBO"
  | "REVC"
  | "DISC";

export type PolicyName = "random" | "expert-hosp" | "expert-dsa" | "despot";

export type CtReading = "CT_POSITIVE" | "CT_NEGATIVE";

export interface ClinicalObservation {
  kind: "clinical";
  ct: CtReading;
  siriraj: number;
}

export interface DsaObservation {
  kind: "dsa";
  pred_ane: boolean;
  pred_avm: boolean;
  pred_occ: boolean;
}

export type ObservationPayload = ClinicalObservation | DsaObservation;

export interface BeliefPayload {
  weights: number[];
  t: number;
}

export interface MarginalsPayload {
  p_ane: number;
  p_avm: number;
  p_occ: number;
  p_stroke_free: number;
}

export interface HistoryEntry {
  action: ActionName;
  observation: ObservationPayload;
}

export interface SessionPayload {
  session_id: string;
  belief: BeliefPayload;
  marginals: MarginalsPayload;
  history: HistoryEntry[];
  config_overrides: Record<string, unknown>;
  created: string;
  updated: string;
}

export interface StepResponse {
  session_id: string;
  belief: BeliefPayload;
  marginals: MarginalsPayload;
  degenerate_update: boolean;
  warning?: string;
}

export interface BoundsPayload {
  lower: number;
  upper: number;
}

export interface RecommendRequest {
  policy: PolicyName;
  seed?: number;
  solver_overrides?: Record<string, unknown>;
  time_budget_ms?: number;
}

export interface RecommendResponse {
  policy: PolicyName;
  seed: number;
  branch: string | null;
  dominant: string | null;
  value_bounds: Record<string, BoundsPayload> | null;
  diagnostics: Record<string, number | boolean> | null;
  action: ActionName;
}

export interface ErrorItem {
  loc: Array<string | number>;
  msg: string;
  type: string;
}

export interface ErrorBody {
  detail: ErrorItem[] | string;
}
