/**
 * Form validation for the observation entry panel.
 *
 * Every rule here runs before any network call: a form that fails
 * validation never reaches the service.
 */

import type {
  ActionName,
  CtReading,
  ObservationPayload,
} from "./types.js";

export interface ClinicalForm {
  ct: string;
  siriraj: string;
}

export interface DsaForm {
  pred_ane: boolean;
  pred_avm: boolean;
  pred_occ: boolean;
}

export interface ValidationResult {
  observation?: ObservationPayload;
  error?: string;
}

const CT_READINGS: CtReading[] = ["CT_POSITIVE", "CT_NEGATIVE"];

/** Siriraj scores are integers clamped to the score sheet's range. */
export function parseSiriraj(raw: string): { value?: number; error?: string } {
  const trimmed = raw.trim();
  if (trimmed === "") {
    return { error: "Siriraj score is required" };
  }
  if (!/^[+-]?\d+$/.test(trimmed)) {
    return { error: "Siriraj score must be an integer" };
  }
  const value = Number(trimmed);
  if (value < -5 || value > 5) {
    return { error: "Siriraj score must be between -5 and +5" };
  }
  return { value };
}

/**
 * Builds the observation payload the chosen action calls for: a DSA
 * report when the action is DSA, a clinical reading otherwise.
 */
export function buildObservation(
  action: ActionName,
  clinical: ClinicalForm,
  dsa: DsaForm,
): ValidationResult {
  if (action === "DSA") {
    return {
      observation: {
        kind: "dsa",
        pred_ane: dsa.pred_ane,
        pred_avm: dsa.pred_avm,
        pred_occ: dsa.pred_occ,
      },
    };
  }
  if (!CT_READINGS.includes(clinical.ct as CtReading)) {
    return { error: "CT reading must be selected" };
  }
  const siriraj = parseSiriraj(clinical.siriraj);
  if (siriraj.error !== undefined) {
    return { error: siriraj.error };
  }
  return {
    observation: {
      kind: "clinical",
      ct: clinical.ct as CtReading,
      siriraj: siriraj.value!,
    },
  };
}
