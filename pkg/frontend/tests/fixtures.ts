/** Loads the payload fixtures captured from a live seeded service. */

import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import type {
  ErrorBody,
  RecommendResponse,
  SessionPayload,
  StepResponse,
} from "../src/types.js";

const fixturesDir = join(dirname(fileURLToPath(import.meta.url)), "fixtures");

function load<T>(name: string): T {
  return JSON.parse(readFileSync(join(fixturesDir, name), "utf8")) as T;
}

export const createSessionFixture = (): SessionPayload =>
  load("create_session.json");
export const stepDsaFixture = (): StepResponse =>
  load("step_dsa_positive.json");
export const stepClinicalFixture = (): StepResponse =>
  load("step_clinical.json");
export const sessionAfterFixture = (): SessionPayload =>
  load("session_after.json");
export const recommendExpertFixture = (): RecommendResponse =>
  load("recommend_expert.json");
export const recommendDespotFixture = (): RecommendResponse =>
  load("recommend_despot.json");
export const errorDetailFixture = (): ErrorBody => load("error_detail.json");
