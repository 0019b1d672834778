/** Fetch client: paths, bodies, and error payload handling. */

import { describe, expect, it } from "vitest";

import { ApiError, ConsoleApi, formatErrorBody } from "../src/api.js";
import { errorDetailFixture } from "./fixtures.js";

interface RecordedCall {
  url: string;
  init?: RequestInit;
}

function stubApi(status: number, body: unknown) {
  const calls: RecordedCall[] = [];
  const api = new ConsoleApi("http://service.test/", (url, init) => {
    calls.push({ url, init });
    const text = body === null ? null : JSON.stringify(body);
    return Promise.resolve(new Response(text, { status }));
  });
  return { api, calls };
}

describe("request shapes", () => {
  it("creates sessions with explicit override payloads", async () => {
    const { api, calls } = stubApi(201, { session_id: "s" });
    await api.createSession();
    expect(calls[0].url).toBe("http://service.test/v1/sessions");
    expect(calls[0].init?.method).toBe("POST");
    expect(JSON.parse(calls[0].init?.body as string)).toEqual({
      config_overrides: {},
    });
  });

  it("posts steps with the action and observation", async () => {
    const { api, calls } = stubApi(200, { session_id: "s" });
    await api.step("abc", "WAIT", {
      kind: "clinical",
      ct: "CT_NEGATIVE",
      siriraj: 0,
    });
    expect(calls[0].url).toBe("http://service.test/v1/sessions/abc/step");
    expect(JSON.parse(calls[0].init?.body as string)).toEqual({
      action: "WAIT",
      observation: { kind: "clinical", ct: "CT_NEGATIVE", siriraj: 0 },
    });
  });

  it("passes recommend requests through untouched", async () => {
    const { api, calls } = stubApi(200, { action: "WAIT" });
    await api.recommend("abc", {
      policy: "despot",
      seed: 11,
      solver_overrides: { max_depth: 4 },
    });
    expect(calls[0].url).toBe("http://service.test/v1/sessions/abc/recommend");
    expect(JSON.parse(calls[0].init?.body as string)).toEqual({
      policy: "despot",
      seed: 11,
      solver_overrides: { max_depth: 4 },
    });
  });

  it("handles empty delete responses", async () => {
    const { api, calls } = stubApi(204, null);
    await api.deleteSession("abc");
    expect(calls[0].url).toBe("http://service.test/v1/sessions/abc");
    expect(calls[0].init?.method).toBe("DELETE");
  });
});

describe("error handling", () => {
  it("raises ApiError carrying the parsed validation detail", async () => {
    const { api } = stubApi(422, errorDetailFixture());
    const failure = await api
      .step("abc", "WAIT", {
        kind: "dsa",
        pred_ane: false,
        pred_avm: false,
        pred_occ: false,
      })
      .then(
        () => null,
        (error: unknown) => error,
      );
    expect(failure).toBeInstanceOf(ApiError);
    const apiError = failure as ApiError;
    expect(apiError.status).toBe(422);
    expect(apiError.message).toBe(
      "body.observation.kind: action WAIT requires a 'clinical' observation",
    );
  });

  it("passes string details through unchanged", () => {
    expect(
      formatErrorBody(409, {
        detail: "admission horizon reached; no further steps",
      }),
    ).toBe("admission horizon reached; no further steps");
  });

  it("falls back to the status code without a body", () => {
    expect(formatErrorBody(500, null)).toBe("service error (HTTP 500)");
  });
});
