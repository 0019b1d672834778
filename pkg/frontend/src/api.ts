/** Thin fetch client for the /v1 session API. */

import type {
  ActionName,
  ErrorBody,
  ObservationPayload,
  RecommendRequest,
  RecommendResponse,
  SessionPayload,
  StepResponse,
} from "./types.js";

export type FetchLike = (
  input: string,
  init?: RequestInit,
) => Promise<Response>;

/** Non-2xx response, carrying the parsed error body when there is one. */
export class ApiError extends Error {
  readonly status: number;
  readonly body: ErrorBody | null;

  constructor(status: number, body: ErrorBody | null) {
    super(formatErrorBody(status, body));
    this.status = status;
    this.body = body;
  }
}

/** One line per validation item so banners stay readable. */
export function formatErrorBody(
  status: number,
  body: ErrorBody | null,
): string {
  if (body === null) return `service error (HTTP ${status})`;
  if (typeof body.detail === "string") return body.detail;
  return body.detail
    .map((item) => `${item.loc.join(".")}: ${item.msg}`)
    .join("; ");
}

export class ConsoleApi {
  readonly baseUrl: string;
  private readonly fetchFn: FetchLike;

  constructor(baseUrl: string, fetchFn?: FetchLike) {
    this.baseUrl = baseUrl.replace(/\/$/, "");
    this.fetchFn = fetchFn ?? ((input, init) => fetch(input, init));
  }

  createSession(
    overrides?: Record<string, unknown>,
  ): Promise<SessionPayload> {
    return this.request("POST", "/v1/sessions", {
      config_overrides: overrides ?? {},
    });
  }

  getSession(sessionId: string): Promise<SessionPayload> {
    return this.request("GET", `/v1/sessions/${sessionId}`);
  }

  step(
    sessionId: string,
    action: ActionName,
    observation: ObservationPayload,
  ): Promise<StepResponse> {
    return this.request("POST", `/v1/sessions/${sessionId}/step`, {
      action,
      observation,
    });
  }

  recommend(
    sessionId: string,
    request: RecommendRequest,
  ): Promise<RecommendResponse> {
    return this.request("POST", `/v1/sessions/${sessionId}/recommend`, request);
  }

  async deleteSession(sessionId: string): Promise<void> {
    await this.request("DELETE", `/v1/sessions/${sessionId}`);
  }

  private async request(
    method: string,
    path: string,
    body?: unknown,
  ): Promise<any> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { "content-type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const response = await this.fetchFn(this.baseUrl + path, init);
    const text = await response.text();
    const parsed = text ? JSON.parse(text) : null;
    if (!response.ok) {
      throw new ApiError(response.status, parsed);
    }
    return parsed;
  }
}
