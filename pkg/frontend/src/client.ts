// Thin API client. The fetch implementation is injected so tests can
// intercept every request; server rejections are surfaced verbatim.

import { GuessResponse, StateResponse } from "./types.js";

export interface HttpResponse {
  ok: boolean;
  status: number;
  json(): Promise<unknown>;
}

export type FetchLike = (url: string, init?: {
  method?: string;
  headers?: Record<string, string>;
  body?: string;
}) => Promise<HttpResponse>;

export class ApiError extends Error {
  constructor(public status: number, detail: string) {
    super(detail);
  }
}

async function detailOf(resp: HttpResponse): Promise<string> {
  try {
    const body = (await resp.json()) as { detail?: string };
    if (body && typeof body.detail === "string") {
      return body.detail;
    }
  } catch {
    // fall through to the status line
  }
  return `request failed (${resp.status})`;
}

export class GameClient {
  sessionId: string | null = null;
  playerId: string | null = null;

  constructor(private baseUrl: string, private fetchFn: FetchLike) {}

  private async request<T>(path: string, method: string, body?: unknown):
      Promise<T> {
    const resp = await this.fetchFn(`${this.baseUrl}${path}`, {
      method,
      headers: body === undefined ? {} : { "content-type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!resp.ok) {
      throw new ApiError(resp.status, await detailOf(resp));
    }
    return (await resp.json()) as T;
  }

  async createSession(options: Record<string, unknown> = {}): Promise<string> {
    const out = await this.request<{ id: string }>("/sessions", "POST", options);
    this.sessionId = out.id;
    return out.id;
  }

  async join(sessionId?: string): Promise<string> {
    if (sessionId) {
      this.sessionId = sessionId;
    }
    const out = await this.request<{ player_id: string }>(
      `/sessions/${this.sessionId}/players`, "POST", {});
    this.playerId = out.player_id;
    return out.player_id;
  }

  async start(): Promise<void> {
    await this.request(`/sessions/${this.sessionId}/start`, "POST", {});
  }

  async guess(value: number): Promise<GuessResponse> {
    return this.request<GuessResponse>(
      `/sessions/${this.sessionId}/guess`, "POST",
      { player_id: this.playerId, value });
  }

  async state(): Promise<StateResponse> {
    return this.request<StateResponse>(
      `/sessions/${this.sessionId}/state?player=${this.playerId}`, "GET");
  }
}
