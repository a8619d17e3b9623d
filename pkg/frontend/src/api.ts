// Thin JSON wrappers over the session service endpoints.

import type { SessionInfo, SopListing } from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
  }
}

async function requestJson<T>(
  fetchImpl: typeof fetch,
  url: string,
  init?: RequestInit,
): Promise<T> {
  const response = await fetchImpl(url, init);
  if (!response.ok) {
    let detail = "";
    try {
      const body = (await response.json()) as { detail?: unknown };
      if (typeof body.detail === "string") detail = body.detail;
    } catch {
      // non-JSON error body, status alone is enough
    }
    throw new ApiError(response.status, detail || `request failed: ${response.status}`);
  }
  return (await response.json()) as T;
}

export class ServiceClient {
  constructor(
    readonly base: string,
    private readonly fetchImpl: typeof fetch = fetch,
  ) {}

  listSops(): Promise<SopListing[]> {
    return requestJson(this.fetchImpl, `${this.base}/sops`);
  }

  // `api` optionally overrides the packaged API registry; tests use it to
  // pin the exact environment behavior a conversation should see
  createSession(sop: string, api?: unknown): Promise<{ session_id: string; sop: string }> {
    const body: Record<string, unknown> = { sop };
    if (api !== undefined) body.api = api;
    return requestJson(this.fetchImpl, `${this.base}/sessions`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  sendReply(sessionId: string, text: string): Promise<{ accepted: boolean }> {
    return requestJson(this.fetchImpl, `${this.base}/sessions/${sessionId}/reply`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ text }),
    });
  }

  sessionInfo(sessionId: string, debug = false): Promise<SessionInfo> {
    const suffix = debug ? "?debug=1" : "";
    return requestJson(this.fetchImpl, `${this.base}/sessions/${sessionId}${suffix}`);
  }

  eventsUrl(sessionId: string): string {
    return `${this.base}/sessions/${sessionId}/events`;
  }
}
