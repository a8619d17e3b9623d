// Session lifecycle: create, pump the event stream into the store, resume
// after drops with Last-Event-ID, forward replies.

import { ApiError, ServiceClient } from "./api.js";
import { streamFrames, toStreamEvent } from "./sse.js";
import { ChatStore } from "./store.js";

const CONNECT_BANNER = "Cannot reach the service. Check that it is running and retry.";
const STREAM_BANNER = "Connection lost. Reconnecting";
const REPLY_BANNER = "The reply was not accepted. Try again.";

function delay(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

export interface ControllerOptions {
  fetchImpl?: typeof fetch;
  reconnectDelayMs?: number;
}

export class ChatController {
  readonly store = new ChatStore();
  readonly client: ServiceClient;
  sessionId: string | null = null;

  private readonly fetchImpl: typeof fetch;
  private readonly reconnectDelayMs: number;
  private abort: AbortController | null = null;
  private pumpDone: Promise<void> = Promise.resolve();

  constructor(base: string, options: ControllerOptions = {}) {
    this.fetchImpl = options.fetchImpl ?? fetch;
    this.reconnectDelayMs = options.reconnectDelayMs ?? 500;
    this.client = new ServiceClient(base, this.fetchImpl);
  }

  /** Create a session and start streaming. Failure raises the banner. */
  async start(sop: string, api?: unknown): Promise<boolean> {
    this.store.setStatus("connecting");
    try {
      const created = await this.client.createSession(sop, api);
      this.sessionId = created.session_id;
    } catch (error) {
      const detail = error instanceof ApiError ? ` (${error.message})` : "";
      this.store.setBanner(CONNECT_BANNER + detail);
      this.store.setStatus("error");
      return false;
    }
    this.store.setStatus("running");
    this.pumpDone = this.pump();
    return true;
  }

  private async pump(): Promise<void> {
    while (this.store.status === "running") {
      this.abort = new AbortController();
      const forced = this.abort.signal;
      try {
        const frames = streamFrames(this.client.eventsUrl(this.sessionId ?? ""), {
          lastEventId: this.store.lastSeq,
          signal: forced,
          fetchImpl: this.fetchImpl,
        });
        for await (const frame of frames) {
          this.store.applyEvent(toStreamEvent(frame));
          this.store.setBanner(null);
        }
        // clean close without a termination event: the server caught us up
        // and ended the response; resume from the cursor
        if (this.store.status === "running") await delay(this.reconnectDelayMs);
      } catch {
        if (this.store.status !== "running") break;
        if (!forced.aborted) {
          this.store.setBanner(STREAM_BANNER);
          await delay(this.reconnectDelayMs);
        }
      }
    }
  }

  /** Drop the live stream; the pump resumes from the last applied seq. */
  forceReconnect(): void {
    this.abort?.abort();
  }

  async reply(text: string): Promise<void> {
    if (this.sessionId === null || !this.store.awaitingInput) return;
    const message = this.store.sendOptimistic(text);
    try {
      await this.client.sendReply(this.sessionId, text);
      this.store.confirmReply(message);
    } catch {
      this.store.rejectReply(message, REPLY_BANNER);
    }
  }

  /** Resolves once the stream loop has fully stopped. */
  waitDone(): Promise<void> {
    return this.pumpDone;
  }
}
