// Chat state: the deduplicated, seq-ordered message list plus the flags the
// view needs. Stream events are the source of truth; locally sent replies
// are optimistic entries that reconcile when the POST settles.

import {
  AGENT_QUESTION,
  SESSION_TERMINATED,
  type StreamEvent,
  type UiMessage,
} from "./types.js";

export type ChatStatus =
  | "idle"
  | "connecting"
  | "running"
  | "terminated"
  | "error";

export class ChatStore {
  readonly messages: UiMessage[] = [];
  status: ChatStatus = "idle";
  reason: string | null = null;
  awaitingInput = false;
  banner: string | null = null;
  lastSeq = 0;

  private readonly seen = new Set<number>();
  private readonly listeners: Array<() => void> = [];

  subscribe(listener: () => void): void {
    this.listeners.push(listener);
  }

  private notify(): void {
    for (const listener of this.listeners) listener();
  }

  setStatus(status: ChatStatus, reason: string | null = null): void {
    this.status = status;
    if (reason !== null) this.reason = reason;
    if (status !== "running") this.awaitingInput = false;
    this.notify();
  }

  setBanner(text: string | null): void {
    if (this.banner === text) return;
    this.banner = text;
    this.notify();
  }

  /** Returns false for a seq already applied (replays after reconnect). */
  applyEvent(event: StreamEvent): boolean {
    if (this.seen.has(event.seq)) return false;
    this.seen.add(event.seq);
    if (event.seq > this.lastSeq) this.lastSeq = event.seq;
    this.messages.push({
      direction: "agent",
      kind: event.kind,
      text: event.text,
      seq: event.seq,
      pending: false,
    });
    if (event.kind === AGENT_QUESTION) {
      this.awaitingInput = true;
    } else if (event.kind === SESSION_TERMINATED) {
      const reason = typeof event.meta.reason === "string" ? event.meta.reason : event.text;
      this.status = "terminated";
      this.reason = reason;
      this.awaitingInput = false;
    }
    this.notify();
    return true;
  }

  sendOptimistic(text: string): UiMessage {
    const message: UiMessage = {
      direction: "user",
      kind: "user_reply",
      text,
      seq: this.lastSeq + 0.5,
      pending: true,
    };
    this.messages.push(message);
    this.awaitingInput = false;
    this.notify();
    return message;
  }

  confirmReply(message: UiMessage): void {
    message.pending = false;
    this.notify();
  }

  /** Failed POST: drop the bubble and reopen the input. */
  rejectReply(message: UiMessage, banner: string): void {
    const at = this.messages.indexOf(message);
    if (at >= 0) this.messages.splice(at, 1);
    if (this.status === "running") this.awaitingInput = true;
    this.banner = banner;
    this.notify();
  }

  seqs(): number[] {
    return this.messages.map((m) => m.seq);
  }
}
