// Incremental server-sent-events reader over fetch. Node 20 and browsers
// both expose fetch with ReadableStream bodies; neither needs EventSource.

import type { StreamEvent } from "./types.js";

export interface SseFrame {
  id: number | null;
  event: string;
  data: string;
}

/** Feed arbitrary chunk boundaries in, get completed frames out. */
export class SseParser {
  private buffer = "";

  push(chunk: string): SseFrame[] {
    this.buffer += chunk.replace(/\r\n/g, "\n");
    const frames: SseFrame[] = [];
    for (;;) {
      const cut = this.buffer.indexOf("\n\n");
      if (cut < 0) break;
      const block = this.buffer.slice(0, cut);
      this.buffer = this.buffer.slice(cut + 2);
      const frame = parseBlock(block);
      if (frame) frames.push(frame);
    }
    return frames;
  }
}

function parseBlock(block: string): SseFrame | null {
  let id: number | null = null;
  let event = "message";
  const data: string[] = [];
  for (const line of block.split("\n")) {
    if (!line || line.startsWith(":")) continue;
    const colon = line.indexOf(":");
    const field = colon < 0 ? line : line.slice(0, colon);
    let value = colon < 0 ? "" : line.slice(colon + 1);
    if (value.startsWith(" ")) value = value.slice(1);
    if (field === "id") {
      const n = Number(value);
      if (Number.isFinite(n)) id = n;
    } else if (field === "event") {
      event = value;
    } else if (field === "data") {
      data.push(value);
    }
  }
  if (id === null && data.length === 0) return null;
  return { id, event, data: data.join("\n") };
}

export interface StreamOptions {
  lastEventId?: number;
  signal?: AbortSignal;
  fetchImpl?: typeof fetch;
}

export async function* streamFrames(
  url: string,
  options: StreamOptions = {},
): AsyncGenerator<SseFrame> {
  const fetchImpl = options.fetchImpl ?? fetch;
  const headers: Record<string, string> = { Accept: "text/event-stream" };
  if (options.lastEventId) headers["Last-Event-ID"] = String(options.lastEventId);
  const response = await fetchImpl(url, { headers, signal: options.signal });
  if (!response.ok) throw new Error(`event stream failed: ${response.status}`);
  if (!response.body) throw new Error("event stream has no body");
  const reader = response.body.getReader();
  const decoder = new TextDecoder();
  const parser = new SseParser();
  try {
    for (;;) {
      const { done, value } = await reader.read();
      if (done) break;
      yield* parser.push(decoder.decode(value, { stream: true }));
    }
  } finally {
    reader.releaseLock();
  }
}

/** The service sends the full event as JSON in the data field. */
export function toStreamEvent(frame: SseFrame): StreamEvent {
  const parsed: unknown = JSON.parse(frame.data);
  if (typeof parsed !== "object" || parsed === null) {
    throw new Error("event data is not an object");
  }
  const record = parsed as Record<string, unknown>;
  const seq = typeof record.seq === "number" ? record.seq : frame.id;
  if (typeof seq !== "number") throw new Error("event has no seq");
  return {
    seq,
    kind: typeof record.kind === "string" ? record.kind : frame.event,
    text: typeof record.text === "string" ? record.text : "",
    meta:
      typeof record.meta === "object" && record.meta !== null
        ? (record.meta as Record<string, unknown>)
        : {},
  };
}
