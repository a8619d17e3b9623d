// Shared test plumbing: a minimal element tree for the view, a controllable
// SSE response for fake fetches, and a poll-until helper.

import type { DocLike, ElementLike, StreamEvent } from "../src/types.js";

export class FakeElement implements ElementLike {
  className = "";
  textContent: string | null = null;
  children: FakeElement[] = [];
  parent: FakeElement | null = null;

  appendChild(child: FakeElement): FakeElement {
    child.parent = this;
    this.children.push(child);
    return child;
  }

  remove(): void {
    if (!this.parent) return;
    const at = this.parent.children.indexOf(this);
    if (at >= 0) this.parent.children.splice(at, 1);
    this.parent = null;
  }
}

export const fakeDoc: DocLike = { createElement: () => new FakeElement() };

export function frameFor(event: StreamEvent): string {
  return `id: ${event.seq}\nevent: ${event.kind}\ndata: ${JSON.stringify(event)}\n\n`;
}

/** An open SSE response whose frames the test pushes by hand. */
export class LiveStream {
  private ctrl!: ReadableStreamDefaultController<Uint8Array>;
  readonly response: Response;

  constructor(signal?: AbortSignal | null) {
    const stream = new ReadableStream<Uint8Array>({
      start: (ctrl) => {
        this.ctrl = ctrl;
      },
    });
    signal?.addEventListener("abort", () => {
      try {
        this.ctrl.error(new Error("aborted"));
      } catch {
        // already closed
      }
    });
    this.response = new Response(stream, {
      status: 200,
      headers: { "Content-Type": "text/event-stream" },
    });
  }

  push(event: StreamEvent): void {
    this.ctrl.enqueue(new TextEncoder().encode(frameFor(event)));
  }

  close(): void {
    try {
      this.ctrl.close();
    } catch {
      // already closed
    }
  }

  fail(): void {
    try {
      this.ctrl.error(new Error("connection reset"));
    } catch {
      // already closed
    }
  }
}

export async function waitFor(
  condition: () => boolean,
  timeoutMs = 5000,
  label = "condition",
): Promise<void> {
  const startedAt = Date.now();
  while (!condition()) {
    if (Date.now() - startedAt > timeoutMs) throw new Error(`timed out waiting for ${label}`);
    await new Promise((resolve) => setTimeout(resolve, 5));
  }
}
