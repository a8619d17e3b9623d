// Renderer. Each message object gets exactly one row, appended the first
// time sync() sees it; reconnects never re-append because the store already
// deduplicates stream events by seq. Rows are keyed by message identity so
// a rejected optimistic send disappears with its message.

import type { DocLike, ElementLike, InputLike, UiMessage } from "./types.js";
import type { ChatStore } from "./store.js";

function rowClass(message: UiMessage): string {
  const parts = ["msg", message.direction, message.kind];
  if (message.pending) parts.push("pending");
  return parts.join(" ");
}

export class ChatView {
  private readonly rows = new Map<UiMessage, ElementLike>();

  constructor(
    private readonly doc: DocLike,
    private readonly log: ElementLike,
    private readonly banner: ElementLike,
    private readonly input: InputLike,
    private readonly sendButton: InputLike,
  ) {}

  sync(store: ChatStore): void {
    for (const [message, row] of this.rows) {
      if (!store.messages.includes(message)) {
        row.remove?.();
        this.rows.delete(message);
      }
    }
    for (const message of store.messages) {
      const existing = this.rows.get(message);
      if (existing) {
        const cls = rowClass(message);
        if (existing.className !== cls) existing.className = cls;
        continue;
      }
      const row = this.doc.createElement("div");
      row.className = rowClass(message);
      row.textContent = message.text;
      this.log.appendChild(row);
      this.rows.set(message, row);
    }
    this.banner.textContent = store.banner ?? "";
    this.banner.className = store.banner ? "banner show" : "banner";
    const open = store.status === "running" && store.awaitingInput;
    this.input.disabled = !open;
    this.sendButton.disabled = !open;
  }

  rowCount(): number {
    return this.rows.size;
  }
}
