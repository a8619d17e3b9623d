// End-to-end against a real service process: start a blocked-listing
// session, raise a doubt, get the knowledge answer, drop the stream on
// purpose, answer the re-ask, and watch the session complete. The view
// must render every event exactly once and lock the input at the end.

import { spawn, type ChildProcess } from "node:child_process";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ChatController } from "../src/controller.js";
import { ChatView } from "../src/ui.js";
import { FakeElement, fakeDoc, waitFor } from "./helpers.js";
import type { InputLike } from "../src/types.js";

const PORT = 8800 + (process.pid % 500);
const BASE = `http://127.0.0.1:${PORT}`;

// pinned API behavior: both status checks report an active listing
const TABLE6_API = {
  user_status_check: [{ respond: "Active" }],
  listing_status_check: [{ respond: "Active" }],
};

const EXPECTED_AGENT_TEXTS = [
  "Could you please provide the listing ID?",
  "I am working on it. Please wait a moment.",
  // knowledge answer asserted by substring, it is long
  null,
  "Could you please provide the listing ID?",
  "Thank you for providing the listing ID.",
  "The status of the listing ID 'LSTHFKKFL' is Active.",
  "Your listing is active and live on the platform. No further action is needed.",
  "completed",
];

let server: ChildProcess;

beforeAll(async () => {
  server = spawn("sop", ["serve", "--host", "127.0.0.1", "--port", String(PORT)], {
    stdio: ["ignore", "ignore", "pipe"],
  });
  let stderr = "";
  server.stderr?.on("data", (chunk: Buffer) => (stderr += chunk.toString()));
  const up = async () => {
    try {
      const response = await fetch(`${BASE}/sops`);
      return response.ok;
    } catch {
      return false;
    }
  };
  const startedAt = Date.now();
  while (!(await up())) {
    if (server.exitCode !== null) throw new Error(`service exited early:\n${stderr}`);
    if (Date.now() - startedAt > 30_000) throw new Error(`service never came up:\n${stderr}`);
    await new Promise((resolve) => setTimeout(resolve, 100));
  }
}, 40_000);

afterAll(() => {
  server?.kill("SIGTERM");
});

describe("live session", () => {
  it("lists the packaged workflows", async () => {
    const response = await fetch(`${BASE}/sops`);
    const sops = (await response.json()) as Array<{ name: string }>;
    expect(sops.map((s) => s.name)).toContain("listing_blocked");
  });

  it(
    "runs the doubt, knowledge answer, re-ask, valid id, status flow " +
      "rendering each event once across a forced reconnect",
    async () => {
      const log = new FakeElement();
      const banner = new FakeElement();
      const input: InputLike = { value: "", disabled: true };
      const send: InputLike = { value: "", disabled: true };
      const controller = new ChatController(BASE, { reconnectDelayMs: 50 });
      const view = new ChatView(fakeDoc, log, banner, input, send);
      controller.store.subscribe(() => view.sync(controller.store));

      expect(await controller.start("listing_blocked", TABLE6_API)).toBe(true);
      const store = controller.store;

      await waitFor(() => store.awaitingInput, 10_000, "first question");
      expect(store.messages[0]?.text).toBe("Could you please provide the listing ID?");
      expect(input.disabled).toBe(false);

      await controller.reply("how to find it");
      expect(input.disabled).toBe(true);
      await waitFor(
        () => store.messages.some((m) => m.text.includes("Seller Portal")),
        10_000,
        "knowledge answer",
      );

      // drop the live stream; the controller must resume via Last-Event-ID
      controller.forceReconnect();

      await waitFor(() => store.awaitingInput, 10_000, "re-ask after reconnect");
      await controller.reply("LSTHFKKFL");
      await controller.waitDone();

      expect(store.status).toBe("terminated");
      expect(store.reason).toBe("completed");
      expect(store.awaitingInput).toBe(false);
      expect(input.disabled).toBe(true);
      expect(send.disabled).toBe(true);

      // every stream event exactly once: seqs 1..8, one row per message
      const streamSeqs = store.messages.filter((m) => Number.isInteger(m.seq)).map((m) => m.seq);
      expect(streamSeqs).toEqual([1, 2, 3, 4, 5, 6, 7, 8]);
      expect(log.children).toHaveLength(store.messages.length);
      expect(store.messages).toHaveLength(10); // 8 stream events + 2 replies

      const agentTexts = store.messages
        .filter((m) => m.direction === "agent")
        .map((m) => m.text);
      EXPECTED_AGENT_TEXTS.forEach((want, at) => {
        if (want === null) {
          expect(agentTexts[at]).toContain("Seller Portal");
        } else {
          expect(agentTexts[at]).toBe(want);
        }
      });
      const rendered = log.children.map((c) => c.textContent);
      expect(rendered).toEqual(store.messages.map((m) => m.text));
    },
    60_000,
  );

  it("rejects a reply after termination", async () => {
    const controller = new ChatController(BASE, { reconnectDelayMs: 50 });
    await controller.start("listing_blocked", TABLE6_API);
    const store = controller.store;
    await waitFor(() => store.awaitingInput, 10_000, "question");
    await controller.reply("LSTHFKKFL");
    await controller.waitDone();
    expect(store.status).toBe("terminated");

    // the optimistic bubble must roll back when the service says 409
    store.status = "running";
    store.awaitingInput = true;
    const before = store.messages.length;
    await controller.reply("too late");
    expect(store.messages).toHaveLength(before);
    expect(store.banner).toContain("not accepted");
  });
});
