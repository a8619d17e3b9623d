// Browser wiring. Everything testable lives in the other modules; this file
// only touches the real DOM.

import { ChatController } from "./controller.js";
import { ChatView } from "./ui.js";

function el<T extends HTMLElement>(id: string): T {
  const found = document.getElementById(id);
  if (!found) throw new Error(`missing #${id}`);
  return found as T;
}

function serviceBase(): string {
  const override = new URLSearchParams(location.search).get("service");
  return override ?? `${location.protocol}//${location.hostname}:8731`;
}

async function boot(): Promise<void> {
  const picker = el<HTMLSelectElement>("sop-picker");
  const startButton = el<HTMLButtonElement>("start");
  const log = el<HTMLDivElement>("log");
  const banner = el<HTMLDivElement>("banner");
  const input = el<HTMLInputElement>("reply");
  const sendButton = el<HTMLButtonElement>("send");
  const statusLine = el<HTMLDivElement>("status");
  const debugPane = el<HTMLPreElement>("debug");
  const debug = new URLSearchParams(location.search).has("debug");
  if (debug) debugPane.className = "debug show";

  const controller = new ChatController(serviceBase());
  const view = new ChatView(document, log, banner, input, sendButton);

  try {
    const sops = await controller.client.listSops();
    for (const sop of sops) {
      const option = document.createElement("option");
      option.value = sop.name;
      option.textContent = `${sop.name} (${sop.actions} actions)`;
      picker.appendChild(option);
    }
  } catch {
    banner.textContent = "Cannot reach the service. Is it running?";
    banner.className = "banner show";
    return;
  }

  let refreshing = false;
  controller.store.subscribe(() => {
    view.sync(controller.store);
    statusLine.textContent = controller.store.reason
      ? `${controller.store.status} (${controller.store.reason})`
      : controller.store.status;
    log.scrollTop = 1e9;
    if (debug && controller.sessionId && !refreshing) {
      refreshing = true;
      controller.client
        .sessionInfo(controller.sessionId, true)
        .then((info) => {
          debugPane.textContent = JSON.stringify(info.state_trace ?? [], null, 2);
        })
        .catch(() => {})
        .finally(() => {
          refreshing = false;
        });
    }
  });

  startButton.addEventListener("click", () => {
    if (!picker.value) return;
    startButton.disabled = true;
    picker.disabled = true;
    void controller.start(picker.value).then((ok) => {
      if (!ok) {
        startButton.disabled = false;
        picker.disabled = false;
      }
    });
  });

  const send = (): void => {
    const text = input.value.trim();
    if (!text) return;
    input.value = "";
    void controller.reply(text);
  };
  sendButton.addEventListener("click", send);
  input.addEventListener("keydown", (event) => {
    if (event.key === "Enter") send();
  });
}

void boot();
