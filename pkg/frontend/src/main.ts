// Browser bootstrap: joins (or creates) a session, wires the guess form,
// polls the server once a second, and re-renders from the view state.

import { GameClient } from "./client.js";
import { pollState, submitAndUpdate } from "./controller.js";
import { renderApp } from "./render.js";
import { ClientView } from "./types.js";
import { emptyView } from "./view.js";

const POLL_MS = 1000;
const FLASH_MS = 600;

async function boot() {
  const app = document.getElementById("app") as HTMLDivElement;
  const input = document.getElementById("guess-input") as HTMLInputElement;
  const button = document.getElementById("guess-button") as HTMLButtonElement;
  const startButton = document.getElementById("start-button") as HTMLButtonElement;

  const client = new GameClient("", (url, init) => fetch(url, init));
  const params = new URLSearchParams(window.location.search);
  const existing = params.get("session");
  if (existing) {
    client.sessionId = existing;
  } else {
    await client.createSession({ n_bots: 39 });
    params.set("session", client.sessionId!);
    history.replaceState(null, "", `?${params.toString()}`);
  }
  await client.join();

  let view: ClientView = emptyView();
  let flashTimer: number | undefined;

  const render = () => {
    app.innerHTML = renderApp(view);
    if (view.flash) {
      // flip the panel back after the green flash
      window.clearTimeout(flashTimer);
      flashTimer = window.setTimeout(() => {
        view = { ...view, flash: false };
        render();
      }, FLASH_MS);
    }
  };

  let inFlight = false;
  const submit = async () => {
    if (inFlight) {
      return;
    }
    inFlight = true;
    try {
      view = await submitAndUpdate(client, view, input.value);
      if (!view.error) {
        input.value = "";
      }
      render();
    } finally {
      inFlight = false;
    }
  };

  button.addEventListener("click", submit);
  input.addEventListener("keydown", (ev) => {
    if (ev.key === "Enter") {
      void submit();
    }
  });
  startButton.addEventListener("click", async () => {
    await client.start().catch(() => undefined);
    view = await pollState(client, view);
    render();
  });

  view = await pollState(client, view);
  render();
  window.setInterval(async () => {
    view = await pollState(client, view);
    render();
  }, POLL_MS);
}

void boot();
