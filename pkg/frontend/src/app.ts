/**
 * Browser entry point: wires the store, the socket, and the three regions
 * (world on the left, dialog in the middle, panels on the right) to the
 * controls in index.html. Everything below is glue; the logic lives in
 * store.ts, transport.ts, world2d.ts and panes.ts.
 */

import { dialogWindow, errorBanner, panelPane, statusLine } from "./panes.js";
import { Store } from "./store.js";
import { Connection, type SocketLike } from "./transport.js";
import type { PanelSelection, RunStatus } from "./types.js";
import { PANEL_KINDS } from "./types.js";
import { paintScene, WorldView, type Painter } from "./world2d.js";

const params = new URLSearchParams(location.search);
const HTTP_BASE = params.get("gateway") ?? "http://127.0.0.1:8777";
const WS_BASE = HTTP_BASE.replace(/^http/, "ws");

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

const store = new Store();
const view = new WorldView();
let connection: Connection | null = null;
let runId: string | null = null;
let mode = "controlled";

// the default layout opens one pane per panel kind
const selections: PanelSelection[] = PANEL_KINDS.map((kind) => (
  { agent: "UGV-U", kind, pinned: true }
));

function browserSocket(url: string): SocketLike {
  const ws = new WebSocket(url);
  const like: SocketLike = {
    send: (data) => ws.send(data),
    close: () => ws.close(),
    onopen: null,
    onmessage: null,
    onclose: null,
  };
  ws.onopen = () => like.onopen?.();
  ws.onmessage = (ev) => like.onmessage?.(String(ev.data));
  ws.onclose = () => like.onclose?.();
  return like;
}

async function startRun(): Promise<void> {
  const script = (el<HTMLSelectElement>("script-choice")).value;
  mode = el<HTMLSelectElement>("mode").value;
  const res = await fetch(`${HTTP_BASE}/runs`, {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify({ script, mode, tick_ms: mode === "auto" ? 40 : 0 }),
  });
  if (!res.ok) {
    store.notice(`run refused: HTTP ${res.status}`);
    return;
  }
  const status = (await res.json()) as RunStatus;
  runId = status.run;
  connection?.close();
  connection = new Connection(
    (cursor) => `${WS_BASE}/runs/${runId}/socket?cursor=${cursor}`,
    store,
    browserSocket,
    { reconnectDelayMs: 1000 },
  );
  connection.connect();
}

async function step(n: number): Promise<void> {
  if (!runId) return;
  await fetch(`${HTTP_BASE}/runs/${runId}/step`, {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify({ n }),
  });
}

function agents(): string[] {
  const scenario = store.world.scenario;
  return scenario ? scenario.robots.map((r) => r[0]) : ["UGV-U", "DRONE-D"];
}

function fillSelect(select: HTMLSelectElement, values: readonly string[],
                    current: string): void {
  if (select.options.length !== values.length) {
    select.innerHTML = "";
    for (const value of values) {
      const opt = document.createElement("option");
      opt.value = value;
      opt.textContent = value;
      select.append(opt);
    }
  }
  select.value = current;
}

function renderPanels(): void {
  const host = el<HTMLDivElement>("panels");
  host.innerHTML = "";
  selections.forEach((selection, i) => {
    const slot = document.createElement("div");
    slot.className = "pane-slot";

    const bar = document.createElement("div");
    bar.className = "pane-bar";
    const agentSel = document.createElement("select");
    fillSelect(agentSel, agents(), selection.agent);
    agentSel.onchange = () => {
      selections[i] = { ...selection, agent: agentSel.value };
      render();
    };
    const kindSel = document.createElement("select");
    fillSelect(kindSel, PANEL_KINDS, selection.kind);
    kindSel.onchange = () => {
      selections[i] = {
        ...selection,
        kind: kindSel.value as PanelSelection["kind"],
      };
      render();
    };
    const close = document.createElement("button");
    close.className = "pane-close";
    close.textContent = "×";
    close.title = "close this pane";
    close.onclick = () => {
      selections.splice(i, 1);
      render();
    };
    bar.append(agentSel, kindSel, close);
    slot.append(bar);

    const body = store.panels.get(`${selection.agent}/${selection.kind}`) ?? null;
    const agenda = selection.kind === "AGENDA-FILTERED"
      ? store.agendaItems.get(selection.agent)
      : undefined;
    slot.append(panelPane(document, selection, body, agenda));
    host.append(slot);
  });
}

function repaintWorld(): void {
  const canvas = el<HTMLCanvasElement>("canvas");
  const zones = el<HTMLInputElement>("zones").checked;
  view.update(store.world, { zones });
  const scene = view.scene;
  if (scene.width > 0 && canvas.width !== scene.width) {
    canvas.width = scene.width;
    canvas.height = scene.height;
  }
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  // the 2d context carries every member the painter needs; its style
  // properties are merely wider (gradients, patterns) than we use
  paintScene(ctx as unknown as Painter, scene, 1);
}

function render(): void {
  repaintWorld();

  const dialogHost = el<HTMLDivElement>("dialog-entries");
  dialogHost.innerHTML = "";
  dialogHost.append(dialogWindow(document, store.dialog));
  dialogHost.scrollTop = dialogHost.scrollHeight;

  renderPanels();

  const footer = el<HTMLDivElement>("footer");
  footer.innerHTML = "";
  footer.append(statusLine(
    document, store.run, store.tick, store.outcome,
    connection ? connection.state : "idle"));
  const lastNotice = store.notices[store.notices.length - 1];
  if (lastNotice !== undefined) {
    footer.append(errorBanner(document, lastNotice));
  }
  if (view.error) {
    footer.append(errorBanner(document, `world: ${view.error}`));
  }

  el<HTMLButtonElement>("step").disabled =
    mode !== "controlled" || store.done || !runId;
  const say = el<HTMLInputElement>("say");
  el<HTMLButtonElement>("send").disabled =
    say.value.trim() === "" || !connection || store.done;
}

let frame = 0;
store.subscribe(() => {
  if (frame) return;
  frame = requestAnimationFrame(() => {
    frame = 0;
    render();
  });
});

el<HTMLButtonElement>("start").onclick = () => { void startRun(); };
el<HTMLButtonElement>("add-pane").onclick = () => {
  selections.push({ agent: "UGV-U", kind: "THOUGHTS", pinned: false });
  render();
};
el<HTMLButtonElement>("step").onclick = () => {
  void step(Number(el<HTMLInputElement>("steps").value) || 1);
};
el<HTMLInputElement>("zones").onchange = render;
el<HTMLInputElement>("say").oninput = render;

function sendUtterance(): void {
  const say = el<HTMLInputElement>("say");
  const text = say.value.trim();
  if (!text || !connection) return;
  connection.submit(text);
  say.value = "";
  render();
}
el<HTMLButtonElement>("send").onclick = sendUtterance;
el<HTMLInputElement>("say").onkeydown = (ev) => {
  if (ev.key === "Enter") sendUtterance();
};

render();
