/**
 * DOM builders for the console's three regions.
 *
 * Pure functions from state to fresh elements; the caller swaps them in.
 * Panel text lands in a <pre> via textContent, so what the server sent is
 * what the DOM holds, byte for byte. No markdown, no highlighting, no
 * reflow. Agenda status chips are rendered from the server's own
 * vocabulary next to the text, never parsed out of it.
 */

import type {
  AgendaItem, DialogEntry, PanelBody, PanelSelection,
} from "./types.js";

const KIND_LABELS: Record<string, string> = {
  "TMRS-RECENT": "TMRs (Recent)",
  "VMRS-RECENT": "VMRs (Recent)",
  "THOUGHTS": "Thoughts",
  "AGENDA-FILTERED": "Agenda (Filtered)",
};

export function panelPane(
  doc: Document,
  selection: PanelSelection,
  body: PanelBody | null,
  agenda?: AgendaItem[],
): HTMLElement {
  const pane = doc.createElement("section");
  pane.className = "panel";
  pane.dataset.agent = selection.agent;
  pane.dataset.kind = selection.kind;

  const header = doc.createElement("header");
  const who = doc.createElement("span");
  who.className = "panel-agent";
  who.textContent = body
    ? `${body.agent} [${body.role}]`
    : selection.agent;
  const title = doc.createElement("span");
  title.className = "panel-title";
  title.textContent = body
    ? body.title
    : KIND_LABELS[selection.kind] ?? selection.kind;
  header.append(who, title);
  pane.append(header);

  const pre = doc.createElement("pre");
  pre.className = "panel-body";
  pre.textContent = body ? body.body : "";
  pane.append(pre);

  if (selection.kind === "AGENDA-FILTERED" && agenda && agenda.length) {
    pane.append(agendaStrip(doc, agenda));
  }
  return pane;
}

function agendaStrip(doc: Document, items: AgendaItem[]): HTMLElement {
  const list = doc.createElement("ul");
  list.className = "agenda-status";
  for (const item of items) {
    const li = doc.createElement("li");
    li.dataset.itemId = item.id;
    li.dataset.status = item.status;
    li.className = `st-${item.status.toLowerCase()}`;
    const name = item.id.split("/").pop() ?? item.id;
    li.textContent = item.negative
      ? `${name}: ${item.status} (negative)`
      : `${name}: ${item.status}`;
    list.append(li);
  }
  return list;
}

export function dialogWindow(
  doc: Document, entries: DialogEntry[],
): HTMLElement {
  const box = doc.createElement("ol");
  box.className = "dialog-entries";
  for (const entry of entries) {
    const li = doc.createElement("li");
    li.className = "entry";
    if (entry.pending) li.classList.add("pending");
    if (entry.error !== null) li.classList.add("error");
    if (entry.tick !== null) li.dataset.tick = String(entry.tick);

    const speaker = doc.createElement("span");
    speaker.className = "speaker";
    // "*" is a broadcast; naming it would just be noise
    speaker.textContent = entry.to && entry.to !== "*"
      ? `${entry.speaker} to ${entry.to}`
      : entry.speaker;
    const text = doc.createElement("span");
    text.className = "text";
    text.textContent = entry.text;
    li.append(speaker, text);

    if (entry.pending) {
      const mark = doc.createElement("span");
      mark.className = "mark";
      mark.textContent = "sending";
      li.append(mark);
    } else if (entry.error !== null) {
      const mark = doc.createElement("span");
      mark.className = "mark";
      mark.textContent = entry.error;
      li.append(mark);
    }
    box.append(li);
  }
  return box;
}

export function errorBanner(doc: Document, message: string): HTMLElement {
  const div = doc.createElement("div");
  div.className = "banner error";
  div.textContent = message;
  return div;
}

export function statusLine(
  doc: Document,
  run: string | null,
  tick: number,
  outcome: string | null,
  state: string,
): HTMLElement {
  const div = doc.createElement("div");
  div.className = "status-line";
  const parts = [
    run ? `run ${run}` : "no run",
    `tick ${tick}`,
    outcome ?? "running",
    state,
  ];
  div.textContent = parts.join("  |  ");
  return div;
}
