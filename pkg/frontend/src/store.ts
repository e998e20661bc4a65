/**
 * All console state, fed by one ordered reducer.
 *
 * Every socket record flows through apply(); events are keyed by seq and
 * anything at or below the high-water mark is dropped, so a resumed
 * connection that overlaps the backlog cannot double-apply. Views (dialog,
 * world, agenda items) are derived incrementally here; rendering stays a
 * pure function of this object.
 */

import { ProtocolError } from "./records.js";
import type {
  AgendaItem,
  DialogEntry,
  EventBody,
  PanelBody,
  RecordKind,
} from "./types.js";

export const PROTOCOL_VERSION = 1;

export interface ScenarioSnapshot {
  token: string;
  name: string;
  size: [number, number];
  rooms: [string, number, number, number, number][];
  zones: [string, string, boolean, [number, number][]][];
  objects: [string, string, [number, number, number] | null, boolean][];
  robots: [string, string, string, [number, number, number]][];
  humans: string[];
}

export interface WorldState {
  scenario: ScenarioSnapshot | null;
  rawScenario: unknown;
  poses: Map<string, { pos: [number, number, number]; yaw: number }>;
  found: Set<string>;
  visited: { agent: string; zone: string; waypoint: [number, number] }[];
  outcome: string | null;
}

/** The operator's own submission, tracked until its MESSAGE event lands. */
interface OwnUtterance {
  entry: DialogEntry;
  state: "queued" | "sent" | "acked";
}

export class Store {
  events: EventBody[] = [];
  highSeq = 0;
  run: string | null = null;
  tick = 0;
  outcome: string | null = null;
  done = false;

  panels = new Map<string, PanelBody>();
  agendaItems = new Map<string, AgendaItem[]>();
  dialog: DialogEntry[] = [];
  notices: string[] = [];

  world: WorldState = {
    scenario: null,
    rawScenario: null,
    poses: new Map(),
    found: new Set(),
    visited: [],
    outcome: null,
  };

  private own: OwnUtterance[] = [];
  private listeners: (() => void)[] = [];

  subscribe(fn: () => void): void {
    this.listeners.push(fn);
  }

  changed(): void {
    for (const fn of this.listeners) fn();
  }

  /** Surface an out-of-band problem (transport hiccup, refused request). */
  notice(message: string): void {
    this.notices.push(message);
    this.changed();
  }

  panelKey(agent: string, kind: string): string {
    return `${agent}/${kind}`;
  }

  /** Route one decoded record into state. Unknown service kinds are errors. */
  apply(kind: RecordKind, body: Record<string, unknown>): void {
    switch (kind) {
      case "EVENT":
        this.applyEvent(body as unknown as EventBody);
        break;
      case "PANEL": {
        const panel = body as unknown as PanelBody;
        this.panels.set(this.panelKey(panel.agent, panel.kind), panel);
        break;
      }
      case "ACK":
        this.applyAck(body);
        break;
      case "ERROR":
        this.applyError(String(body.error ?? "unknown error"));
        break;
      default:
        throw new ProtocolError(`server sent a client-only record ${kind}`);
    }
    this.changed();
  }

  private applyEvent(ev: EventBody): void {
    if (ev.seq <= this.highSeq) {
      return; // resume overlap
    }
    this.events.push(ev);
    this.highSeq = ev.seq;
    this.tick = Math.max(this.tick, ev.tick);
    if (ev.kind === "MESSAGE") {
      this.applyMessage(ev);
    } else if (ev.kind === "WORLD") {
      this.applyWorld(ev);
    } else if (ev.kind === "AGENDA") {
      const items = (ev.meta as { items?: AgendaItem[] }).items;
      if (items) this.agendaItems.set(ev.agent, items);
    }
  }

  private applyMessage(ev: EventBody): void {
    const to = String((ev.meta as { to?: unknown }).to ?? "*");
    // an own submission whose delivery just landed stops being provisional
    const mine = this.own.findIndex(
      (o) => o.state === "acked" && o.entry.text === ev.payload
        && o.entry.speaker === ev.agent);
    if (mine >= 0) {
      const [own] = this.own.splice(mine, 1);
      const at = this.dialog.indexOf(own!.entry);
      if (at >= 0) this.dialog.splice(at, 1);
    }
    this.dialog.push({
      speaker: ev.agent, to, text: ev.payload, tick: ev.tick,
      pending: false, error: null,
    });
  }

  private applyWorld(ev: EventBody): void {
    let payload: Record<string, unknown>;
    try {
      payload = JSON.parse(ev.payload) as Record<string, unknown>;
    } catch {
      this.notices.push(`unreadable world event at seq ${ev.seq}`);
      return;
    }
    switch (payload.what) {
      case "scenario":
        // kept raw too; the scene builder validates shape on use
        this.world.rawScenario = payload;
        this.world.scenario = payload as unknown as ScenarioSnapshot;
        break;
      case "pose":
        this.world.poses.set(ev.agent, {
          pos: payload.pos as [number, number, number],
          yaw: Number(payload.yaw),
        });
        break;
      case "found":
        this.world.found.add(String(payload.obj));
        break;
      case "arrive":
        this.world.visited.push({
          agent: ev.agent,
          zone: String(payload.zone),
          waypoint: payload.waypoint as [number, number],
        });
        break;
      case "outcome":
        this.world.outcome = String(payload.outcome);
        this.outcome = String(payload.outcome);
        break;
      default:
        break; // job lifecycle and memory seeds have no view of their own
    }
  }

  private applyAck(body: Record<string, unknown>): void {
    if ("v" in body) {
      if (body.v !== PROTOCOL_VERSION) {
        throw new ProtocolError(
          `server speaks record protocol v${String(body.v)}, `
          + `this console speaks v${PROTOCOL_VERSION}`);
      }
      this.run = String(body.run);
      this.tick = Number(body.tick);
      this.outcome = (body.outcome as string | null) ?? null;
      return;
    }
    if (body.done === true) {
      this.done = true;
      this.outcome = (body.outcome as string | null) ?? this.outcome;
      this.tick = Number(body.tick);
      return;
    }
    // a plain utterance ACK settles the oldest sent submission
    const sent = this.own.find((o) => o.state === "sent");
    if (sent) {
      sent.state = "acked";
      sent.entry.pending = false;
      sent.entry.tick = Number(body.tick);
    }
  }

  private applyError(message: string): void {
    const sent = this.own.find((o) => o.state === "sent");
    if (sent) {
      sent.state = "acked"; // settled, though unhappily
      sent.entry.pending = false;
      sent.entry.error = message;
      this.own.splice(this.own.indexOf(sent), 1);
      return;
    }
    this.notices.push(message);
  }

  // -- the operator's side of the dialog --

  /** Register a submission; the transport reports send/requeue transitions. */
  queueOwn(speaker: string, text: string): DialogEntry {
    const entry: DialogEntry = {
      speaker, to: "*", text, tick: null, pending: true, error: null,
    };
    this.own.push({ entry, state: "queued" });
    this.dialog.push(entry);
    this.changed();
    return entry;
  }

  /** Oldest queued submission, if any; flips it to sent. */
  takeQueued(): DialogEntry | null {
    const own = this.own.find((o) => o.state === "queued");
    if (!own) return null;
    own.state = "sent";
    return own.entry;
  }

  /** Connection dropped: anything unacknowledged goes back in the queue. */
  requeueUnacked(): void {
    for (const own of this.own) {
      if (own.state === "sent") own.state = "queued";
    }
    this.changed();
  }

  hasQueued(): boolean {
    return this.own.some((o) => o.state === "queued");
  }
}
