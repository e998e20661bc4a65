/** Wire shapes mirrored from the gateway, plus the console's own view types. */

export type RecordKind = "EVENT" | "PANEL" | "UTTERANCE" | "ACK" | "ERROR";

/** One trace event, exactly as the gateway serializes it. */
export interface EventBody {
  seq: number;
  tick: number;
  phase: string;
  agent: string;
  kind: string;
  payload: string;
  meta: Record<string, unknown>;
}

/** One rendered panel. `body` is display text the console must not touch. */
export interface PanelBody {
  agent: string;
  role: string;
  kind: string;
  title: string;
  body: string;
  text: string;
}

/** Run status as returned by every run-level HTTP endpoint. */
export interface RunStatus {
  run: string;
  mode: string;
  tick: number;
  outcome: string | null;
  done: boolean;
  events: number;
  closed: boolean;
}

export interface AgendaItem {
  id: string;
  status: string;
  negative: boolean;
}

export interface PanelSelection {
  agent: string;
  kind: string;
  pinned: boolean;
}

/**
 * One line of the dialog window. Entries from delivered MESSAGE events have
 * a tick; the operator's own submissions start pending and pick up their
 * delivery tick from the ACK.
 */
export interface DialogEntry {
  speaker: string;
  to: string;
  text: string;
  tick: number | null;
  pending: boolean;
  error: string | null;
}

export const PANEL_KINDS = [
  "TMRS-RECENT",
  "VMRS-RECENT",
  "THOUGHTS",
  "AGENDA-FILTERED",
] as const;
