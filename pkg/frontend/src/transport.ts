/**
 * One socket to the gateway, resumed by cursor.
 *
 * Reconnects always pass the store's high-water seq, so the server replays
 * only what this client has not applied; the store's seq guard makes any
 * overlap harmless (a dropped and resumed session converges on the same
 * state as an uninterrupted one). Utterances are queued locally while the
 * link is down and flushed on reconnect. That makes delivery at-least-once:
 * if the link dies between the server applying an utterance and its ACK
 * arriving, the flush will submit it again.
 */

import { decodeRecord, encodeRecord, ProtocolError } from "./records.js";
import type { Store } from "./store.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: (() => void) | null;
  onmessage: ((data: string) => void) | null;
  onclose: (() => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export type ConnectionState = "idle" | "connecting" | "open" | "closed";

export interface ConnectionOptions {
  /** Reconnect this many ms after an unexpected close; 0 disables. */
  reconnectDelayMs?: number;
}

export class Connection {
  state: ConnectionState = "idle";

  private socket: SocketLike | null = null;
  private handshaken = false;
  private cursorOverride: number | null = null;
  private resubscribed = false;
  private closedOnPurpose = false;
  private timer: ReturnType<typeof setTimeout> | null = null;

  constructor(
    private readonly socketUrl: (cursor: number) => string,
    private readonly store: Store,
    private readonly factory: SocketFactory,
    private readonly opts: ConnectionOptions = {},
  ) {}

  connect(): void {
    this.closedOnPurpose = false;
    this.handshaken = false;
    this.state = "connecting";
    const cursor = this.cursorOverride ?? this.store.highSeq;
    this.cursorOverride = null;
    const socket = this.factory(this.socketUrl(cursor));
    this.socket = socket;
    socket.onopen = () => {
      this.state = "open";
    };
    socket.onmessage = (data) => this.receive(data);
    socket.onclose = () => {
      if (this.socket !== socket) return; // superseded
      this.socket = null;
      this.state = "closed";
      this.store.requeueUnacked();
      if (!this.closedOnPurpose && this.opts.reconnectDelayMs) {
        this.timer = setTimeout(
          () => this.connect(), this.opts.reconnectDelayMs);
      }
    };
  }

  private receive(raw: string): void {
    let kind;
    let body;
    try {
      [kind, body] = decodeRecord(raw);
    } catch (err) {
      if (!(err instanceof ProtocolError)) throw err;
      this.store.notice(`dropped a malformed frame: ${err.message}`);
      return;
    }
    if (!this.handshaken) {
      if (kind === "ERROR" && !this.resubscribed && this.store.highSeq > 0) {
        // stale cursor: resubscribe once from the beginning; the seq
        // guard drops everything already applied
        this.resubscribed = true;
        this.cursorOverride = 0;
        this.store.notice(
          `resubscribing from the start: ${String(body.error ?? "")}`);
        this.reconnect();
        return;
      }
      if (kind === "ACK" && "v" in body) {
        this.handshaken = true;
        this.resubscribed = false;
        this.store.apply(kind, body);
        this.flush();
        return;
      }
    }
    this.store.apply(kind, body);
  }

  /** The dialog box path: queue, then send everything sendable. */
  submit(text: string): void {
    const speaker = this.store.world.scenario?.humans[0] ?? "HUMAN";
    this.store.queueOwn(speaker, text);
    this.flush();
  }

  private flush(): void {
    if (this.state !== "open" || !this.handshaken || !this.socket) return;
    for (;;) {
      const entry = this.store.takeQueued();
      if (!entry) return;
      this.socket.send(encodeRecord("UTTERANCE", { text: entry.text }));
    }
  }

  reconnect(): void {
    const socket = this.socket;
    this.socket = null;
    if (socket) socket.close();
    // the detached socket's close handler is a no-op, requeue here
    this.store.requeueUnacked();
    this.connect();
  }

  close(): void {
    this.closedOnPurpose = true;
    if (this.timer !== null) clearTimeout(this.timer);
    const socket = this.socket;
    this.socket = null;
    this.state = "closed";
    if (socket) socket.close();
  }
}
