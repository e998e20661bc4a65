/**
 * Length-delimited text records, the socket's only framing:
 *
 *     <KIND> <byte-length>\n<JSON object>
 *
 * where the length counts the UTF-8 bytes of the JSON body. Every incoming
 * frame must parse cleanly or the whole record is rejected; a stream that
 * needs guesswork is a stream we refuse to display.
 */

import type { RecordKind } from "./types.js";

const KINDS: ReadonlySet<string> = new Set([
  "EVENT", "PANEL", "UTTERANCE", "ACK", "ERROR",
]);

const encoder = new TextEncoder();

export class ProtocolError extends Error {}

export function byteLength(text: string): number {
  return encoder.encode(text).length;
}

export function encodeRecord(kind: RecordKind, body: object): string {
  const payload = JSON.stringify(body);
  return `${kind} ${byteLength(payload)}\n${payload}`;
}

export function decodeRecord(raw: string): [RecordKind, Record<string, unknown>] {
  const cut = raw.indexOf("\n");
  if (cut < 0) {
    throw new ProtocolError("record has no header line");
  }
  const head = raw.slice(0, cut);
  const body = raw.slice(cut + 1);
  const parts = head.split(" ");
  if (parts.length !== 2) {
    throw new ProtocolError(`malformed record header ${head.slice(0, 40)}`);
  }
  const [kind, length] = parts as [string, string];
  if (!KINDS.has(kind)) {
    throw new ProtocolError(`unknown record kind ${kind}`);
  }
  if (!/^[0-9]+$/.test(length)) {
    throw new ProtocolError(`bad record length ${length}`);
  }
  if (byteLength(body) !== Number(length)) {
    throw new ProtocolError(
      `record length ${length} does not match body (${byteLength(body)} bytes)`);
  }
  let parsed: unknown;
  try {
    parsed = JSON.parse(body);
  } catch {
    throw new ProtocolError("record body is not valid JSON");
  }
  if (parsed === null || typeof parsed !== "object" || Array.isArray(parsed)) {
    throw new ProtocolError("record body must be a JSON object");
  }
  return [kind as RecordKind, parsed as Record<string, unknown>];
}
