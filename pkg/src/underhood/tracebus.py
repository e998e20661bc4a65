"""Append-only trace of everything the agents think, say, see, and do.

Every run appends TraceEvents to one bus in (tick, phase) order; panels are
pure projections over the event list, so a reconstructed bus shows exactly
the panels the live run showed. Transcripts serialize the bus with
length-prefixed payloads: byte-identical runs produce byte-identical files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

PHASES = ("SENSE", "COGNIZE", "ACT", "DELIVER")

EVENT_KINDS = ("TMR", "VMR", "THOUGHT", "AGENDA", "MESSAGE", "WORLD")

PANEL_TITLES = {
    "TMRS-RECENT": "TMRs (Recent)",
    "VMRS-RECENT": "VMRs (Recent)",
    "THOUGHTS": "Thoughts",
    "AGENDA-FILTERED": "Agenda (Filtered)",
}

MAGIC = "UNDERHOOD-TRANSCRIPT"
VERSION = 1


class TraceError(ValueError):
    """Bad append ordering or a malformed transcript."""


@dataclass(frozen=True)
class TraceEvent:
    seq: int
    tick: int
    phase: str
    agent: str
    kind: str
    payload: str
    meta: dict = field(default_factory=dict)


def _check_token(label: str, value: str) -> None:
    if not value or any(c.isspace() for c in value):
        raise TraceError(f"{label} must be a non-empty token, got {value!r}")


class TraceBus:
    """Ordered, append-only event log with simple change listeners."""

    def __init__(self) -> None:
        self.events: list[TraceEvent] = []
        self.listeners: list = []

    def append(self, tick: int, phase: str, agent: str, kind: str,
               payload: str, meta: dict | None = None) -> TraceEvent:
        if phase not in PHASES:
            raise TraceError(f"unknown phase {phase!r}")
        if kind not in EVENT_KINDS:
            raise TraceError(f"unknown event kind {kind!r}")
        _check_token("agent", agent)
        if self.events:
            last = self.events[-1]
            if (tick, PHASES.index(phase)) < (last.tick, PHASES.index(last.phase)):
                raise TraceError(
                    f"append at tick {tick} {phase} after "
                    f"tick {last.tick} {last.phase}"
                )
        ev = TraceEvent(len(self.events) + 1, tick, phase, agent, kind,
                        payload, dict(meta or {}))
        self.events.append(ev)
        for listener in list(self.listeners):
            listener(ev)
        return ev

    def extend_from(self, events) -> None:
        """Rebuild from stored events (replay); seq continuity is enforced."""
        for ev in events:
            if ev.seq != len(self.events) + 1:
                raise TraceError(f"replay gap: expected seq "
                                 f"{len(self.events) + 1}, got {ev.seq}")
            self.events.append(ev)

    def select(self, after: int = 0, agent: str | None = None,
               kind: str | None = None) -> list:
        out = []
        for ev in self.events:
            if ev.seq <= after:
                continue
            if agent is not None and ev.agent != agent:
                continue
            if kind is not None and ev.kind != kind:
                continue
            out.append(ev)
        return out


# --- panels -------------------------------------------------------------------


@dataclass(frozen=True)
class PanelView:
    agent: str
    role: str
    title: str
    body: str

    def text(self) -> str:
        return f"{self.agent} [{self.role}]\n{self.title}\n{self.body}"


def _strip_doc_header(payload: str) -> str:
    return payload.partition("\n")[2]


def panel(bus: TraceBus, agent: str, kind: str, roster: dict,
          recent_n: int = 3) -> PanelView:
    """Project one agent panel from the trace. Pure over bus.events."""
    if kind not in PANEL_TITLES:
        raise TraceError(f"unknown panel kind {kind!r}")
    role = roster.get(agent)
    if role is None:
        raise TraceError(f"unknown agent {agent!r}")
    if kind in ("TMRS-RECENT", "VMRS-RECENT"):
        doc_kind = kind[:3]
        docs = [ev.payload for ev in bus.select(agent=agent, kind=doc_kind)]
        body = "\n\n".join(_strip_doc_header(p) for p in docs[-recent_n:])
    elif kind == "THOUGHTS":
        body = "\n".join(
            ev.payload for ev in bus.select(agent=agent, kind="THOUGHT")
        )
    else:  # AGENDA-FILTERED
        agendas = bus.select(agent=agent, kind="AGENDA")
        body = agendas[-1].payload if agendas else ""
    return PanelView(agent, role, PANEL_TITLES[kind], body)


# --- transcripts ---------------------------------------------------------------


@dataclass
class Transcript:
    config: dict
    events: list
    truncated: bool = False


def _canon_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def dumps_transcript(config: dict, events) -> bytes:
    """Serialize header plus length-prefixed records. Deterministic bytes."""
    out = [f"{MAGIC} {VERSION} {_canon_json(config)}\n".encode()]
    for ev in events:
        payload = ev.payload.encode()
        head = (f"E {ev.seq} {ev.tick} {ev.phase} {ev.agent} {ev.kind} "
                f"{len(payload)} {_canon_json(ev.meta)}\n")
        out.append(head.encode())
        out.append(payload)
        out.append(b"\n")
    return b"".join(out)


def loads_transcript(data: bytes) -> Transcript:
    """Parse a transcript.

    Structural damage raises TraceError naming the record and byte line.
    A record cut off by end-of-file is not an error: parsing stops at the
    last complete record and the result is marked truncated.
    """
    nl = data.find(b"\n")
    if nl < 0:
        raise TraceError("line 1: missing transcript header")
    header = data[:nl].decode("utf-8", errors="replace")
    parts = header.split(" ", 2)
    if len(parts) != 3 or parts[0] != MAGIC:
        raise TraceError(f"line 1: bad transcript header {header!r}")
    if parts[1] != str(VERSION):
        raise TraceError(f"line 1: unsupported transcript version {parts[1]!r}")
    try:
        config = json.loads(parts[2])
    except json.JSONDecodeError as exc:
        raise TraceError(f"line 1: bad config json: {exc}") from exc

    events: list[TraceEvent] = []
    pos = nl + 1
    line = 2
    truncated = False
    while pos < len(data):
        head_end = data.find(b"\n", pos)
        if head_end < 0:
            truncated = True  # record head cut off mid-line
            break
        head = data[pos:head_end].decode("utf-8", errors="replace")
        fields = head.split(" ", 7)
        where = f"record {len(events) + 1} (line {line})"
        if len(fields) != 8 or fields[0] != "E":
            raise TraceError(f"{where}: bad record head {head!r}")
        try:
            seq, tick, paylen = int(fields[1]), int(fields[2]), int(fields[6])
            phase, agent, kind = fields[3], fields[4], fields[5]
            meta = json.loads(fields[7])
        except (ValueError, json.JSONDecodeError) as exc:
            raise TraceError(f"{where}: {exc}") from exc
        if seq != len(events) + 1:
            raise TraceError(f"{where}: sequence gap, expected "
                             f"{len(events) + 1} got {seq}")
        if phase not in PHASES or kind not in EVENT_KINDS:
            raise TraceError(f"{where}: bad phase or kind")
        body_start = head_end + 1
        body_end = body_start + paylen
        if body_end + 1 > len(data):
            truncated = True  # payload (or its newline) cut off
            break
        if data[body_end:body_end + 1] != b"\n":
            raise TraceError(f"{where}: payload length mismatch")
        payload = data[body_start:body_end].decode()
        events.append(TraceEvent(seq, tick, phase, agent, kind, payload, meta))
        line += 2 + payload.count("\n")
        pos = body_end + 1
    return Transcript(config, events, truncated)
