"""HTTP and socket gateway: create runs, drive them, stream their traces.

The socket speaks length-delimited text records, one per message:

    <KIND> <byte-length>\\n<JSON body>

Server records are EVENT, PANEL, ACK, and ERROR; the client sends UTTERANCE.
The opening ACK carries the protocol version. Panel records always hold the
core's own rendered text, so every client shows exactly what the engine
computed rather than a reconstruction.

Concurrency: one lock per run. Utterances and steps take it briefly, event
reads copy under it, and the auto driver holds it only for the duration of a
single tick, so submissions always join the next delivery and streams only
ever see completed phases.
"""

from __future__ import annotations

import asyncio
import itertools
import json
import threading
import time
from typing import Literal

from fastapi import FastAPI, HTTPException, Query, Response, WebSocket
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field
from starlette.websockets import WebSocketDisconnect

from .runner import RunConfig, RunError, Runner, script_text
from .team import TeamError
from .tracebus import EVENT_KINDS, PANEL_TITLES, panel

PROTOCOL_VERSION = 1
RECORD_KINDS = ("EVENT", "PANEL", "UTTERANCE", "ACK", "ERROR")


class ProtocolError(ValueError):
    pass


def encode_record(kind: str, body: dict) -> str:
    if kind not in RECORD_KINDS:
        raise ProtocolError(f"unknown record kind {kind!r}")
    payload = json.dumps(body, sort_keys=True, separators=(",", ":"),
                         ensure_ascii=False)
    return f"{kind} {len(payload.encode())}\n{payload}"


def decode_record(raw: str) -> tuple[str, dict]:
    head, sep, body = raw.partition("\n")
    kind, _, length = head.partition(" ")
    if not sep or kind not in RECORD_KINDS or not length.isdigit():
        raise ProtocolError(f"malformed record header {head!r}")
    if int(length) != len(body.encode()):
        raise ProtocolError("record length mismatch")
    try:
        parsed = json.loads(body)
    except json.JSONDecodeError:
        raise ProtocolError("record body is not valid JSON") from None
    if not isinstance(parsed, dict):
        raise ProtocolError("record body must be an object")
    return kind, parsed


def event_body(ev) -> dict:
    return {"seq": ev.seq, "tick": ev.tick, "phase": ev.phase,
            "agent": ev.agent, "kind": ev.kind, "payload": ev.payload,
            "meta": ev.meta}


def panel_body(view, kind: str) -> dict:
    return {"agent": view.agent, "role": view.role, "kind": kind,
            "title": view.title, "body": view.body, "text": view.text()}


class RunRequest(BaseModel):
    scenario: str = "packaged:apartment"
    script: str = ""
    mode: Literal["controlled", "auto"] = "controlled"
    seed: int = 0
    ticks: int = Field(120, ge=1)
    latency: int = Field(1, ge=1)
    recent_n: int = Field(3, ge=1)
    proposal_timeout: int = Field(50, ge=1)
    tick_ms: int = Field(0, ge=0, le=2000)


class UtteranceRequest(BaseModel):
    text: str
    human: str | None = None


class StepRequest(BaseModel):
    n: int = Field(1, ge=1, le=10_000)


class RunHandle:
    """One live run plus the lock everything synchronizes on."""

    def __init__(self, run_id: str, runner: Runner, mode: str, tick_ms: int):
        self.run_id = run_id
        self.runner = runner
        self.mode = mode
        self.tick_ms = tick_ms
        self.lock = threading.RLock()
        self.closed = False
        self._thread: threading.Thread | None = None

    def start_auto(self) -> None:
        self._thread = threading.Thread(target=self._drive, daemon=True)
        self._thread.start()

    def _drive(self) -> None:
        while True:
            with self.lock:
                if self.closed or self.runner.done:
                    return
                self.runner.step()
            if self.tick_ms:
                time.sleep(self.tick_ms / 1000)

    def submit(self, text: str, human: str | None) -> int:
        """Queue a human turn; returns the tick it will go out on."""
        with self.lock:
            if self.closed:
                raise ProtocolError("run is closed")
            self.runner.utter(text, human)
            accepted = self.runner.tick + 1
            if self.mode == "auto" and self.runner.done:
                # the driver thread has exited; carry the exchange ourselves
                self.runner.step()
                self.runner.step()
        return accepted

    def status(self) -> dict:
        r = self.runner
        with self.lock:
            return {"run": self.run_id, "mode": self.mode, "tick": r.tick,
                    "outcome": r.outcome, "done": r.done,
                    "events": len(r.bus.events), "closed": self.closed}


def create_app() -> FastAPI:
    app = FastAPI(title="underhood gateway", version=str(PROTOCOL_VERSION))
    # the console may be served from any static origin
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])
    runs: dict[str, RunHandle] = {}
    ids = itertools.count(1)

    def get_handle(run_id: str) -> RunHandle:
        handle = runs.get(run_id)
        if handle is None:
            raise HTTPException(404, f"no run {run_id!r}")
        return handle

    def writable(run_id: str) -> RunHandle:
        handle = get_handle(run_id)
        if handle.closed:
            raise HTTPException(409, f"run {run_id!r} is closed")
        return handle

    @app.post("/runs", status_code=201)
    def create_run(req: RunRequest) -> dict:
        if not req.scenario.startswith("packaged:"):
            raise HTTPException(400, "scenario must be a packaged: token")
        try:
            config = RunConfig(
                scenario=req.scenario, script=script_text(req.script),
                seed=req.seed, ticks=req.ticks, latency=req.latency,
                recent_n=req.recent_n, proposal_timeout=req.proposal_timeout)
            runner = Runner(config)
        except RunError as err:
            raise HTTPException(400, str(err)) from None
        run_id = f"r{next(ids)}"
        handle = RunHandle(run_id, runner, req.mode, req.tick_ms)
        runs[run_id] = handle
        if req.mode == "auto":
            handle.start_auto()
        return handle.status()

    @app.get("/runs")
    def list_runs() -> dict:
        return {"runs": [h.status() for h in runs.values()]}

    @app.get("/runs/{run_id}/status")
    def run_status(run_id: str) -> dict:
        return get_handle(run_id).status()

    @app.post("/runs/{run_id}/step")
    def step_run(run_id: str, req: StepRequest | None = None) -> dict:
        handle = writable(run_id)
        if handle.mode != "controlled":
            raise HTTPException(409, "auto runs step themselves")
        n = req.n if req else 1
        with handle.lock:
            for _ in range(n):
                handle.runner.step()
        return handle.status()

    @app.post("/runs/{run_id}/run")
    def finish_run(run_id: str) -> dict:
        handle = writable(run_id)
        if handle.mode != "controlled":
            raise HTTPException(409, "auto runs step themselves")
        with handle.lock:
            handle.runner.run()
        return handle.status()

    @app.post("/runs/{run_id}/utterance")
    def utterance(run_id: str, req: UtteranceRequest) -> dict:
        handle = writable(run_id)
        text = req.text.strip()
        if not text:
            raise HTTPException(422, "empty utterance")
        try:
            accepted = handle.submit(text, req.human)
        except (RunError, TeamError) as err:
            raise HTTPException(400, str(err)) from None
        return {"tick": accepted}

    @app.get("/runs/{run_id}/events")
    def events(run_id: str, after: int = 0, agent: str | None = None,
               kind: str | None = None,
               limit: int | None = Query(default=None, ge=1)) -> dict:
        handle = get_handle(run_id)
        with handle.lock:
            high = len(handle.runner.bus.events)
            if after < 0 or after > high:
                raise HTTPException(400, f"bad cursor {after}")
            if agent is not None and agent != "world" \
                    and agent not in handle.runner.roster:
                raise HTTPException(400, f"unknown agent {agent!r}")
            if kind is not None and kind not in EVENT_KINDS:
                raise HTTPException(400, f"unknown event kind {kind!r}")
            picked = handle.runner.bus.select(after, agent, kind)
            done = handle.runner.done
        if limit is not None:
            picked = picked[:limit]
        return {"events": [event_body(e) for e in picked],
                "cursor": high, "done": done}

    @app.get("/runs/{run_id}/panel")
    def panel_snapshot(run_id: str, agent: str, kind: str) -> dict:
        handle = get_handle(run_id)
        with handle.lock:
            roster = handle.runner.roster
            if agent not in roster:
                raise HTTPException(400, f"unknown agent {agent!r}")
            if kind not in PANEL_TITLES:
                raise HTTPException(400, f"unknown panel kind {kind!r}")
            view = panel(handle.runner.bus, agent, kind, roster,
                         recent_n=handle.runner.config.recent_n)
        return panel_body(view, kind)

    @app.get("/runs/{run_id}/transcript")
    def transcript(run_id: str) -> Response:
        handle = get_handle(run_id)
        with handle.lock:
            data = handle.runner.transcript_bytes()
        return Response(content=data, media_type="text/plain; charset=utf-8")

    @app.delete("/runs/{run_id}")
    def close_run(run_id: str) -> dict:
        handle = get_handle(run_id)
        with handle.lock:
            handle.closed = True
        return handle.status()

    @app.websocket("/runs/{run_id}/socket")
    async def socket(ws: WebSocket, run_id: str, cursor: int = 0) -> None:
        await ws.accept()
        handle = runs.get(run_id)
        if handle is None:
            await ws.send_text(encode_record(
                "ERROR", {"error": f"no run {run_id!r}"}))
            await ws.close()
            return
        with handle.lock:
            high = len(handle.runner.bus.events)
        if cursor < 0 or cursor > high:
            await ws.send_text(encode_record(
                "ERROR", {"error": f"bad cursor {cursor}"}))
            await ws.close()
            return
        status = handle.status()
        await ws.send_text(encode_record("ACK", {
            "v": PROTOCOL_VERSION, "run": run_id, "cursor": cursor,
            "tick": status["tick"], "outcome": status["outcome"]}))

        sent = cursor
        shown: dict[tuple, str] = {}

        async def push_new() -> None:
            nonlocal sent
            with handle.lock:
                fresh = handle.runner.bus.select(after=sent)
                views: dict = {}
                if fresh or not shown:  # panels only move when events do
                    roster = dict(handle.runner.roster)
                    recent_n = handle.runner.config.recent_n
                    views = {
                        (agent, kind): panel(handle.runner.bus, agent, kind,
                                             roster, recent_n=recent_n)
                        for agent, role in roster.items() if role != "HUMAN"
                        for kind in PANEL_TITLES
                    }
            for ev in fresh:
                await ws.send_text(encode_record("EVENT", event_body(ev)))
                sent = ev.seq
            for (agent, kind), view in views.items():
                text = view.text()
                if shown.get((agent, kind)) != text:
                    shown[(agent, kind)] = text
                    await ws.send_text(encode_record(
                        "PANEL", panel_body(view, kind)))

        async def pump_out() -> None:
            announced = False
            while True:
                # status first: if done here, the outcome event is already
                # in the bus, so the push below puts it on the wire before
                # the completion ACK goes out.
                status = handle.status()
                await push_new()
                if status["done"] and not announced:
                    announced = True
                    await ws.send_text(encode_record("ACK", {
                        "done": True, "outcome": status["outcome"],
                        "tick": status["tick"]}))
                await asyncio.sleep(0.02)

        # The receive loop is the handler body on purpose: a disconnect must
        # unwind it without any further awaits, or test harnesses that cancel
        # the session right after closing see the handler as crashed.
        pusher = asyncio.ensure_future(pump_out())
        pusher.add_done_callback(
            lambda t: t.cancelled() or t.exception())  # nothing awaits it
        try:
            while True:
                try:
                    raw = await ws.receive_text()
                except WebSocketDisconnect:
                    break
                try:
                    kind, body = decode_record(raw)
                    if kind != "UTTERANCE":
                        raise ProtocolError(
                            f"client records must be UTTERANCE, not {kind}")
                    text = str(body.get("text", "")).strip()
                    if not text:
                        raise ProtocolError("empty utterance")
                    human = body.get("human")
                    accepted = handle.submit(text, human)
                    await ws.send_text(encode_record(
                        "ACK", {"tick": accepted}))
                except (ProtocolError, RunError, TeamError) as err:
                    await ws.send_text(encode_record(
                        "ERROR", {"error": str(err)}))
        finally:
            pusher.cancel()

    return app
