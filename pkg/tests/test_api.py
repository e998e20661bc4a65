"""Gateway tests over the HTTP surface and the socket record protocol."""

import json
import time

import pytest
from fastapi.testclient import TestClient

from test_cognition import ASK_FEATURES, FEATURES, REQUEST, UNLOCK
from underhood.api import ProtocolError, create_app, decode_record, encode_record
from underhood.runner import RunConfig, Runner, packaged_text
from underhood.tracebus import TraceBus, dumps_transcript, loads_transcript

SEED_SCRIPT = {"script": "packaged:seed"}


@pytest.fixture()
def client():
    with TestClient(create_app()) as c:
        yield c


def start(client, **body):
    resp = client.post("/runs", json=body)
    assert resp.status_code == 201, resp.text
    return resp.json()


def finish(client, run_id):
    resp = client.post(f"/runs/{run_id}/run")
    assert resp.status_code == 200, resp.text
    return resp.json()


# --- record codec -----------------------------------------------------------------


def test_record_roundtrip():
    raw = encode_record("ACK", {"tick": 7})
    assert raw == 'ACK 10\n{"tick":7}'
    assert decode_record(raw) == ("ACK", {"tick": 7})


def test_record_length_counts_bytes():
    raw = encode_record("ERROR", {"error": "café"})
    head, _, body = raw.partition("\n")
    assert body == '{"error":"café"}'
    assert head == "ERROR 17"  # 16 chars, the accent takes two bytes
    assert decode_record(raw) == ("ERROR", {"error": "café"})


@pytest.mark.parametrize("raw", [
    "ACK 2{}",
    "NOPE 2\n{}",
    "ACK x\n{}",
    "ACK 3\n{}",
    "ACK 2\n[]",
    "ACK 7\nnot json",
])
def test_record_rejects(raw):
    with pytest.raises(ProtocolError):
        decode_record(raw)


# --- run lifecycle ----------------------------------------------------------------


def test_create_and_finish_scripted_run(client):
    made = start(client, **SEED_SCRIPT)
    assert made["run"] == "r1"
    assert made["tick"] == 0
    assert made["outcome"] is None
    state = finish(client, "r1")
    assert state["outcome"] == "FOUND"
    assert state["done"] is True
    status = client.get("/runs/r1/status").json()
    assert status == state
    listed = client.get("/runs").json()
    assert [r["run"] for r in listed["runs"]] == ["r1"]


def test_stepping_controlled_run(client):
    start(client, **SEED_SCRIPT)
    one = client.post("/runs/r1/step").json()
    assert one["tick"] == 1
    more = client.post("/runs/r1/step", json={"n": 5}).json()
    assert more["tick"] == 6


def test_transcript_matches_in_process_run(client):
    start(client, **SEED_SCRIPT)
    finish(client, "r1")
    wire = client.get("/runs/r1/transcript").content
    local = Runner(RunConfig(script=packaged_text("seed.dialog")))
    local.run()
    assert wire == local.transcript_bytes()


def test_bad_requests(client):
    assert client.post("/runs", json={"scenario": "/etc/passwd"}).status_code == 400
    assert client.post("/runs", json={"scenario": "packaged:atlantis"}).status_code == 400
    assert client.post("/runs", json={"script": "packaged:nope"}).status_code == 400
    assert client.post("/runs", json={"mode": "warp"}).status_code == 422
    assert client.get("/runs/r9/status").status_code == 404
    assert client.post("/runs/r9/step").status_code == 404


def test_closed_run_rejects_writes(client):
    start(client, **SEED_SCRIPT)
    closed = client.request("DELETE", "/runs/r1").json()
    assert closed["closed"] is True
    assert client.post("/runs/r1/step").status_code == 409
    assert client.post("/runs/r1/utterance",
                       json={"text": "hello"}).status_code == 409
    # reads stay open for post-mortems
    assert client.get("/runs/r1/status").status_code == 200


def test_auto_run_drives_itself(client):
    start(client, mode="auto", **SEED_SCRIPT)
    deadline = time.time() + 10
    while time.time() < deadline:
        status = client.get("/runs/r1/status").json()
        if status["done"]:
            break
        time.sleep(0.02)
    assert status["outcome"] == "FOUND"
    assert client.post("/runs/r1/step").status_code == 409


# --- utterances -------------------------------------------------------------------


def test_interactive_run_over_http(client):
    start(client)
    accepted = client.post("/runs/r1/utterance", json={"text": REQUEST})
    assert accepted.status_code == 200
    assert accepted.json() == {"tick": 1}
    answers = [("look like", FEATURES), ("last see", UNLOCK)]
    cursor = 0
    while True:
        state = client.post("/runs/r1/step").json()
        got = client.get(f"/runs/r1/events?after={cursor}").json()
        cursor = got["cursor"]
        for ev in got["events"]:
            if (answers and ev["kind"] == "MESSAGE" and ev["agent"] == "UGV-U"
                    and answers[0][0] in ev["payload"]):
                client.post("/runs/r1/utterance",
                            json={"text": answers.pop(0)[1]})
        if state["done"]:
            break
    assert state["outcome"] == "FOUND"
    local = Runner(RunConfig(script=packaged_text("seed.dialog")))
    local.run()
    body = dumps_transcript({}, local.bus.events)
    wire = loads_transcript(client.get("/runs/r1/transcript").content)
    assert dumps_transcript({}, wire.events) == body


def test_utterance_validation(client):
    start(client)
    assert client.post("/runs/r1/utterance",
                       json={"text": "   "}).status_code == 422
    assert client.post("/runs/r1/utterance",
                       json={"text": "hi", "human": "BOB"}).status_code == 400


def test_utterance_after_found_gets_unhandled_thought(client):
    start(client, mode="auto", **SEED_SCRIPT)
    deadline = time.time() + 10
    while time.time() < deadline:
        if client.get("/runs/r1/status").json()["done"]:
            break
        time.sleep(0.02)
    end = client.get("/runs/r1/status").json()
    assert end["outcome"] == "FOUND"
    sent = client.post("/runs/r1/utterance", json={"text": REQUEST})
    assert sent.status_code == 200
    got = client.get(f"/runs/r1/events?after={end['events']}").json()
    kinds = {ev["kind"] for ev in got["events"]}
    assert kinds == {"MESSAGE", "TMR", "THOUGHT"}
    assert any("don't have a way to handle" in ev["payload"]
               for ev in got["events"])


# --- event streaming over HTTP ------------------------------------------------------


def test_event_cursor_concatenation(client):
    start(client, **SEED_SCRIPT)
    finish(client, "r1")
    whole = client.get("/runs/r1/events").json()
    assert whole["done"] is True
    seqs = [ev["seq"] for ev in whole["events"]]
    assert seqs == list(range(1, len(seqs) + 1))
    mid = len(seqs) // 2
    first = client.get(f"/runs/r1/events?after=0&limit={mid}").json()
    rest = client.get(f"/runs/r1/events?after={mid}").json()
    assert first["events"] + rest["events"] == whole["events"]


def test_event_filters_and_errors(client):
    start(client, **SEED_SCRIPT)
    finish(client, "r1")
    thoughts = client.get("/runs/r1/events?agent=UGV-U&kind=THOUGHT").json()
    assert thoughts["events"]
    assert all(ev["agent"] == "UGV-U" and ev["kind"] == "THOUGHT"
               for ev in thoughts["events"])
    assert client.get("/runs/r1/events?agent=HAL").status_code == 400
    assert client.get("/runs/r1/events?kind=GOSSIP").status_code == 400
    assert client.get("/runs/r1/events?after=-1").status_code == 400
    assert client.get("/runs/r1/events?after=999999").status_code == 400


def test_panel_snapshot_and_errors(client):
    start(client, **SEED_SCRIPT)
    finish(client, "r1")
    got = client.get("/runs/r1/panel?agent=UGV-U&kind=THOUGHTS").json()
    assert got["title"] == "Thoughts"
    assert got["text"].startswith("UGV-U [LEADER]\nThoughts\n")
    assert "I found" in got["body"]
    assert client.get("/runs/r1/panel?agent=HAL&kind=THOUGHTS").status_code == 400
    assert client.get("/runs/r1/panel?agent=UGV-U&kind=NOPE").status_code == 400


# --- the socket -------------------------------------------------------------------


def recv_record(ws):
    return decode_record(ws.receive_text())


def collect_until_done(ws, events, panels):
    """Read records until the completion ACK; fill events and panels."""
    while True:
        kind, body = recv_record(ws)
        if kind == "EVENT":
            events.append(body)
        elif kind == "PANEL":
            panels[(body["agent"], body["kind"])] = body["text"]
        elif kind == "ACK" and body.get("done"):
            return body
        else:
            raise AssertionError(f"unexpected record {kind}: {body}")


def test_socket_streams_whole_auto_run(client):
    start(client, mode="auto", **SEED_SCRIPT)
    events, panels = [], {}
    with client.websocket_connect("/runs/r1/socket") as ws:
        kind, hello = recv_record(ws)
        assert kind == "ACK"
        assert hello["v"] == 1
        assert hello["run"] == "r1"
        closing = collect_until_done(ws, events, panels)
    assert closing["outcome"] == "FOUND"
    assert [e["seq"] for e in events] == list(range(1, len(events) + 1))
    assert '"what":"outcome"' in events[-1]["payload"]
    assert len(panels) == 8
    state = client.get("/runs/r1/status").json()
    assert state["events"] == len(events)
    # the pushed panels match the HTTP snapshots at end of run
    for (agent, kind), text in panels.items():
        snap = client.get(f"/runs/r1/panel?agent={agent}&kind={kind}").json()
        assert snap["text"] == text


def test_socket_cursor_resume(client):
    start(client, **SEED_SCRIPT)
    backlog = client.post("/runs/r1/step", json={"n": 6}).json()["events"]
    head = []
    with client.websocket_connect("/runs/r1/socket") as ws:
        kind, hello = recv_record(ws)
        assert kind == "ACK"
        while len(head) < backlog:
            kind, body = recv_record(ws)
            if kind == "EVENT":
                head.append(body)
    finish(client, "r1")
    tail = []
    with client.websocket_connect(
            f"/runs/r1/socket?cursor={len(head)}") as ws:
        assert recv_record(ws)[0] == "ACK"
        collect_until_done(ws, tail, {})
    seqs = [e["seq"] for e in head] + [e["seq"] for e in tail]
    assert seqs == list(range(1, len(seqs) + 1))
    whole = client.get("/runs/r1/events").json()["events"]
    assert [e["seq"] for e in whole] == seqs


def test_socket_utterance_roundtrip(client):
    start(client)
    with client.websocket_connect("/runs/r1/socket") as ws:
        assert recv_record(ws)[0] == "ACK"
        ws.send_text(encode_record("UTTERANCE", {"text": REQUEST}))
        client.post("/runs/r1/step", json={"n": 3})
        saw_ack = saw_question = False
        while not (saw_ack and saw_question):
            kind, body = recv_record(ws)
            if kind == "ACK" and not body.get("done"):
                assert body == {"tick": 1}
                saw_ack = True
            elif kind == "EVENT" and body["kind"] == "MESSAGE":
                if ASK_FEATURES in body["payload"]:
                    saw_question = True
        assert saw_ack and saw_question


def next_error(ws):
    while True:
        kind, body = recv_record(ws)
        if kind == "ERROR":
            return body["error"]


def test_socket_rejects_bad_client_records(client):
    start(client)
    with client.websocket_connect("/runs/r1/socket") as ws:
        assert recv_record(ws)[0] == "ACK"
        ws.send_text("garbage")
        assert "malformed" in next_error(ws)
        ws.send_text(encode_record("UTTERANCE", {"text": "  "}))
        assert "empty" in next_error(ws)
        ws.send_text(encode_record("ACK", {"tick": 1}))
        assert "must be UTTERANCE" in next_error(ws)


def test_socket_bad_run_and_cursor(client):
    with client.websocket_connect("/runs/r9/socket") as ws:
        kind, body = recv_record(ws)
        assert kind == "ERROR"
        assert "no run" in body["error"]
    start(client)
    with client.websocket_connect("/runs/r1/socket?cursor=42") as ws:
        kind, body = recv_record(ws)
        assert kind == "ERROR"
        assert "bad cursor" in body["error"]
