"""Command line front end: run scenarios, replay and check transcripts.

Exit codes. run: 0 found, 3 not found, 4 budget spent. diff: 0 identical,
1 divergent. validate: 0 clean, 1 violations found. replay: 0 on success.
Every command exits 2 on bad input or a load failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .frames import FrameError, parse_mr_text
from .ontology import load_ontology, validate_document
from .runner import RunConfig, RunError, Runner, packaged_text, script_text
from .tracebus import PANEL_TITLES, TraceBus, TraceError, loads_transcript, panel

OUTCOME_EXIT = {"FOUND": 0, "NOT-FOUND": 3, "BUDGET": 4}


def _load(path: str):
    return loads_transcript(Path(path).read_bytes())


def _roster_of(transcript) -> dict:
    """Agent roles, read back out of the run's own scenario snapshot."""
    for ev in transcript.events:
        if ev.kind != "WORLD":
            continue
        payload = json.loads(ev.payload)
        if payload.get("what") == "scenario":
            roster = {name: role for name, _, role, _ in payload["robots"]}
            for human in payload["humans"]:
                roster[human] = "HUMAN"
            return roster
    raise TraceError("transcript has no scenario snapshot")


def _outcome_of(transcript) -> str | None:
    for ev in reversed(transcript.events):
        if ev.kind == "WORLD":
            payload = json.loads(ev.payload)
            if payload.get("what") == "outcome":
                return payload["outcome"]
    return None


def cmd_run(args) -> int:
    script = args.script
    if script and not script.startswith("packaged:"):
        script = Path(script).read_text()
    config = RunConfig(
        scenario=args.scenario, script=script_text(script), seed=args.seed,
        ticks=args.ticks, latency=args.latency, recent_n=args.recent_n,
        proposal_timeout=args.proposal_timeout)
    runner = Runner(config)
    outcome = runner.run()
    if args.out:
        Path(args.out).write_bytes(runner.transcript_bytes())
    print(f"{outcome} tick={runner.tick} events={len(runner.bus.events)}")
    return OUTCOME_EXIT[outcome]


def cmd_replay(args) -> int:
    transcript = _load(args.transcript)
    events = transcript.events
    if args.at_seq is not None:
        if args.at_seq < 0:
            raise TraceError(f"bad seq {args.at_seq}")
        events = [ev for ev in events if ev.seq <= args.at_seq]
    if args.panel:
        agent, _, kind = args.panel.partition("/")
        roster = _roster_of(transcript)
        if agent not in roster:
            raise TraceError(f"unknown agent {agent!r}")
        if kind not in PANEL_TITLES:
            raise TraceError(f"unknown panel kind {kind!r}")
        bus = TraceBus()
        bus.extend_from(events)
        recent_n = int(transcript.config.get("recent_n", 3))
        print(panel(bus, agent, kind, roster, recent_n=recent_n).text())
        return 0
    last_tick = events[-1].tick if events else 0
    outcome = _outcome_of(transcript) or "none"
    note = " (truncated)" if transcript.truncated else ""
    print(f"scenario={transcript.config.get('scenario', '?')} "
          f"events={len(events)} last-tick={last_tick} "
          f"outcome={outcome}{note}")
    return 0


def cmd_diff(args) -> int:
    left = _load(args.left)
    right = _load(args.right)
    if left.config != right.config:
        print("transcripts diverge at header")
        return 1
    for a, b in zip(left.events, right.events):
        if (a.tick, a.phase, a.agent, a.kind, a.payload, a.meta) != \
                (b.tick, b.phase, b.agent, b.kind, b.payload, b.meta):
            print(f"transcripts diverge at seq {a.seq}")
            return 1
    if len(left.events) != len(right.events):
        print(f"transcripts diverge at seq "
              f"{min(len(left.events), len(right.events)) + 1}")
        return 1
    print("transcripts identical")
    return 0


def cmd_validate(args) -> int:
    transcript = _load(args.transcript)
    graph = load_ontology(packaged_text("seed.ontology"))
    docs = violations = 0
    for ev in transcript.events:
        if ev.kind not in ("TMR", "VMR"):
            continue
        docs += 1
        try:
            doc = parse_mr_text(ev.payload)
        except FrameError as err:
            violations += 1
            print(f"seq {ev.seq} {ev.agent} {ev.kind}: unparsable: {err}")
            continue
        for violation in validate_document(doc, graph):
            violations += 1
            print(f"seq {ev.seq} {ev.agent} {ev.kind}: {violation}")
    print(f"checked {docs} documents, {violations} violations")
    return 1 if violations else 0


def cmd_serve(args) -> int:
    import uvicorn

    from .api import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port,
                log_level=args.log_level)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="underhood",
        description="Two-robot apartment search with inspectable reasoning.")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute a scenario headlessly")
    run_p.add_argument("--scenario", default="packaged:apartment",
                       help="scenario file, or packaged:<name>")
    run_p.add_argument("--script", default="",
                       help="dialog file, or packaged:<name>")
    run_p.add_argument("--seed", type=int, default=0)
    run_p.add_argument("--ticks", type=int, default=120)
    run_p.add_argument("--latency", type=int, default=1)
    run_p.add_argument("--recent-n", type=int, default=3, dest="recent_n")
    run_p.add_argument("--proposal-timeout", type=int, default=50,
                       dest="proposal_timeout")
    run_p.add_argument("--out", default="", help="write the transcript here")
    run_p.set_defaults(func=cmd_run)

    replay_p = sub.add_parser("replay", help="inspect a saved transcript")
    replay_p.add_argument("--transcript", required=True)
    replay_p.add_argument("--at-seq", type=int, default=None, dest="at_seq",
                          help="rebuild state as of this event")
    replay_p.add_argument("--panel", default="",
                          help="AGENT/KIND, e.g. UGV-U/THOUGHTS")
    replay_p.set_defaults(func=cmd_replay)

    diff_p = sub.add_parser("diff", help="compare two transcripts")
    diff_p.add_argument("left")
    diff_p.add_argument("right")
    diff_p.set_defaults(func=cmd_diff)

    val_p = sub.add_parser("validate",
                           help="check every document in a transcript")
    val_p.add_argument("transcript")
    val_p.set_defaults(func=cmd_validate)

    serve_p = sub.add_parser("serve", help="start the network gateway")
    serve_p.add_argument("--host", default="127.0.0.1")
    serve_p.add_argument("--port", type=int, default=8707)
    serve_p.add_argument("--log-level", default="info", dest="log_level")
    serve_p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (RunError, TraceError, FrameError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
