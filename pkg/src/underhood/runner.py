"""Deterministic tick scheduler that turns a scenario plus a dialog into a run.

Each tick passes four barriers in order. SENSE hands the previous tick's
buffered scans and zone completions to the agents. COGNIZE delivers due
messages, lets every agent interpret its inbox and advance its agenda, and
snapshots agendas that changed. ACT steps the world simulation. DELIVER
flushes queued utterances onto the wire and then evaluates the dialog
script, whose turns are submitted exactly like live typed input, so scripted
and interactive runs share one code path and identical configs yield
byte-identical transcripts.
"""

from __future__ import annotations

import importlib.resources as resources
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from .cognition import (
    Agent,
    CancelSearch,
    EmitDoc,
    EmitThought,
    Found,
    Say,
    StartSearch,
)
from .frames import render_document
from .interpreter import load_lexicon, load_thoughts
from .ontology import load_ontology
from .team import TeamFabric
from .tracebus import TraceBus, dumps_transcript
from .world import World, load_scenario, to_units

OUTCOMES = ("FOUND", "NOT-FOUND", "BUDGET")


class RunError(ValueError):
    pass


def packaged_text(name: str) -> str:
    return resources.files("underhood").joinpath(f"fixtures/{name}").read_text()


def scenario_from_token(token: str):
    """'packaged:<name>' loads a bundled scenario; anything else is a path."""
    if token.startswith("packaged:"):
        name = token.partition(":")[2]
        try:
            text = packaged_text(f"{name}.scenario")
        except FileNotFoundError:
            raise RunError(f"no packaged scenario {name!r}") from None
    else:
        path = Path(token)
        if not path.is_file():
            raise RunError(f"scenario file not found: {token}")
        text = path.read_text()
    return load_scenario(text)


def script_text(script: str) -> str:
    """Inline script text, or 'packaged:<name>' for a bundled dialog."""
    if script.startswith("packaged:"):
        name = script.partition(":")[2]
        try:
            return packaged_text(f"{name}.dialog")
        except FileNotFoundError:
            raise RunError(f"no packaged dialog {name!r}") from None
    return script


# --- dialog scripts -------------------------------------------------------------


@dataclass(frozen=True)
class DialogTrigger:
    say: str
    at_tick: int = 0  # 0 means reactive
    watch_agent: str = ""
    needle: str = ""

    @property
    def reactive(self) -> bool:
        return self.at_tick == 0


_AFTER_RE = re.compile(
    r'AFTER-EVENT MESSAGE (\S+) CONTAINS "([^"]+)" SAY (\S.*)')
_AT_RE = re.compile(r"AT-TICK ([0-9]+) SAY (\S.*)")


def parse_dialog(text: str) -> list:
    """Triggers fire strictly in file order: a reactive trigger blocks the
    ones after it until its message appears."""
    triggers: list = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        m = _AT_RE.fullmatch(line)
        if m:
            tick = int(m.group(1))
            if tick < 1:
                raise RunError(f"line {lineno}: tick must be positive")
            triggers.append(DialogTrigger(say=m.group(2), at_tick=tick))
            continue
        m = _AFTER_RE.fullmatch(line)
        if m:
            triggers.append(DialogTrigger(
                say=m.group(3), watch_agent=m.group(1), needle=m.group(2)))
            continue
        raise RunError(f"line {lineno}: cannot parse dialog line {raw!r}")
    return triggers


# --- configuration ---------------------------------------------------------------


@dataclass
class RunConfig:
    scenario: str = "packaged:apartment"
    script: str = ""
    seed: int = 0  # echoed for provenance; the pipeline itself is RNG-free
    ticks: int = 120
    latency: int = 1
    recent_n: int = 3
    proposal_timeout: int = 50

    def echo(self) -> dict:
        return {
            "scenario": self.scenario,
            "script": self.script,
            "seed": self.seed,
            "ticks": self.ticks,
            "latency": self.latency,
            "recent_n": self.recent_n,
            "proposal_timeout": self.proposal_timeout,
        }


def _j(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _units3(pos_centi: tuple) -> list:
    return [to_units(c) for c in pos_centi]


# --- the runner -------------------------------------------------------------------


class Runner:
    """One run: world, fabric, agents, trace. Stepable from outside."""

    def __init__(self, config: RunConfig, scenario=None):
        self.config = config
        if config.ticks < 1:
            raise RunError("tick budget must be positive")
        graph = load_ontology(packaged_text("seed.ontology"))
        lexicon = load_lexicon(packaged_text("seed.lexicon"))
        thoughts = load_thoughts(packaged_text("seed.thoughts"))
        self.scenario = scenario or scenario_from_token(config.scenario)
        self.world = World(self.scenario)
        self.fabric = TeamFabric(list(self.scenario.robots),
                                 self.scenario.humans, config.latency)
        self.agents = {
            name: Agent(name, spec.role, lexicon, thoughts, graph,
                        self.scenario, config.proposal_timeout)
            for name, spec in self.scenario.robots.items()
        }
        self.roster = {name: spec.role
                       for name, spec in self.scenario.robots.items()}
        for human in self.scenario.humans:
            self.roster[human] = "HUMAN"
        self.triggers = parse_dialog(config.script)
        if self.triggers and not self.scenario.humans:
            raise RunError("dialog script needs a human in the scenario")
        self.bus = TraceBus()
        self.tick = 0
        self.outcome: str | None = None
        self._fired = 0
        self._pending_scans: list = []
        self._pending_zone_done: list = []
        self._begin()

    # -- setup --

    def _scenario_payload(self) -> dict:
        sc = self.scenario
        return {
            "what": "scenario",
            "token": self.config.scenario,
            "name": sc.name,
            "size": [to_units(sc.size[0]), to_units(sc.size[1])],
            "rooms": [[name, to_units(r.x0), to_units(r.z0),
                       to_units(r.x1), to_units(r.z1)]
                      for name, r in sc.rooms.items()],
            "zones": [[z.name, z.room, z.aerial,
                       [[to_units(x), to_units(zz)] for x, zz in z.waypoints]]
                      for z in sc.zones.values()],
            "objects": [[o.obj_id, o.concept,
                         _units3(o.pos) if o.pos else None, o.landmark]
                        for o in sc.objects.values()],
            "robots": [[r.name, r.kind, r.role, _units3(r.station)]
                       for r in sc.robots.values()],
            "humans": list(sc.humans),
        }

    def _begin(self) -> None:
        self.bus.append(0, "SENSE", "world", "WORLD",
                        _j(self._scenario_payload()))
        for name, agent in self.agents.items():
            self.bus.append(0, "SENSE", name, "WORLD", _j(agent.seed_payload()))
        self._run_script([])

    # -- external input (interactive runs) --

    def utter(self, text: str, human: str | None = None) -> None:
        """A live human turn; it joins the next flush like a scripted one."""
        if human is None:
            if not self.scenario.humans:
                raise RunError("no human in this scenario")
            human = self.scenario.humans[0]
        self.fabric.submit(human, text)

    # -- the tick pipeline --

    @property
    def done(self) -> bool:
        return self.outcome is not None

    def step(self) -> None:
        # Stepping past the outcome is allowed: the session stays open for
        # late utterances, and a quiet finished run appends no events.
        self.tick += 1
        t = self.tick
        self._sense(t)
        self._cognize(t)
        self._act(t)
        messages = self._deliver(t)
        self._run_script(messages)
        if not self.done and (t >= self.config.ticks or self._quiet()):
            self._finish()

    def run(self) -> str:
        while not self.done:
            self.step()
        return self.outcome

    def _sense(self, t: int) -> None:
        for robot, detections, pose in self._pending_scans:
            effects = self.agents[robot].handle_scan(detections, pose, t)
            self._apply(t, "SENSE", robot, effects)
        self._pending_scans = []
        for robot, zone in self._pending_zone_done:
            effects = self.agents[robot].handle_zone_done(zone, t)
            self._apply(t, "SENSE", robot, effects)
        self._pending_zone_done = []

    def _cognize(self, t: int) -> None:
        self.fabric.deliver_due(t)
        for name, agent in self.agents.items():
            for msg in self.fabric.take(name):
                effects = agent.handle_message(msg.sender, msg.text,
                                               msg.msg_id, t)
                self._apply(t, "COGNIZE", name, effects)
        for name, agent in self.agents.items():
            self._apply(t, "COGNIZE", name, agent.advance(t))
        for name, agent in self.agents.items():
            snap = agent.take_agenda_snapshot()
            if snap is not None:
                text, items = snap
                self.bus.append(t, "COGNIZE", name, "AGENDA", text,
                                {"items": items})

    def _act(self, t: int) -> None:
        for ev in self.world.step(t):
            if ev.kind == "scan":
                pose = self.world.pose_of(ev.robot)
                self._pending_scans.append(
                    (ev.robot, list(ev.detections), pose))
            elif ev.kind == "zone-done":
                self._pending_zone_done.append((ev.robot, ev.zone))
                self.bus.append(t, "ACT", ev.robot, "WORLD", _j(
                    {"what": "job", "action": "done", "zone": ev.zone}))
            elif ev.kind == "arrive":
                self.bus.append(t, "ACT", ev.robot, "WORLD", _j(
                    {"what": "arrive", "zone": ev.zone,
                     "waypoint": [to_units(ev.waypoint[0]),
                                  to_units(ev.waypoint[2])]}))
        for name in self.agents:
            if self.world.busy(name):
                pos, yaw = self.world.pose_of(name)
                self.bus.append(t, "ACT", name, "WORLD", _j(
                    {"what": "pose", "pos": _units3(pos),
                     "yaw": yaw / 100}))

    def _deliver(self, t: int) -> list:
        messages = self.fabric.flush(t)
        for msg in messages:
            to = msg.recipients[0] if len(msg.recipients) == 1 else "*"
            self.bus.append(t, "DELIVER", msg.sender, "MESSAGE", msg.text, {
                "id": msg.msg_id, "to": to,
                "deliver_tick": msg.deliver_tick})
        return messages

    def _apply(self, t: int, phase: str, name: str, effects: list) -> None:
        for e in effects:
            if isinstance(e, EmitDoc):
                self.bus.append(t, phase, name, e.kind,
                                render_document(e.doc), e.meta)
            elif isinstance(e, EmitThought):
                self.bus.append(t, phase, name, "THOUGHT", e.text)
            elif isinstance(e, Say):
                self.fabric.submit(name, e.text, to=e.to)
            elif isinstance(e, StartSearch):
                self.world.assign_search(name, e.zone)
                self.bus.append(t, phase, name, "WORLD", _j(
                    {"what": "job", "action": "start", "zone": e.zone}))
            elif isinstance(e, CancelSearch):
                if self.world.busy(name):
                    self.world.cancel(name)
                    self.bus.append(t, phase, name, "WORLD", _j(
                        {"what": "job", "action": "cancel"}))
            elif isinstance(e, Found):
                self.bus.append(t, phase, name, "WORLD", _j(
                    {"what": "found", "obj": e.obj_id,
                     "pos": list(e.pos)}))
            else:
                raise RunError(f"unknown effect {e!r}")

    def _run_script(self, messages: list) -> None:
        """Fire due triggers, strictly in order, at the end of a tick."""
        while self._fired < len(self.triggers):
            trig = self.triggers[self._fired]
            if trig.reactive:
                hit = any(m.sender == trig.watch_agent and trig.needle in m.text
                          for m in messages)
                if not hit:
                    break
            elif self.tick + 1 < trig.at_tick:
                break
            self.fabric.submit(self.scenario.humans[0], trig.say)
            self._fired += 1

    def _quiet(self) -> bool:
        if not self.fabric.idle() or self.world.any_busy():
            return False
        if self._pending_scans or self._pending_zone_done:
            return False
        for trig in self.triggers[self._fired:]:
            if not trig.reactive:
                return False  # scheduled input still to come
        return all(a.goal_state() != "BUSY" for a in self.agents.values())

    def _finish(self) -> None:
        states = [a.goal_state() for a in self.agents.values()]
        if any(a.found for a in self.agents.values()):
            self.outcome = "FOUND"
        elif "DONE-EMPTY" in states:
            self.outcome = "NOT-FOUND"
        else:
            self.outcome = "BUDGET"
        self.bus.append(self.tick, "DELIVER", "world", "WORLD", _j(
            {"what": "outcome", "outcome": self.outcome, "tick": self.tick}))

    # -- exports --

    def transcript_bytes(self) -> bytes:
        return dumps_transcript(self.config.echo(), self.bus.events)
