"""Strategic layer: goals, plans, preconditions, and team coordination.

Each robot runs its own copy of this module (decentralized team). Inputs are
interpreted messages and percept sweeps; outputs are effects the scheduler
applies: trace documents, thought lines, utterances to send, and search
commands for the tactical layer. The agenda is a small tree of goal and plan
items whose statuses drive what happens next; at most one search command is
issued per agent per tick.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .frames import EpisodicMemory, InstanceRef, MRDocument, resolve_corefer
from .interpreter import (
    NONDESCRIPTIVE_PROPS,
    Lexicon,
    analyze_utterance,
    cardinal_between,
    cardinal_phrase,
    interpret_percept,
    match_found_object,
    relative_between,
    relative_from_cardinal,
    relative_phrase,
    room_phrase,
    think,
)
from .world import FACINGS, Scenario

LANDMARK_RANGE_UNITS = 60  # beyond this, describe by room instead

PRECONDITIONS = (
    "REQUEST-OBJECT-TYPE",
    "REQUEST-OBJECT-FEATURES",
    "REQUEST-LAST-SEEN-AT",
    "REQUEST-LOCATION-CONSTRAINED",
)

STATUSES = ("PENDING", "ACTIVE", "WAITING", "SATISFIED", "FAILED")

PLAN_CONCEPT = "SEARCH-FOR-LOST-OBJECT"

CARDINAL_PROPS = frozenset(("NORTH-OF", "SOUTH-OF", "EAST-OF", "WEST-OF"))

# Event participants that can pin down where something was last seen.
_PLACE_HINT_PROPS = ("THEME", "LOCATION", "INSTRUMENT", "DESTINATION")


class CognitionError(ValueError):
    pass


# --- agenda ------------------------------------------------------------------


@dataclass
class AgendaItem:
    item_id: str
    label: str
    status: str = "PENDING"
    negative: bool = False
    children: list = field(default_factory=list)

    def find(self, item_id: str):
        if self.item_id == item_id:
            return self
        for child in self.children:
            got = child.find(item_id)
            if got is not None:
                return got
        return None

    def set_status(self, status: str, negative: bool = False) -> None:
        if status not in STATUSES:
            raise CognitionError(f"bad status {status!r}")
        self.status = status
        self.negative = negative


def build_agenda() -> AgendaItem:
    root = AgendaItem("root", "@COLLABORATIVE-ACTIVITY", status="ACTIVE")
    select = AgendaItem("root/select-plan", "[SELECT-PLAN]")
    pre = AgendaItem("root/preconditions", "[PRECONDITIONS]")
    for name in PRECONDITIONS:
        pre.children.append(AgendaItem(f"root/preconditions/{name}", f"@{name}"))
    propose = AgendaItem("root/propose-plan", "@PROPOSE-PLAN")
    run = AgendaItem("root/run-plan", "[RUN-PLAN]")
    run.children.append(AgendaItem(f"root/run-plan/{PLAN_CONCEPT}",
                                   f"@{PLAN_CONCEPT}"))
    root.children = [select, pre, propose, run]
    return root


def render_agenda(root: AgendaItem) -> tuple:
    """Panel text plus one status record per line, in render order."""
    lines: list = []
    items: list = []

    def walk(item: AgendaItem, depth: int) -> None:
        lines.append("  " * depth + item.label)
        items.append({"id": item.item_id, "status": item.status,
                      "negative": item.negative})
        for child in item.children:
            walk(child, depth + 1)

    walk(root, 0)
    return "\n".join(lines), items


# --- effects the scheduler applies --------------------------------------------


@dataclass(frozen=True)
class EmitDoc:
    kind: str  # TMR | VMR
    doc: MRDocument
    meta: dict


@dataclass(frozen=True)
class EmitThought:
    text: str


@dataclass(frozen=True)
class Say:
    to: str
    text: str


@dataclass(frozen=True)
class StartSearch:
    zone: str


@dataclass(frozen=True)
class CancelSearch:
    pass


@dataclass(frozen=True)
class Found:
    obj_id: str
    pos: tuple


# --- the agent -----------------------------------------------------------------


class Agent:
    """One robot's strategic layer over a shared static map."""

    def __init__(self, name: str, role: str, lexicon: Lexicon, thoughts: dict,
                 graph, scenario: Scenario, proposal_timeout: int = 50):
        if name not in scenario.robots:
            raise CognitionError(f"unknown robot {name!r}")
        self.name = name
        self.role = role
        self.lexicon = lexicon
        self.thoughts = thoughts
        self.graph = graph
        self.scenario = scenario
        self.proposal_timeout = proposal_timeout

        self.memory = EpisodicMemory()
        self.bindings: dict = {}  # world object id -> episodic anchor
        self.agent_anchors: dict = {}
        self.zone_anchors: dict = {}
        self._doc_counters = {"TMR": 0, "VMR": 0}
        self._seed_anchors: list = []

        self.teammates = [r for r in scenario.robots if r != name]
        self.human = scenario.humans[0] if scenario.humans else None

        self.agenda: AgendaItem | None = None
        self.agenda_dirty = False
        self.sought: InstanceRef | None = None
        self.requester: str | None = None
        self.plan_chosen = False
        self.asked: set = set()
        self.last_seen_zone: str | None = None
        self.proposed_tick: int | None = None
        self.proposal_accepted = False
        self.solo = False
        self.my_zones: list = []
        self.their_zones: list = []
        self.done_zones: set = set()
        self.teammate_done: set = set()
        self.active_zone: str | None = None
        self.search_over = False
        self.found = False
        self.failure_told = False

        self._seed_memory()

    # --- setup ---

    def _mint_seed(self, concept: str) -> InstanceRef:
        ref = self.memory.mint(concept)
        self._seed_anchors.append((ref.render(), concept))
        return ref

    def _seed_memory(self) -> None:
        """What every agent knows before the run: itself, its team, the map."""
        self.agent_anchors[self.name] = self._mint_seed("LEIA")
        for mate in self.teammates:
            self.agent_anchors[mate] = self._mint_seed("LEIA")
        if self.human:
            self.agent_anchors[self.human] = self._mint_seed("HUMAN")
        for zone_name in self.scenario.zones:
            self.zone_anchors[zone_name] = self._mint_seed(zone_name)
        for obj in self.scenario.landmarks():
            ref = self._mint_seed(obj.concept)
            self.bindings[obj.obj_id] = ref
        self._mint_seed("APARTMENT")

    def seed_payload(self) -> dict:
        return {"what": "memory-seed", "agent": self.name,
                "anchors": [list(pair) for pair in self._seed_anchors]}

    def _next_doc(self, kind: str) -> int:
        self._doc_counters[kind] += 1
        return self._doc_counters[kind]

    def _speaker_anchor(self, sender: str) -> InstanceRef:
        ref = self.agent_anchors.get(sender)
        if ref is None:
            raise CognitionError(f"no anchor for speaker {sender!r}")
        return ref

    def _self_anchor(self) -> InstanceRef:
        return self.agent_anchors[self.name]

    def _think(self, key: str, **fields) -> EmitThought:
        return EmitThought(think(self.thoughts, key, **fields))

    # --- inbound messages ---

    def handle_message(self, sender: str, text: str, msg_id: str,
                       tick: int) -> list:
        doc = analyze_utterance(
            self.lexicon, text, memory=self.memory,
            self_anchor=self._self_anchor(),
            speaker_anchor=self._speaker_anchor(sender),
            owner=self.name, doc_num=self._next_doc("TMR"),
            tick=tick, source=msg_id)
        effects: list = [EmitDoc("TMR", doc, {"source": msg_id, "from": sender})]
        head = doc.head
        if head is None or head.concept == "UNINTERPRETED":
            effects.append(self._think("UNHANDLED"))
            return effects
        effects.append(self._think("INTERPRETED-INPUT", text=text,
                                   concept=head.concept))
        _, merged, _ = resolve_corefer(doc, self.memory, self.graph)

        head_frame = doc.head_frame()
        if head.concept == "REQUEST-ACTION":
            theme = self._local_frame(doc, head_frame, "THEME")
            if theme is not None and theme.head.concept == PLAN_CONCEPT:
                if self.goal_state() in ("DONE-FOUND", "DONE-EMPTY"):
                    # the collaborative activity is closed; nothing to attach to
                    effects.append(self._think("UNHANDLED"))
                else:
                    effects.extend(self._adopt_goal(doc, theme, merged, sender))
            elif theme is not None and theme.head.concept == "SEARCH-ZONE":
                effects.extend(self._take_assignment(theme))
        elif head.concept == "PROPOSE-PLAN" and sender in self.teammates:
            effects.extend(self._hear_proposal(sender))
        elif head.concept == "ACCEPT-PLAN" and sender in self.teammates:
            self.proposal_accepted = True
        elif head.concept == "SEARCH-ZONE" and sender in self.teammates:
            self._hear_zone_report(head_frame)
        elif head.concept == "VISUAL-EVENT" and sender in self.teammates:
            effects.extend(self._hear_found_report(doc, head_frame))
        return effects

    def _local_frame(self, doc: MRDocument, frame, prop: str):
        values = frame.values(prop) if frame else []
        for v in values:
            if isinstance(v, InstanceRef) and not v.anchored:
                got = doc.frame(v)
                if got is not None:
                    return got
        return None

    def _adopt_goal(self, doc, search_frame, merged: dict, sender: str) -> list:
        if self.agenda is not None:
            return []  # one collaborative activity at a time
        self.requester = sender
        sought_local = None
        for v in search_frame.values("THEME"):
            if isinstance(v, InstanceRef) and not v.anchored:
                sought_local = v
        if sought_local is None:
            return []
        anchor = merged.get(sought_local.render())
        if anchor is None:
            return []
        self.sought = anchor
        self.agenda = build_agenda()
        self.agenda_dirty = True
        effects = [self._think("GOAL-ADOPTED", requester=sender,
                               goal=PLAN_CONCEPT)]
        if self.role != "LEADER":
            self.agenda.set_status("WAITING")
            effects.append(self._think("WAIT-FOR-LEADER"))
        return effects

    def _hear_proposal(self, sender: str) -> list:
        if self.agenda is None or self.role == "LEADER":
            return []
        # the leader picked the plan; adopt its choice quietly and agree
        self._select_plan()
        self._evaluate_preconditions(can_ask=False)
        pre = self.agenda.find("root/preconditions")
        if all(c.status == "SATISFIED" for c in pre.children):
            pre.set_status("SATISFIED")
        self.agenda.find("root/propose-plan").set_status("SATISFIED")
        self.agenda.find("root/run-plan").set_status("ACTIVE")
        self.agenda.set_status("ACTIVE")
        self.agenda_dirty = True
        return [Say(sender, self.lexicon.generate("ACCEPT-PLAN"))]

    def _take_assignment(self, zone_frame) -> list:
        zones = []
        by_anchor = {ref.render(): name
                     for name, ref in self.zone_anchors.items()}
        for v in zone_frame.values("LOCATION"):
            if isinstance(v, InstanceRef) and v.anchored:
                name = by_anchor.get(v.render())
                if name:
                    zones.append(name)
        if not zones or self.agenda is None:
            return []
        self.my_zones = zones
        self.their_zones = [z for z in self.scenario.zones if z not in zones]
        self._add_zone_subtasks()
        self.agenda.find("root/run-plan").set_status("ACTIVE")
        self.agenda_dirty = True
        return []

    def _hear_zone_report(self, frame) -> None:
        by_anchor = {ref.render(): name
                     for name, ref in self.zone_anchors.items()}
        for v in frame.values("LOCATION"):
            if isinstance(v, InstanceRef) and v.anchored:
                name = by_anchor.get(v.render())
                if name:
                    self.teammate_done.add(name)

    def _hear_found_report(self, doc, frame) -> list:
        if self.search_over or self.sought is None:
            return []
        theme_local = self._local_frame(doc, frame, "THEME")
        if theme_local is None:
            return []
        corefs = [v for v in theme_local.values("COREFER")
                  if isinstance(v, InstanceRef) and v.anchored]
        if self.sought not in corefs:
            return []
        self.search_over = True
        self.found = True
        self._close_out_found()
        effects: list = [CancelSearch()]
        if self.role == "LEADER" and self.human:
            phrase = self._relayed_place_phrase()
            if phrase is not None:
                effects.append(self._think("REPORT-HUMAN", human=self.human,
                                           anchor=self.sought.render()))
                effects.append(Say(self.human, self._found_human_text(phrase)))
        return effects

    def _relayed_place_phrase(self) -> str | None:
        """Where the teammate said the object is, reworded for the human."""
        mf = self.memory.get(self.sought)
        if mf is None:
            return None
        for slot in mf.slots:
            if slot.prop in CARDINAL_PROPS:
                for v in slot.values:
                    if isinstance(v, InstanceRef) and v.anchored:
                        obj = self._landmark_by_concept(v.concept)
                        if obj is not None and obj.facing:
                            words = relative_from_cardinal(
                                slot.prop, FACINGS[obj.facing])
                            return relative_phrase(self.lexicon, words,
                                                   v.concept)
        for v in mf.values("LOCATION"):
            if isinstance(v, InstanceRef) and v.anchored and \
                    v.concept in self.scenario.zones:
                return room_phrase(self.lexicon, v.concept)
        return None

    def _landmark_by_concept(self, concept: str):
        for obj in self.scenario.landmarks():
            if obj.concept == concept:
                return obj
        return None

    # --- percepts ---

    def handle_scan(self, detections: list, pose, tick: int) -> list:
        doc = interpret_percept(
            detections, memory=self.memory, graph=self.graph,
            bindings=self.bindings, self_anchor=self._self_anchor(),
            pose=pose, owner=self.name, doc_num=self._next_doc("VMR"),
            tick=tick)
        effects: list = [EmitDoc("VMR", doc, {"source": "sense"})]
        resolve_corefer(doc, self.memory, self.graph)
        if self.sought is None or self.search_over:
            return effects
        for det in detections:
            if match_found_object(self.memory, self.sought, det, self.graph):
                effects.extend(self._found_by_me(det))
                break
        return effects

    def _found_by_me(self, det) -> list:
        self.search_over = True
        self.found = True
        if self.active_zone:
            item = self._zone_item(self.active_zone)
            if item is not None:
                item.set_status("SATISFIED")
            self.done_zones.add(self.active_zone)
            self.active_zone = None
        self._close_out_found()
        effects: list = [
            self._think("FOUND", anchor=self.sought.render()),
            CancelSearch(),
            Found(det.obj_id, det.pos),
        ]
        np = self.lexicon.surface(self.sought.concept).phrase
        landmark = self._nearest_landmark(det.pos)
        for mate in self.teammates:
            effects.append(self._think("REPORT-TEAMMATE", recipient=mate))
            if landmark is not None:
                direction = cardinal_between(
                    (det.pos[0], det.pos[2]),
                    (landmark.pos[0] / 100, landmark.pos[2] / 100))
                place = cardinal_phrase(self.lexicon, direction,
                                        landmark.concept)
            else:
                place = self._room_phrase_at(det.pos)
            effects.append(Say(mate, self.lexicon.generate(
                "FOUND-TEAMMATE", np, place)))
        if self.role == "LEADER" and self.human:
            if landmark is not None and landmark.facing:
                words = relative_between(
                    (det.pos[0], det.pos[2]),
                    (landmark.pos[0] / 100, landmark.pos[2] / 100),
                    FACINGS[landmark.facing])
                phrase = relative_phrase(self.lexicon, words, landmark.concept)
            else:
                phrase = self._room_phrase_at(det.pos)
            effects.append(self._think("REPORT-HUMAN", human=self.human,
                                       anchor=self.sought.render()))
            effects.append(Say(self.human, self._found_human_text(phrase)))
        return effects

    def _found_human_text(self, place_phrase: str) -> str:
        surf = self.lexicon.surface(self.sought.concept)
        subject = "They are" if surf.plural else "It is"
        return self.lexicon.generate("FOUND-HUMAN", surf.phrase, subject,
                                     place_phrase)

    def _nearest_landmark(self, pos_units):
        x, z = round(pos_units[0] * 100), round(pos_units[2] * 100)
        limit_sq = (LANDMARK_RANGE_UNITS * 100) ** 2
        best = None
        best_sq = None
        for obj in self.scenario.landmarks():
            dsq = (obj.pos[0] - x) ** 2 + (obj.pos[2] - z) ** 2
            if dsq <= limit_sq and (best_sq is None or dsq < best_sq):
                best, best_sq = obj, dsq
        return best

    def _room_phrase_at(self, pos_units) -> str:
        room = self.scenario.room_at(round(pos_units[0] * 100),
                                     round(pos_units[2] * 100))
        return room_phrase(self.lexicon, room) if room else "somewhere"

    def _close_out_found(self) -> None:
        """The goal is met: drop moot zone subtasks and settle the tree."""
        if self.agenda is None:
            return
        activity = self.agenda.find(f"root/run-plan/{PLAN_CONCEPT}")
        activity.children = [c for c in activity.children
                             if c.status in ("SATISFIED", "FAILED")]
        activity.set_status("SATISFIED")
        self.agenda.find("root/run-plan").set_status("SATISFIED")
        for path in ("root/select-plan", "root/preconditions",
                     "root/propose-plan"):
            node = self.agenda.find(path)
            if node.status not in ("SATISFIED", "FAILED"):
                node.set_status("SATISFIED")
            for child in node.children:
                if child.status not in ("SATISFIED", "FAILED"):
                    child.set_status("SATISFIED")
        self.agenda.set_status("SATISFIED")
        self.agenda_dirty = True

    # --- tactical layer callbacks ---

    def handle_zone_done(self, zone: str, tick: int) -> list:
        if self.search_over:
            return []
        self.done_zones.add(zone)
        self.active_zone = None
        item = self._zone_item(zone)
        if item is not None:
            item.set_status("SATISFIED", negative=True)
            self.agenda_dirty = True
        effects = [self._think("ZONE-DONE",
                               zone=self.zone_anchors[zone].render())]
        np = self.lexicon.surface(self.sought.concept).phrase \
            if self.sought else "it"
        zone_np = self.lexicon.surface(zone).phrase
        for mate in self.teammates:
            effects.append(Say(mate, self.lexicon.generate(
                "ZONE-NO-LUCK", zone_np, np)))
        return effects

    def _zone_item(self, zone: str):
        if self.agenda is None:
            return None
        return self.agenda.find(f"root/run-plan/{PLAN_CONCEPT}/{zone}")

    # --- agenda advancement ---

    def advance(self, tick: int) -> list:
        if self.agenda is None:
            return []
        root = self.agenda
        if root.status in ("SATISFIED", "FAILED") or root.status == "WAITING":
            return []
        effects: list = []
        select = root.find("root/select-plan")
        if select.status == "PENDING" and self.role == "LEADER":
            self._select_plan()
            effects.append(self._think("PLAN-SELECTED", plan=PLAN_CONCEPT))
            effects.append(self._think("PRECONDITIONS-NOTED",
                                       plan=PLAN_CONCEPT))
            root.find("root/preconditions").set_status("ACTIVE")
            self.agenda_dirty = True

        pre = root.find("root/preconditions")
        if pre.status == "ACTIVE":
            ask = self._evaluate_preconditions(can_ask=self.role == "LEADER")
            if ask:
                effects.extend(ask)
                return effects
            if all(c.status == "SATISFIED" for c in pre.children):
                pre.set_status("SATISFIED")
                self.agenda_dirty = True
            else:
                return effects

        propose = root.find("root/propose-plan")
        if pre.status == "SATISFIED" and propose.status == "PENDING" \
                and self.role == "LEADER":
            if self.teammates:
                propose.set_status("WAITING")
                self.proposed_tick = tick
                self.agenda_dirty = True
                effects.append(Say(self.teammates[0], self.lexicon.generate(
                    "PROPOSE-PLAN",
                    self.lexicon.surface("APARTMENT").phrase)))
                return effects
            self.solo = True
            propose.set_status("SATISFIED")
            self.agenda_dirty = True
        if propose.status == "WAITING":
            if self.proposal_accepted:
                propose.set_status("SATISFIED")
                self.agenda_dirty = True
            elif tick - self.proposed_tick >= self.proposal_timeout:
                # no answer; carry on alone rather than stall the goal
                propose.set_status("FAILED")
                self.solo = True
                self.agenda_dirty = True
            else:
                return effects

        run = root.find("root/run-plan")
        if propose.status in ("SATISFIED", "FAILED") and run.status == "PENDING" \
                and self.role == "LEADER":
            run.set_status("ACTIVE")
            effects.extend(self._partition_zones())
        if run.status == "ACTIVE" and self.active_zone is None:
            nxt = self._next_zone()
            if nxt is not None:
                effects.extend(self._start_zone(nxt))
            elif self._exhausted():
                effects.extend(self._conclude_not_found())
        return effects

    def _select_plan(self) -> None:
        select = self.agenda.find("root/select-plan")
        select.label = f"[SELECT-PLAN] i.e., {PLAN_CONCEPT}"
        select.set_status("SATISFIED")
        self.plan_chosen = True
        self.agenda_dirty = True

    def _evaluate_preconditions(self, can_ask: bool) -> list:
        """Walk the precondition children in order; each is only considered
        once everything before it is satisfied. Returns ask effects, if any."""
        pre = self.agenda.find("root/preconditions")
        for child in pre.children:
            name = child.item_id.rsplit("/", 1)[1]
            if child.status == "SATISFIED":
                continue
            if name == "REQUEST-OBJECT-TYPE":
                # knowing what kind of thing we seek came with the request
                if self.sought is not None:
                    child.set_status("SATISFIED")
                    self.agenda_dirty = True
                    continue
                return []
            if name == "REQUEST-OBJECT-FEATURES":
                if self._features_known():
                    child.set_status("SATISFIED")
                    self.agenda_dirty = True
                    continue
                if can_ask and name not in self.asked:
                    self.asked.add(name)
                    child.set_status("WAITING")
                    self.agenda_dirty = True
                    surf = self.lexicon.surface(self.sought.concept)
                    verb = "do" if surf.plural else "does"
                    return [self._think("NEED-FEATURES",
                                        anchor=self.sought.render()),
                            Say(self.requester, self.lexicon.generate(
                                "ASK-FEATURES", surf.phrase, verb))]
                return []
            if name == "REQUEST-LAST-SEEN-AT":
                zone = self._derive_last_seen()
                if zone is not None:
                    self.last_seen_zone = zone
                    child.set_status("SATISFIED")
                    self.agenda_dirty = True
                    continue
                if can_ask and name not in self.asked:
                    self.asked.add(name)
                    child.set_status("WAITING")
                    self.agenda_dirty = True
                    surf = self.lexicon.surface(self.sought.concept)
                    return [self._think("NEED-LAST-SEEN",
                                        anchor=self.sought.render()),
                            Say(self.requester, self.lexicon.generate(
                                "ASK-LAST-SEEN", surf.phrase))]
                return []
            if name == "REQUEST-LOCATION-CONSTRAINED":
                # no constraint volunteered means the whole map is in play
                child.set_status("SATISFIED")
                self.agenda_dirty = True
        return []

    def _features_known(self) -> bool:
        mf = self.memory.get(self.sought)
        if mf is None:
            return False
        return any(s.prop not in NONDESCRIPTIVE_PROPS and s.values
                   for s in mf.slots)

    def _derive_last_seen(self) -> str | None:
        """A remembered event involving the sought object whose participants
        pin a place on the map."""
        for mf in self.memory.anchors.values():
            if not self.graph.has(mf.head.concept):
                continue
            if not self.graph.is_subsumed_by(mf.head.concept, "EVENT"):
                continue
            involved = any(
                isinstance(v, InstanceRef) and v == self.sought
                for s in mf.slots for v in s.values)
            if not involved:
                continue
            for prop in _PLACE_HINT_PROPS:
                for v in mf.values(prop):
                    if not isinstance(v, InstanceRef) or not v.anchored:
                        continue
                    if v == self.sought:
                        continue
                    zone = self._zone_of_concept(v.concept)
                    if zone is not None:
                        return zone
        return None

    def _zone_of_concept(self, concept: str) -> str | None:
        if concept in self.scenario.zones:
            return concept
        obj = self._landmark_by_concept(concept)
        if obj is not None:
            room = self.scenario.room_at(obj.pos[0], obj.pos[2])
            for name, zone in self.scenario.zones.items():
                if zone.room == room:
                    return name
        return None

    # --- running the plan ---

    def _partition_zones(self) -> list:
        """Split zones across the team: aerial zones to fliers, the rest by
        station distance; each robot visits the last-seen zone first if it
        owns it, then sweeps nearest first."""
        owners: dict = {}
        for zone_name, zone in self.scenario.zones.items():
            if self.solo:
                owners[zone_name] = self.name
                continue
            if zone.aerial:
                flier = next(
                    (r for r in self.scenario.robots.values()
                     if r.kind == "AERIAL"), None)
                if flier is not None:
                    owners[zone_name] = flier.name
                    continue
            owners[zone_name] = min(
                self.scenario.robots.values(),
                key=lambda r: self._station_distance_sq(r.name, zone_name),
            ).name
        mine = [z for z, who in owners.items() if who == self.name]
        self.my_zones = self._order_zones(mine, self.name)
        self.their_zones = [z for z in self.scenario.zones if z not in mine]
        self._add_zone_subtasks()
        self.agenda_dirty = True
        effects: list = []
        if not self.solo:
            for mate in self.teammates:
                theirs = self._order_zones(
                    [z for z, who in owners.items() if who == mate], mate)
                if theirs:
                    phrase = " and ".join(
                        self.lexicon.surface(z).phrase for z in theirs)
                    effects.append(Say(mate, self.lexicon.generate(
                        "ASSIGN-ZONES", phrase)))
        return effects

    def _station_distance_sq(self, robot: str, zone_name: str) -> int:
        spec = self.scenario.robots[robot]
        wp = self.scenario.zones[zone_name].waypoints[0]
        dx = spec.station[0] - wp[0]
        dz = spec.station[2] - wp[1]
        return dx * dx + dz * dz

    def _order_zones(self, zones: list, robot: str) -> list:
        zone_pos = {z: i for i, z in enumerate(self.scenario.zones)}

        def key(z):
            if z == self.last_seen_zone:
                return (0, 0, 0)
            return (1, self._station_distance_sq(robot, z), zone_pos[z])

        return sorted(zones, key=key)

    def _add_zone_subtasks(self) -> None:
        activity = self.agenda.find(f"root/run-plan/{PLAN_CONCEPT}")
        activity.set_status("ACTIVE")
        for zone in self.my_zones:
            activity.children.append(AgendaItem(
                f"root/run-plan/{PLAN_CONCEPT}/{zone}",
                f"@SEARCH-ZONE {self.zone_anchors[zone].render()}"))

    def _next_zone(self) -> str | None:
        for zone in self.my_zones:
            if zone not in self.done_zones:
                return zone
        return None

    def _start_zone(self, zone: str) -> list:
        self.active_zone = zone
        item = self._zone_item(zone)
        if item is not None:
            item.set_status("ACTIVE")
            self.agenda_dirty = True
        return [self._think("ZONE-START",
                            zone=self.zone_anchors[zone].render()),
                StartSearch(zone)]

    def _exhausted(self) -> bool:
        if self.my_zones and set(self.my_zones) <= self.done_zones:
            return set(self.their_zones) <= self.teammate_done
        return False

    def _conclude_not_found(self) -> list:
        self.search_over = True
        activity = self.agenda.find(f"root/run-plan/{PLAN_CONCEPT}")
        activity.set_status("SATISFIED", negative=True)
        self.agenda.find("root/run-plan").set_status("SATISFIED",
                                                     negative=True)
        self.agenda.set_status("SATISFIED", negative=True)
        self.agenda_dirty = True
        effects: list = []
        if self.role == "LEADER" and self.human and not self.failure_told:
            self.failure_told = True
            surf = self.lexicon.surface(self.sought.concept)
            effects.append(Say(self.human, self.lexicon.generate(
                "SEARCH-FAILED", surf.phrase)))
        return effects

    # --- state the scheduler reads ---

    def goal_state(self) -> str:
        """IDLE, BUSY, WAITING, DONE-FOUND or DONE-EMPTY."""
        if self.agenda is None:
            return "IDLE"
        if self.agenda.status == "WAITING":
            return "WAITING"
        if self.agenda.status in ("SATISFIED", "FAILED"):
            return "DONE-FOUND" if self.found else "DONE-EMPTY"
        return "BUSY"

    def take_agenda_snapshot(self):
        if not self.agenda_dirty or self.agenda is None:
            return None
        self.agenda_dirty = False
        return render_agenda(self.agenda)
