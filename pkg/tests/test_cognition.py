"""Strategic-layer tests: agenda lifecycle, questions, partition, reports.

Expected texts are frozen up front; the zone partition is additionally
re-derived by an independent calculation straight off the scenario file.
"""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import fixture_text
from underhood.cognition import (
    Agent,
    AgendaItem,
    CancelSearch,
    CognitionError,
    EmitDoc,
    EmitThought,
    Found,
    Say,
    StartSearch,
    build_agenda,
    render_agenda,
)
from underhood.interpreter import load_lexicon, load_thoughts
from underhood.ontology import load_ontology
from underhood.world import World, load_scenario

REQUEST = "I think I left my keys at home. Can you look around for them?"
FEATURES = "They are on a red keychain with a small flashlight."
UNLOCK = ("I used them last night to open the front door, "
          "but they could be anywhere.")
PROPOSE = "Let's search the apartment."
ACCEPT = "Sounds good."
ASSIGN = "Please search the kitchen and the bathroom."

ASK_FEATURES = "What do the keys look like?"
ASK_LAST_SEEN = "Where did you last see the keys?"

# The leader's narration, in stream order, for the scripted request.
LEADER_THOUGHTS = [
    f'I interpreted the input "{REQUEST}" as @REQUEST-ACTION.',
    "DANNY wants us to @SEARCH-FOR-LOST-OBJECT.",
    "We'll use @SEARCH-FOR-LOST-OBJECT to satisfy the goal.",
    "There are some preconditions for @SEARCH-FOR-LOST-OBJECT "
    "we need to satisfy first.",
    "I need to learn more about #KEY.1's features.",
    f'I interpreted the input "{FEATURES}" as @KEY.',
    "It would be useful to know where #KEY.1 was last seen.",
    f'I interpreted the input "{UNLOCK}" as @UNLOCK-EVENT.',
]

DRONE_THOUGHTS = [
    f'I interpreted the input "{REQUEST}" as @REQUEST-ACTION.',
    "DANNY wants us to @SEARCH-FOR-LOST-OBJECT.",
    "I'm going to wait for a plan from my team leader.",
    f'I interpreted the input "{FEATURES}" as @KEY.',
    f'I interpreted the input "{UNLOCK}" as @UNLOCK-EVENT.',
    f'I interpreted the input "{PROPOSE}" as @PROPOSE-PLAN.',
    "I am going to start my robotic search command to look in #KITCHEN.1",
]

AGENDA_VIEW = """\
@COLLABORATIVE-ACTIVITY
  [SELECT-PLAN] i.e., SEARCH-FOR-LOST-OBJECT
  [PRECONDITIONS]
    @REQUEST-OBJECT-TYPE
    @REQUEST-OBJECT-FEATURES
    @REQUEST-LAST-SEEN-AT
    @REQUEST-LOCATION-CONSTRAINED
  @PROPOSE-PLAN
  [RUN-PLAN]
    @SEARCH-FOR-LOST-OBJECT"""

UGV_ZONES = ["HALLWAY", "LIVING-ROOM", "BEDROOM", "OFFICE"]
DRONE_ZONES = ["KITCHEN", "BATHROOM"]
SOLO_ZONES = ["HALLWAY", "LIVING-ROOM", "BEDROOM", "KITCHEN",
              "BATHROOM", "OFFICE"]


@pytest.fixture(scope="module")
def graph():
    return load_ontology(fixture_text("seed.ontology"))


@pytest.fixture(scope="module")
def lexicon():
    return load_lexicon(fixture_text("seed.lexicon"))


@pytest.fixture(scope="module")
def thoughts():
    return load_thoughts(fixture_text("seed.thoughts"))


def make_agent(graph, lexicon, thoughts, name="UGV-U", role="LEADER",
               scenario=None, timeout=50):
    scenario = scenario or load_scenario(fixture_text("apartment.scenario"))
    return Agent(name, role, lexicon, thoughts, graph, scenario,
                 proposal_timeout=timeout)


def thoughts_of(effects):
    return [e.text for e in effects if isinstance(e, EmitThought)]


def says_of(effects):
    return [(e.to, e.text) for e in effects if isinstance(e, Say)]


def is_subsequence(needles, haystack):
    it = iter(haystack)
    return all(any(n == h for h in it) for n in needles)


def drive_leader(agent):
    """The scripted conversation up to the leader starting its first zone."""
    fx = []
    fx += agent.handle_message("DANNY", REQUEST, "msg.1", 2)
    fx += agent.advance(2)
    fx += agent.handle_message("DANNY", FEATURES, "msg.3", 4)
    fx += agent.advance(4)
    fx += agent.handle_message("DANNY", UNLOCK, "msg.5", 6)
    fx += agent.advance(6)
    fx += agent.handle_message("DRONE-D", ACCEPT, "msg.7", 8)
    fx += agent.advance(8)
    return fx


def drive_drone(agent):
    fx = []
    fx += agent.handle_message("DANNY", REQUEST, "msg.1", 2)
    fx += agent.advance(2)
    fx += agent.handle_message("DANNY", FEATURES, "msg.3", 4)
    fx += agent.advance(4)
    fx += agent.handle_message("DANNY", UNLOCK, "msg.5", 6)
    fx += agent.advance(6)
    fx += agent.handle_message("UGV-U", PROPOSE, "msg.6", 7)
    fx += agent.advance(7)
    fx += agent.handle_message("UGV-U", ASSIGN, "msg.8", 9)
    fx += agent.advance(9)
    return fx


# --- independent partition oracle ---------------------------------------------


def oracle_partition():
    """Re-derive the zone split from the scenario text alone."""
    stations = {}
    kinds = {}
    for line in fixture_text("apartment.scenario").splitlines():
        parts = line.split()
        if parts[:1] == ["ROBOT"]:
            name, kind = parts[1], parts[2]
            at = parts.index("AT")
            stations[name] = (round(float(parts[at + 1]) * 100),
                              round(float(parts[at + 3]) * 100))
            kinds[name] = kind
    scenario = load_scenario(fixture_text("apartment.scenario"))
    first_wp = {z: zone.waypoints[0] for z, zone in scenario.zones.items()}

    def dist_sq(robot, zone):
        sx, sz = stations[robot]
        wx, wz = first_wp[zone]
        return (sx - wx) ** 2 + (sz - wz) ** 2

    owners = {}
    for zone_name, zone in scenario.zones.items():
        if zone.aerial:
            owners[zone_name] = next(r for r, k in kinds.items()
                                     if k == "AERIAL")
        else:
            owners[zone_name] = min(stations,
                                    key=lambda r: dist_sq(r, zone_name))
    ordered = {}
    for robot in stations:
        mine = [z for z, who in owners.items() if who == robot]
        mine.sort(key=lambda z: (z != "HALLWAY", dist_sq(robot, z)))
        ordered[robot] = mine
    return ordered


def test_partition_matches_independent_derivation():
    ordered = oracle_partition()
    assert ordered["UGV-U"] == UGV_ZONES
    assert ordered["DRONE-D"] == DRONE_ZONES


# --- agenda structure ----------------------------------------------------------


def test_agenda_render_shape():
    root = build_agenda()
    root.find("root/select-plan").label = \
        "[SELECT-PLAN] i.e., SEARCH-FOR-LOST-OBJECT"
    text, items = render_agenda(root)
    assert text == AGENDA_VIEW
    assert [i["id"] for i in items][:3] == [
        "root", "root/select-plan", "root/preconditions"]
    assert all(i["status"] in
               ("PENDING", "ACTIVE", "WAITING", "SATISFIED", "FAILED")
               for i in items)


def test_agenda_item_guards():
    item = AgendaItem("x", "@X")
    with pytest.raises(CognitionError):
        item.set_status("BOGUS")


def test_seed_memory_order(graph, lexicon, thoughts):
    agent = make_agent(graph, lexicon, thoughts)
    anchors = [tuple(a) for a in agent.seed_payload()["anchors"]]
    assert anchors == [
        ("#LEIA.1", "LEIA"), ("#LEIA.2", "LEIA"), ("#HUMAN.1", "HUMAN"),
        ("#KITCHEN.1", "KITCHEN"), ("#HALLWAY.1", "HALLWAY"),
        ("#LIVING-ROOM.1", "LIVING-ROOM"), ("#BATHROOM.1", "BATHROOM"),
        ("#BEDROOM.1", "BEDROOM"), ("#OFFICE.1", "OFFICE"),
        ("#COUCH.1", "COUCH"), ("#FRONT-DOOR.1", "FRONT-DOOR"),
        ("#REFRIGERATOR.1", "REFRIGERATOR"), ("#TABLE.1", "TABLE"),
        ("#BED.1", "BED"), ("#DESK.1", "DESK"), ("#SINK.1", "SINK"),
        ("#APARTMENT.1", "APARTMENT"),
    ]


# --- the leader's conversation ------------------------------------------------


def test_leader_thought_stream(graph, lexicon, thoughts):
    agent = make_agent(graph, lexicon, thoughts)
    fx = drive_leader(agent)
    stream = thoughts_of(fx)
    assert is_subsequence(LEADER_THOUGHTS, stream)
    # the accept and the zone start follow the pinned narration
    assert f'I interpreted the input "{ACCEPT}" as @ACCEPT-PLAN.' in stream
    assert stream[-1] == \
        "I am going to start my robotic search command to look in #HALLWAY.1"


def test_leader_asks_two_questions_in_order(graph, lexicon, thoughts):
    agent = make_agent(graph, lexicon, thoughts)
    fx = drive_leader(agent)
    to_human = [t for to, t in says_of(fx) if to == "DANNY"]
    assert to_human == [ASK_FEATURES, ASK_LAST_SEEN]
    assert "REQUEST-OBJECT-TYPE" not in str(says_of(fx))


def test_leader_one_question_per_turn(graph, lexicon, thoughts):
    agent = make_agent(graph, lexicon, thoughts)
    fx = agent.handle_message("DANNY", REQUEST, "msg.1", 2)
    fx += agent.advance(2)
    says = says_of(fx)
    assert says == [("DANNY", ASK_FEATURES)]
    # nothing new happens until the answer arrives
    assert agent.advance(3) == []
    assert says_of(agent.handle_message("DANNY", FEATURES, "msg.3", 4)
                   + agent.advance(4)) == [("DANNY", ASK_LAST_SEEN)]


def test_leader_proposes_then_assigns(graph, lexicon, thoughts):
    agent = make_agent(graph, lexicon, thoughts)
    fx = drive_leader(agent)
    to_drone = [t for to, t in says_of(fx) if to == "DRONE-D"]
    assert to_drone == [PROPOSE, ASSIGN]
    assert agent.my_zones == UGV_ZONES
    assert agent.their_zones == DRONE_ZONES
    assert [e.zone for e in fx if isinstance(e, StartSearch)] == ["HALLWAY"]


def test_leader_agenda_after_request(graph, lexicon, thoughts):
    agent = make_agent(graph, lexicon, thoughts)
    agent.handle_message("DANNY", REQUEST, "msg.1", 2)
    agent.advance(2)
    text, items = agent.take_agenda_snapshot()
    assert text == AGENDA_VIEW
    status = {i["id"]: i["status"] for i in items}
    assert status["root/select-plan"] == "SATISFIED"
    assert status["root/preconditions/REQUEST-OBJECT-TYPE"] == "SATISFIED"
    assert status["root/preconditions/REQUEST-OBJECT-FEATURES"] == "WAITING"
    assert status["root/propose-plan"] == "PENDING"
    assert agent.take_agenda_snapshot() is None  # consumed


def test_leader_agenda_zone_subtasks(graph, lexicon, thoughts):
    agent = make_agent(graph, lexicon, thoughts)
    drive_leader(agent)
    text, items = agent.take_agenda_snapshot()
    for zone in UGV_ZONES:
        assert f"@SEARCH-ZONE #{zone}.1" in text
    status = {i["id"]: i["status"] for i in items}
    assert status["root/run-plan/SEARCH-FOR-LOST-OBJECT/HALLWAY"] == "ACTIVE"
    assert status["root/run-plan/SEARCH-FOR-LOST-OBJECT/OFFICE"] == "PENDING"


# --- the drone's side -----------------------------------------------------------


def test_drone_thought_stream(graph, lexicon, thoughts):
    agent = make_agent(graph, lexicon, thoughts, name="DRONE-D", role="SUB")
    fx = drive_drone(agent)
    assert is_subsequence(DRONE_THOUGHTS, thoughts_of(fx))


def test_drone_waits_quietly_then_accepts(graph, lexicon, thoughts):
    agent = make_agent(graph, lexicon, thoughts, name="DRONE-D", role="SUB")
    agent.handle_message("DANNY", REQUEST, "msg.1", 2)
    assert agent.goal_state() == "WAITING"
    assert agent.advance(2) == []
    agent.handle_message("DANNY", FEATURES, "msg.3", 4)
    agent.handle_message("DANNY", UNLOCK, "msg.5", 6)
    fx = agent.handle_message("UGV-U", PROPOSE, "msg.6", 7)
    assert says_of(fx) == [("UGV-U", ACCEPT)]
    assert agent.goal_state() == "BUSY"
    # no questions, no narration of plan choice
    assert all("We'll use" not in t for t in thoughts_of(fx))


def test_drone_starts_assigned_zones_in_order(graph, lexicon, thoughts):
    agent = make_agent(graph, lexicon, thoughts, name="DRONE-D", role="SUB")
    fx = drive_drone(agent)
    assert [e.zone for e in fx if isinstance(e, StartSearch)] == ["KITCHEN"]
    assert agent.my_zones == DRONE_ZONES
    assert agent.their_zones == UGV_ZONES
    fx = agent.handle_zone_done("KITCHEN", 28)
    assert thoughts_of(fx) == ["I finished searching #KITCHEN.1."]
    assert says_of(fx) == [
        ("UGV-U", "I finished searching the kitchen. I did not find the keys.")]
    fx = agent.advance(29)
    assert [e.zone for e in fx if isinstance(e, StartSearch)] == ["BATHROOM"]


# --- finding the object ---------------------------------------------------------


def scan_at(scenario, robot, pose):
    world = World(scenario)
    return world.sense(robot, pose=pose, full_circle=True)


def test_leader_finds_and_reports_both_ways(graph, lexicon, thoughts):
    scenario = load_scenario(fixture_text("apartment.scenario"))
    agent = make_agent(graph, lexicon, thoughts, scenario=scenario)
    drive_leader(agent)
    agent.handle_zone_done("HALLWAY", 18)
    agent.advance(19)
    pose = ((56000, 330, 6000), 0)
    dets = scan_at(scenario, "UGV-U", pose)
    assert {d.obj_id for d in dets} >= {"couch1", "key1"}
    fx = agent.handle_scan(dets, pose, 37)
    stream = thoughts_of(fx)
    assert stream == [
        "I found #KEY.1.",
        "I am going to report this to DRONE-D.",
        "Now I am going to tell DANNY where #KEY.1 is.",
    ]
    assert says_of(fx) == [
        ("DRONE-D", "I found the keys north of the couch."),
        ("DANNY", "We found the keys! They are behind the couch."),
    ]
    assert any(isinstance(e, CancelSearch) for e in fx)
    assert any(isinstance(e, Found) and e.obj_id == "key1" for e in fx)
    assert agent.goal_state() == "DONE-FOUND"
    assert agent.advance(38) == []
    # the found report follows the percept document in the same batch
    assert isinstance(fx[0], EmitDoc) and fx[0].kind == "VMR"


def test_leader_prunes_unvisited_zones_after_find(graph, lexicon, thoughts):
    scenario = load_scenario(fixture_text("apartment.scenario"))
    agent = make_agent(graph, lexicon, thoughts, scenario=scenario)
    drive_leader(agent)
    agent.handle_zone_done("HALLWAY", 18)
    agent.advance(19)
    agent.take_agenda_snapshot()
    pose = ((56000, 330, 6000), 0)
    agent.handle_scan(scan_at(scenario, "UGV-U", pose), pose, 37)
    text, items = agent.take_agenda_snapshot()
    assert "@SEARCH-ZONE #BEDROOM.1" not in text
    assert "@SEARCH-ZONE #OFFICE.1" not in text
    assert "@SEARCH-ZONE #HALLWAY.1" in text  # already concluded, kept
    status = {i["id"]: (i["status"], i["negative"]) for i in items}
    assert status["root"] == ("SATISFIED", False)
    assert status["root/run-plan/SEARCH-FOR-LOST-OBJECT/HALLWAY"] == \
        ("SATISFIED", True)


def test_decoy_key_does_not_end_the_search(graph, lexicon, thoughts):
    scenario = load_scenario(fixture_text("apartment.scenario"))
    agent = make_agent(graph, lexicon, thoughts, scenario=scenario)
    drive_leader(agent)
    pose = ((31000, 330, 6000), 0)
    dets = scan_at(scenario, "UGV-U", pose)
    assert "key2" in {d.obj_id for d in dets}
    fx = agent.handle_scan(dets, pose, 10)
    assert not any(isinstance(e, Found) for e in fx)
    assert agent.goal_state() == "BUSY"
    # the blue-keychain key was remembered as a distinct individual
    assert agent.bindings["key2"].render() == "#KEY.2"


def test_drone_finds_in_kitchen_no_human_relay(graph, lexicon, thoughts):
    scenario = load_scenario(fixture_text("apartment.scenario"))
    scenario.move_object("key1", (6000, 30, 7000))
    agent = make_agent(graph, lexicon, thoughts, name="DRONE-D", role="SUB",
                       scenario=scenario)
    drive_drone(agent)
    pose = ((6000, 3000, 7000), 0)
    dets = scan_at(scenario, "DRONE-D", pose)
    fx = agent.handle_scan(dets, pose, 12)
    assert says_of(fx) == [
        ("UGV-U", "I found the keys east of the refrigerator.")]
    assert all(to != "DANNY" for to, _ in says_of(fx))
    assert agent.goal_state() == "DONE-FOUND"


def test_leader_relays_teammate_report_for_the_human(graph, lexicon, thoughts):
    agent = make_agent(graph, lexicon, thoughts)
    drive_leader(agent)
    fx = agent.handle_message(
        "DRONE-D", "I found the keys east of the refrigerator.", "msg.9", 13)
    assert says_of(fx) == [
        ("DANNY", "We found the keys! They are in front of the refrigerator.")]
    assert any(isinstance(e, CancelSearch) for e in fx)
    assert "Now I am going to tell DANNY where #KEY.1 is." in thoughts_of(fx)
    assert agent.goal_state() == "DONE-FOUND"


def test_drone_stands_down_on_teammate_find(graph, lexicon, thoughts):
    agent = make_agent(graph, lexicon, thoughts, name="DRONE-D", role="SUB")
    drive_drone(agent)
    fx = agent.handle_message(
        "UGV-U", "I found the keys north of the couch.", "msg.9", 38)
    assert any(isinstance(e, CancelSearch) for e in fx)
    assert says_of(fx) == []
    assert agent.goal_state() == "DONE-FOUND"
    assert agent.handle_zone_done("BATHROOM", 38) == []


def test_zone_report_round_trip_between_robots(graph, lexicon, thoughts):
    leader = make_agent(graph, lexicon, thoughts)
    drive_leader(leader)
    fx = leader.handle_message(
        "DRONE-D", "I finished searching the kitchen. I did not find the keys.",
        "msg.9", 29)
    assert leader.teammate_done == {"KITCHEN"}
    assert says_of(fx) == []


# --- coming up empty -------------------------------------------------------------


def finish_all_zones(agent):
    fx = []
    for zone in list(UGV_ZONES):
        fx += agent.handle_zone_done(zone, 40)
        fx += agent.advance(41)
    for zone_np in ("the kitchen", "the bathroom"):
        fx += agent.handle_message(
            "DRONE-D",
            f"I finished searching {zone_np}. I did not find the keys.",
            "msg.20", 42)
    fx += agent.advance(43)
    return fx


def test_search_failure_reported_to_human(graph, lexicon, thoughts):
    agent = make_agent(graph, lexicon, thoughts)
    drive_leader(agent)
    fx = finish_all_zones(agent)
    assert ("DANNY", "We searched everywhere but did not find the keys.") \
        in says_of(fx)
    assert agent.goal_state() == "DONE-EMPTY"
    _, items = agent.take_agenda_snapshot()
    status = {i["id"]: (i["status"], i["negative"]) for i in items}
    assert status["root"] == ("SATISFIED", True)
    # only one failure announcement even if advanced again
    assert says_of(agent.advance(44)) == []


def test_not_concluded_while_teammate_still_out(graph, lexicon, thoughts):
    agent = make_agent(graph, lexicon, thoughts)
    drive_leader(agent)
    for zone in UGV_ZONES:
        agent.handle_zone_done(zone, 40)
        agent.advance(41)
    assert agent.goal_state() == "BUSY"


# --- proposal timeout -------------------------------------------------------------


def test_proposal_timeout_goes_solo(graph, lexicon, thoughts):
    agent = make_agent(graph, lexicon, thoughts, timeout=3)
    agent.handle_message("DANNY", REQUEST, "msg.1", 2)
    agent.advance(2)
    agent.handle_message("DANNY", FEATURES, "msg.3", 4)
    agent.advance(4)
    agent.handle_message("DANNY", UNLOCK, "msg.5", 6)
    fx = agent.advance(6)
    assert says_of(fx) == [("DRONE-D", PROPOSE)]
    assert agent.advance(7) == []
    assert agent.advance(8) == []
    fx = agent.advance(9)  # timeout hit: 9 - 6 >= 3
    assert agent.my_zones == SOLO_ZONES
    assert [e.zone for e in fx if isinstance(e, StartSearch)] == ["HALLWAY"]
    assert all(to != "DRONE-D" for to, _ in says_of(fx))
    _, items = agent.take_agenda_snapshot()
    status = {i["id"]: i["status"] for i in items}
    assert status["root/propose-plan"] == "FAILED"


# --- odds and ends ----------------------------------------------------------------


def test_unreadable_input_gets_fallback_thought(graph, lexicon, thoughts):
    agent = make_agent(graph, lexicon, thoughts)
    fx = agent.handle_message("DANNY", "Please polish the silverware.",
                              "msg.1", 2)
    assert thoughts_of(fx) == [
        "I don't have a way to handle that input right now."]
    assert agent.goal_state() == "IDLE"
    assert isinstance(fx[0], EmitDoc) and fx[0].kind == "TMR"


def test_greeting_is_interpreted_but_inert(graph, lexicon, thoughts):
    agent = make_agent(graph, lexicon, thoughts)
    fx = agent.handle_message("DANNY", "Hello!", "msg.1", 1)
    assert thoughts_of(fx) == ['I interpreted the input "Hello!" as @GREETING.']
    assert agent.goal_state() == "IDLE"


def test_unknown_robot_rejected(graph, lexicon, thoughts):
    with pytest.raises(CognitionError):
        make_agent(graph, lexicon, thoughts, name="UGV-X")


@settings(max_examples=40, deadline=None)
@given(st.randoms(use_true_random=False))
def test_zone_ordering_is_input_order_independent(graph, lexicon, thoughts,
                                                  rng):
    agent = make_agent(graph, lexicon, thoughts)
    agent.last_seen_zone = "HALLWAY"
    zones = list(agent.scenario.zones)
    shuffled = zones[:]
    rng.shuffle(shuffled)
    ordered = agent._order_zones(shuffled, "UGV-U")
    assert sorted(ordered) == sorted(zones)
    assert ordered == agent._order_zones(zones, "UGV-U")
    assert ordered[0] == "HALLWAY"
