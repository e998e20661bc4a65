"""Tactical layer: the simulated apartment and the robots' bodies.

Geometry is fixed point: one ground unit is 100 centiunits, all positions
are int triples (x, y, z) in centiunits with y as altitude. Yaw is an int
in centidegrees, compass style: 0 faces north (+z), 90 faces east (+x).
Everything the simulation does is integer or deterministic float, so a
rerun of the same scenario is bit-identical.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

from .frames import FrameError, SlotValue, parse_value

SCALE = 100  # centiunits per ground unit

ROBOT_KINDS = ("GROUND", "AERIAL")
ROBOT_ROLES = ("LEADER", "SUB")
FACINGS = {"NORTH": 0, "EAST": 9000, "SOUTH": 18000, "WEST": 27000}

_ID_RE = re.compile(r"[a-z][a-z0-9-]*\Z")


class WorldError(ValueError):
    """Malformed scenario fixture or an impossible tactical request."""


def to_centi(value: str | float) -> int:
    return round(float(value) * SCALE)


def to_units(centi: int) -> float:
    return centi / SCALE


@dataclass(frozen=True)
class Rect:
    x0: int
    z0: int
    x1: int
    z1: int

    def contains(self, x: int, z: int) -> bool:
        return self.x0 <= x <= self.x1 and self.z0 <= z <= self.z1

    def center(self) -> tuple:
        return ((self.x0 + self.x1) // 2, (self.z0 + self.z1) // 2)


@dataclass
class Zone:
    name: str
    room: str
    aerial: bool = False
    waypoints: list = field(default_factory=list)  # [(x, z) centiunits]


@dataclass
class WorldObject:
    obj_id: str
    concept: str
    pos: tuple | None  # parts ride their holder and carry no position
    rot: tuple = (0, 0, 0)
    props: list = field(default_factory=list)  # [(prop, SlotValue)] fixture order
    part_of: str | None = None
    landmark: bool = False
    facing: str | None = None


@dataclass
class RobotSpec:
    name: str
    kind: str
    role: str
    station: tuple
    speed: int  # ground units per tick
    sense_range: int  # ground units
    fov: int  # degrees, full angle
    cruise: int | None = None  # travel altitude, centiunits (aerial only)

    def travel_altitude(self) -> int:
        return self.cruise if self.cruise is not None else self.station[1]


@dataclass
class Scenario:
    name: str
    size: tuple  # (x extent, z extent) centiunits
    rooms: dict = field(default_factory=dict)  # name -> Rect, insertion order
    zones: dict = field(default_factory=dict)  # name -> Zone
    objects: dict = field(default_factory=dict)  # id -> WorldObject
    robots: dict = field(default_factory=dict)  # name -> RobotSpec
    humans: list = field(default_factory=list)

    def room_at(self, x: int, z: int) -> str | None:
        for name, rect in self.rooms.items():
            if rect.contains(x, z):
                return name
        return None

    def parts_of(self, obj_id: str) -> list:
        return [o for o in self.objects.values() if o.part_of == obj_id]

    def landmarks(self) -> list:
        return [o for o in self.objects.values() if o.landmark]

    def move_object(self, obj_id: str, pos: tuple) -> None:
        obj = self.objects.get(obj_id)
        if obj is None or obj.pos is None:
            raise WorldError(f"cannot move {obj_id!r}")
        obj.pos = tuple(pos)

    def remove_object(self, obj_id: str) -> None:
        """Remove an object and, recursively, everything mounted on it."""
        if obj_id not in self.objects:
            raise WorldError(f"no object {obj_id!r}")
        for part in self.parts_of(obj_id):
            self.remove_object(part.obj_id)
        del self.objects[obj_id]


def load_scenario(text: str) -> Scenario:
    scenario: Scenario | None = None

    def fail(lineno: int, msg: str):
        raise WorldError(f"line {lineno}: {msg}")

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        kw = parts[0]
        if kw == "WORLD":
            if scenario is not None:
                fail(lineno, "duplicate WORLD line")
            if len(parts) != 4:
                fail(lineno, "WORLD takes name and two extents")
            scenario = Scenario(parts[1], (to_centi(parts[2]), to_centi(parts[3])))
            continue
        if scenario is None:
            fail(lineno, "WORLD line must come first")
        try:
            if kw == "ROOM":
                name, x0, z0, x1, z1 = parts[1:6]
                if name in scenario.rooms:
                    fail(lineno, f"duplicate room {name}")
                scenario.rooms[name] = Rect(
                    to_centi(x0), to_centi(z0), to_centi(x1), to_centi(z1)
                )
            elif kw == "ZONE":
                name, room = parts[1], parts[2]
                aerial = len(parts) > 3 and parts[3] == "AERIAL"
                if room not in scenario.rooms:
                    fail(lineno, f"zone {name} names unknown room {room}")
                if name in scenario.zones:
                    fail(lineno, f"duplicate zone {name}")
                scenario.zones[name] = Zone(name, room, aerial)
            elif kw == "WAYPOINT":
                zone = scenario.zones.get(parts[1])
                if zone is None:
                    fail(lineno, f"waypoint for unknown zone {parts[1]}")
                zone.waypoints.append((to_centi(parts[2]), to_centi(parts[3])))
            elif kw == "OBJECT":
                obj_id, concept = parts[1], parts[2]
                if not _ID_RE.match(obj_id):
                    fail(lineno, f"bad object id {obj_id!r}")
                if obj_id in scenario.objects:
                    fail(lineno, f"duplicate object {obj_id}")
                obj = WorldObject(obj_id, concept, None)
                rest = parts[3:]
                i = 0
                while i < len(rest):
                    tag = rest[i]
                    if tag == "AT":
                        obj.pos = tuple(to_centi(v) for v in rest[i + 1 : i + 4])
                        i += 4
                    elif tag == "ROT":
                        obj.rot = tuple(to_centi(v) for v in rest[i + 1 : i + 4])
                        i += 4
                    elif tag == "PART-OF":
                        obj.part_of = rest[i + 1]
                        i += 2
                    elif tag == "LANDMARK":
                        obj.landmark = True
                        i += 1
                    elif tag == "FACING":
                        if rest[i + 1] not in FACINGS:
                            fail(lineno, f"bad facing {rest[i + 1]!r}")
                        obj.facing = rest[i + 1]
                        i += 2
                    else:
                        fail(lineno, f"bad OBJECT tag {tag!r}")
                if (obj.pos is None) == (obj.part_of is None):
                    fail(lineno, f"{obj_id} needs exactly one of AT or PART-OF")
                scenario.objects[obj_id] = obj
            elif kw == "PROP":
                obj = scenario.objects.get(parts[1])
                if obj is None:
                    fail(lineno, f"PROP for unknown object {parts[1]}")
                try:
                    value = parse_value(" ".join(parts[3:]))
                except FrameError as exc:
                    fail(lineno, str(exc))
                obj.props.append((parts[2], value))
            elif kw == "ROBOT":
                name, kind, role = parts[1], parts[2], parts[3]
                if kind not in ROBOT_KINDS:
                    fail(lineno, f"bad robot kind {kind!r}")
                if role not in ROBOT_ROLES:
                    fail(lineno, f"bad robot role {role!r}")
                if name in scenario.robots:
                    fail(lineno, f"duplicate robot {name}")
                if parts[4] != "AT":
                    fail(lineno, "ROBOT position must follow AT")
                station = tuple(to_centi(v) for v in parts[5:8])
                opts = parts[8:]
                kv = {opts[i]: opts[i + 1] for i in range(0, len(opts) - 1, 2)}
                spec = RobotSpec(
                    name,
                    kind,
                    role,
                    station,
                    speed=int(kv["SPEED"]),
                    sense_range=int(kv["RANGE"]),
                    fov=int(kv["FOV"]),
                    cruise=to_centi(kv["CRUISE"]) if "CRUISE" in kv else None,
                )
                scenario.robots[name] = spec
            elif kw == "HUMAN":
                scenario.humans.append(parts[1])
            else:
                fail(lineno, f"unknown keyword {kw!r}")
        except (IndexError, KeyError, ValueError) as exc:
            if isinstance(exc, WorldError):
                raise
            fail(lineno, f"malformed {kw} line: {exc}")

    if scenario is None:
        raise WorldError("scenario has no WORLD line")
    for obj in scenario.objects.values():
        if obj.part_of is not None and obj.part_of not in scenario.objects:
            raise WorldError(f"{obj.obj_id} is part of unknown {obj.part_of}")
    leaders = [r for r in scenario.robots.values() if r.role == "LEADER"]
    if len(leaders) != 1:
        raise WorldError("scenario needs exactly one LEADER robot")
    for zone in scenario.zones.values():
        if not zone.waypoints:
            raise WorldError(f"zone {zone.name} has no waypoints")
    return scenario


def validate_scenario(scenario: Scenario, graph) -> list:
    """Concept hygiene: every concept the scenario mentions must be known."""
    problems = []
    for obj in scenario.objects.values():
        if not graph.has(obj.concept):
            problems.append(f"object {obj.obj_id}: unknown concept {obj.concept}")
        for prop, _ in obj.props:
            if not graph.is_property(prop):
                problems.append(f"object {obj.obj_id}: unknown property {prop}")
    for zone in scenario.zones.values():
        if not graph.has(zone.room):
            problems.append(f"zone {zone.name}: unknown room concept {zone.room}")
    return problems


# --- running bodies ----------------------------------------------------------


@dataclass
class Detection:
    obj_id: str
    concept: str
    pos: tuple | None  # ground units, floats; None for mounted parts
    rot: tuple | None
    props: list
    parts: list = field(default_factory=list)


@dataclass
class SearchJob:
    zone: str
    waypoints: list
    wp_index: int = 0
    dwell_pending: bool = False

    def current_target(self) -> tuple | None:
        if self.wp_index < len(self.waypoints):
            return self.waypoints[self.wp_index]
        return None


@dataclass
class RobotState:
    spec: RobotSpec
    pos: tuple
    yaw: int = 0
    job: SearchJob | None = None


@dataclass(frozen=True)
class WorldEvent:
    kind: str  # arrive | scan | zone-done
    robot: str
    zone: str
    waypoint: tuple | None = None
    detections: tuple = ()


def _bearing_centideg(dx: int, dz: int) -> int:
    # Compass bearing of a ground-plane offset: 0 = north (+z), 90 = east (+x).
    deg = math.degrees(math.atan2(dx, dz)) % 360.0
    return round(deg * 100) % 36000


class World:
    """Owns robot poses and jobs; steps them one tick at a time."""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.robots: dict[str, RobotState] = {}
        for spec in scenario.robots.values():
            self.robots[spec.name] = RobotState(spec, spec.station)

    # -- tasking --

    def assign_search(self, robot: str, zone_name: str) -> SearchJob:
        state = self.robots[robot]
        zone = self.scenario.zones.get(zone_name)
        if zone is None:
            raise WorldError(f"no zone {zone_name!r}")
        if state.job is not None:
            raise WorldError(f"{robot} already has a job")
        alt = state.spec.travel_altitude()
        wps = [(x, alt, z) for x, z in zone.waypoints]
        state.job = SearchJob(zone_name, wps)
        return state.job

    def cancel(self, robot: str) -> None:
        self.robots[robot].job = None

    def busy(self, robot: str) -> bool:
        return self.robots[robot].job is not None

    def any_busy(self) -> bool:
        return any(s.job is not None for s in self.robots.values())

    # -- simulation --

    def step(self, tick: int) -> list:
        """Advance every robot one tick. Returns events in roster order."""
        events: list[WorldEvent] = []
        for name, state in self.robots.items():
            job = state.job
            if job is None:
                continue
            if job.dwell_pending:
                # A dwell tick: stop and take a full-circle scan.
                job.dwell_pending = False
                detections = self.sense(name, full_circle=True)
                events.append(
                    WorldEvent("scan", name, job.zone,
                               waypoint=job.current_target(),
                               detections=tuple(detections))
                )
                job.wp_index += 1
                if job.current_target() is None:
                    state.job = None
                    events.append(WorldEvent("zone-done", name, job.zone))
                continue
            target = job.current_target()
            if self._move_toward(state, target):
                job.dwell_pending = True
                events.append(
                    WorldEvent("arrive", name, job.zone, waypoint=target)
                )
        return events

    def _move_toward(self, state: RobotState, target: tuple) -> bool:
        """One tick of travel; True when the waypoint is reached (snapped)."""
        dx = target[0] - state.pos[0]
        dy = target[1] - state.pos[1]
        dz = target[2] - state.pos[2]
        dist = math.isqrt(dx * dx + dy * dy + dz * dz)
        step = state.spec.speed * SCALE
        if dx or dz:
            state.yaw = _bearing_centideg(dx, dz)
        if dist <= step:
            state.pos = tuple(target)
            return True
        state.pos = (
            state.pos[0] + dx * step // dist,
            state.pos[1] + dy * step // dist,
            state.pos[2] + dz * step // dist,
        )
        return False

    # -- sensing --

    def sense(self, robot: str, pose: tuple | None = None,
              full_circle: bool = False) -> list:
        """Detections from a pose (default: the robot's current one).

        Range is a closed boundary compared in exact squared centiunits.
        The field of view is a full angle about the yaw heading; a dwell
        scan (full_circle) ignores it.
        """
        state = self.robots[robot]
        if pose is None:
            pos, yaw = state.pos, state.yaw
        else:
            pos, yaw = pose
        spec = state.spec
        limit_sq = (spec.sense_range * SCALE) ** 2
        half_fov = spec.fov * 100 // 2  # centidegrees
        out: list[Detection] = []
        for obj in self.scenario.objects.values():
            if obj.part_of is not None:
                continue
            dx = obj.pos[0] - pos[0]
            dy = obj.pos[1] - pos[1]
            dz = obj.pos[2] - pos[2]
            if dx * dx + dy * dy + dz * dz > limit_sq:
                continue
            if not full_circle and (dx or dz):
                diff = (_bearing_centideg(dx, dz) - yaw) % 36000
                if diff > 18000:
                    diff = 36000 - diff
                if diff > half_fov:
                    continue
            out.append(self._detect(obj))
        return out

    def _detect(self, obj: WorldObject) -> Detection:
        pos = tuple(to_units(c) for c in obj.pos) if obj.pos else None
        rot = tuple(to_units(c) for c in obj.rot) if obj.pos else None
        return Detection(
            obj.obj_id,
            obj.concept,
            pos,
            rot,
            list(obj.props),
            parts=[self._detect(p) for p in self.scenario.parts_of(obj.obj_id)],
        )

    # -- queries for the strategic layer --

    def pose_of(self, robot: str) -> tuple:
        state = self.robots[robot]
        return state.pos, state.yaw

    def room_of_point(self, x_units: float, z_units: float) -> str | None:
        return self.scenario.room_at(to_centi(x_units), to_centi(z_units))

    def nearest_landmark(self, x_units: float, z_units: float,
                         max_dist_units: float) -> WorldObject | None:
        x, z = to_centi(x_units), to_centi(z_units)
        limit_sq = to_centi(max_dist_units) ** 2
        best, best_sq = None, None
        for obj in self.scenario.landmarks():
            dsq = (obj.pos[0] - x) ** 2 + (obj.pos[2] - z) ** 2
            if dsq <= limit_sq and (best_sq is None or dsq < best_sq):
                best, best_sq = obj, dsq
        return best
