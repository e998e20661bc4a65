"""Language and percept interpretation against the closed lexicon.

Utterances become TMR documents by matching regex templates and filling
meaning-representation bodies; percepts become VMR documents by framing
detections and binding them to episodic anchors. Generation runs the other
way: templated surface text, with spatial descriptions chosen per audience
(robots get cardinal directions, humans get landmark-relative ones).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

from .frames import (
    CONCEPT_RE,
    INSTANCE_RE,
    Comparator,
    DocBuilder,
    EpisodicMemory,
    FrameError,
    InstanceRef,
    MRDocument,
    NumTuple,
    parse_mr_text,
    render_value,
)


class LexiconError(ValueError):
    pass


WORD_RE = re.compile(r"[a-z][a-z0-9-]*\Z")
GEN_KEY_RE = re.compile(r"[A-Z][A-Z0-9-]*\Z")
ENTRY_NAME_RE = re.compile(r"[a-z][a-z0-9-]*\Z")

# Variables allowed in entry templates; checked at load time.
TEMPLATE_VARS = ("NC", "CAP", "REL", "CARD", "ZONES", "DOCREF", "ANCHOR",
                 "SELF", "SPEAKER", "RAWTEXT")
_VAR_TOKEN_RE = re.compile(r"\$([A-Z]+)")
_INDEXED_VAR_RE = re.compile(r"\$(NC|CAP|REL|CARD|ZONES)\((\d+)\)")

CARDINAL_PROPS = {
    "north": "NORTH-OF",
    "east": "EAST-OF",
    "south": "SOUTH-OF",
    "west": "WEST-OF",
}
CARDINAL_WORDS = {v: k for k, v in CARDINAL_PROPS.items()}
_DIR_VECTORS = {
    "NORTH-OF": (0, 1),
    "EAST-OF": (1, 0),
    "SOUTH-OF": (0, -1),
    "WEST-OF": (-1, 0),
}


@dataclass(frozen=True)
class Noun:
    word: str
    concept: str
    plural: bool


@dataclass(frozen=True)
class Surface:
    phrase: str
    plural: bool


@dataclass
class LexEntry:
    name: str
    priority: int
    pattern: str
    regex: re.Pattern
    head: str
    template: list = field(default_factory=list)


@dataclass
class Lexicon:
    entries: list = field(default_factory=list)
    nouns: dict = field(default_factory=dict)
    surfaces: dict = field(default_factory=dict)
    gens: dict = field(default_factory=dict)

    def noun(self, word: str) -> Noun:
        key = "-".join(word.lower().split())
        n = self.nouns.get(key)
        if n is None:
            raise LexiconError(f"unknown noun {word!r}")
        return n

    def surface(self, concept: str) -> Surface:
        s = self.surfaces.get(concept)
        if s is None:
            # graceful display for concepts without a curated phrase
            return Surface("the " + concept.lower().replace("-", " "), False)
        return s

    def generate(self, key: str, *args: str) -> str:
        template = self.gens.get(key)
        if template is None:
            raise LexiconError(f"unknown generation template {key!r}")
        out = template
        for i, arg in enumerate(args, start=1):
            out = out.replace(f"${i}", arg)
        if re.search(r"\$[0-9]", out):
            raise LexiconError(f"generation template {key!r} wants more arguments")
        return out


def load_lexicon(text: str) -> Lexicon:
    """Parse the lexicon fixture. Raises LexiconError with a line number."""
    lex = Lexicon()
    lines = text.split("\n")
    i = 0

    def fail(lineno: int, msg: str):
        raise LexiconError(f"line {lineno}: {msg}")

    while i < len(lines):
        raw = lines[i]
        lineno = i + 1
        i += 1
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        parts = stripped.split()
        kind = parts[0]
        if kind == "NOUN":
            if len(parts) != 4 or parts[3] not in ("SG", "PL"):
                fail(lineno, "NOUN takes: word CONCEPT SG|PL")
            if not WORD_RE.match(parts[1]):
                fail(lineno, f"bad noun word {parts[1]!r}")
            if not CONCEPT_RE.match(parts[2]):
                fail(lineno, f"bad concept {parts[2]!r}")
            if parts[1] in lex.nouns:
                fail(lineno, f"duplicate noun {parts[1]!r}")
            lex.nouns[parts[1]] = Noun(parts[1], parts[2], parts[3] == "PL")
        elif kind == "SURFACE":
            if len(parts) < 4 or parts[2] not in ("SG", "PL"):
                fail(lineno, "SURFACE takes: CONCEPT SG|PL phrase")
            if not CONCEPT_RE.match(parts[1]):
                fail(lineno, f"bad concept {parts[1]!r}")
            if parts[1] in lex.surfaces:
                fail(lineno, f"duplicate surface {parts[1]!r}")
            phrase = stripped.split(None, 3)[3]
            lex.surfaces[parts[1]] = Surface(phrase, parts[2] == "PL")
        elif kind == "GEN":
            if len(parts) < 3:
                fail(lineno, "GEN takes: KEY template")
            if not GEN_KEY_RE.match(parts[1]):
                fail(lineno, f"bad generation key {parts[1]!r}")
            if parts[1] in lex.gens:
                fail(lineno, f"duplicate generation key {parts[1]!r}")
            lex.gens[parts[1]] = stripped.split(None, 2)[2]
        elif kind == "ENTRY":
            if len(parts) != 2 or not ENTRY_NAME_RE.match(parts[1]):
                fail(lineno, "ENTRY takes one lowercase name")
            name = parts[1]
            if any(e.name == name for e in lex.entries):
                fail(lineno, f"duplicate entry {name!r}")
            entry, i = _read_entry(name, lines, i, fail)
            lex.entries.append(entry)
        else:
            fail(lineno, f"unknown record kind {kind!r}")
    if not lex.entries:
        raise LexiconError("lexicon has no entries")
    return lex


def _read_entry(name: str, lines: list, i: int, fail) -> tuple:
    priority = None
    pattern = None
    head = None
    template: list = []
    start = i
    while i < len(lines):
        raw = lines[i]
        lineno = i + 1
        i += 1
        if raw.strip() == "END":
            if priority is None or pattern is None or head is None:
                fail(lineno, f"entry {name!r} needs PRIORITY, PATTERN and HEAD")
            if not template:
                fail(lineno, f"entry {name!r} has an empty template")
            try:
                regex = re.compile(pattern)
            except re.error as exc:
                fail(lineno, f"entry {name!r} pattern does not compile: {exc}")
            _check_template(name, template, regex.groups, head, lineno, fail)
            return LexEntry(name, priority, pattern, regex, head, template), i
        if not raw.strip():
            fail(lineno, f"blank line inside entry {name!r}")
        if raw.startswith("PRIORITY "):
            try:
                priority = int(raw.split(None, 1)[1])
            except ValueError:
                fail(lineno, "PRIORITY takes an integer")
        elif raw.startswith("PATTERN "):
            pattern = raw.split(None, 1)[1]
        elif raw.startswith("HEAD "):
            head = raw.split(None, 1)[1].strip()
            if not INSTANCE_RE.match(head) or head.startswith("#"):
                fail(lineno, f"HEAD must be a document-local instance, got {head!r}")
        else:
            if pattern is None or head is None:
                fail(lineno, f"entry {name!r}: template before PATTERN/HEAD")
            template.append(raw)
    fail(start, f"entry {name!r} is missing END")


def _check_template(name, template, group_count, head, lineno, fail):
    head_seen = False
    for line in template:
        for m in _VAR_TOKEN_RE.finditer(line):
            if m.group(1) not in TEMPLATE_VARS:
                fail(lineno, f"entry {name!r} uses unknown variable ${m.group(1)}")
        for m in _INDEXED_VAR_RE.finditer(line):
            if int(m.group(2)) > group_count:
                fail(lineno, f"entry {name!r}: ${m.group(1)}({m.group(2)}) "
                             f"exceeds {group_count} capture groups")
        if line == head:
            head_seen = True
    if not head_seen and not any("$" in line for line in template):
        fail(lineno, f"entry {name!r}: head {head!r} never appears in template")


def load_thoughts(text: str) -> dict:
    """Thought templates: KEY TAB template, one per line."""
    out: dict = {}
    for lineno, raw in enumerate(text.split("\n"), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "\t" not in raw:
            raise LexiconError(f"line {lineno}: thought line has no tab")
        key, _, template = raw.partition("\t")
        if not GEN_KEY_RE.match(key):
            raise LexiconError(f"line {lineno}: bad thought key {key!r}")
        if key in out:
            raise LexiconError(f"line {lineno}: duplicate thought key {key!r}")
        out[key] = template
    return out


def think(templates: dict, key: str, **fields) -> str:
    template = templates.get(key)
    if template is None:
        raise LexiconError(f"unknown thought key {key!r}")
    try:
        return template.format(**fields)
    except (KeyError, IndexError) as exc:
        raise LexiconError(f"thought {key!r} is missing field {exc}") from exc


# --- utterance analysis ------------------------------------------------------


def normalize_utterance(text: str) -> str:
    return " ".join(text.lower().split())


def analyze_utterance(lexicon: Lexicon, text: str, *, memory: EpisodicMemory,
                      self_anchor: InstanceRef, speaker_anchor: InstanceRef,
                      owner: str, doc_num: int, tick: int,
                      source: str) -> MRDocument:
    """Interpret one utterance into a TMR.

    Anything the lexicon cannot place becomes an UNINTERPRETED document
    carrying the raw text, so downstream reasoning always has a frame to
    point at. Anchors named by the winning template are resolved or minted
    in the listener's episodic memory as a side effect of analysis.
    """
    norm = normalize_utterance(text)
    best = None
    for order, entry in enumerate(lexicon.entries):
        m = entry.regex.fullmatch(norm)
        if m is None:
            continue
        key = (-entry.priority, -len(m.group(0)), order)
        if best is None or key < best[0]:
            best = (key, entry, m)
    if best is None:
        return _uninterpreted(text, speaker_anchor, owner, doc_num, tick, source)
    _, entry, m = best
    try:
        body = _instantiate(entry, m, lexicon, memory,
                            self_anchor, speaker_anchor, text, doc_num)
        header = (f"TMR.{doc_num} owner={owner} tick={tick} "
                  f"source={source} head={entry.head}")
        return parse_mr_text(header + "\n" + body)
    except (LexiconError, FrameError):
        return _uninterpreted(text, speaker_anchor, owner, doc_num, tick, source)


def _uninterpreted(text, speaker_anchor, owner, doc_num, tick, source):
    b = DocBuilder("TMR", doc_num, owner, tick, source)
    f = b.new_frame("UNINTERPRETED")
    f.set("AGENT", speaker_anchor)
    f.set("RAW-TEXT", text)
    b.doc.head = f.head
    return b.doc


def _instantiate(entry, m, lexicon, memory, self_anchor, speaker_anchor,
                 raw_text, doc_num) -> str:
    def capture(idx: str) -> str:
        got = m.group(int(idx))
        if got is None:
            raise LexiconError(f"capture group {idx} did not participate")
        return got

    def sub_nc(mm):
        return lexicon.noun(capture(mm.group(1))).concept

    def sub_cap(mm):
        w = capture(mm.group(1))
        return w[:1].upper() + w[1:]

    def sub_rel(mm):
        w = capture(mm.group(1))
        if w not in CARDINAL_PROPS:
            raise LexiconError(f"not a direction word: {w!r}")
        return CARDINAL_PROPS[w]

    def sub_card(mm):
        return "CARDINALITY\t>,1" if lexicon.noun(capture(mm.group(1))).plural else ""

    def sub_zones(mm):
        names = [p.strip() for p in capture(mm.group(1)).split(" and ")]
        refs = []
        for np in names:
            if np.startswith("the "):
                np = np[4:]
            refs.append(memory.resolve_or_mint(lexicon.noun(np).concept).render())
        return ",".join(refs)

    def sub_anchor(mm):
        return memory.resolve_or_mint(mm.group(1)).render()

    out_lines = []
    for line in entry.template:
        s = re.sub(r"\$NC\((\d+)\)", sub_nc, line)
        s = re.sub(r"\$CAP\((\d+)\)", sub_cap, s)
        s = re.sub(r"\$REL\((\d+)\)", sub_rel, s)
        s = re.sub(r"\$CARD\((\d+)\)", sub_card, s)
        s = re.sub(r"\$ZONES\((\d+)\)", sub_zones, s)
        s = re.sub(r"\$DOCREF\(([^)]+)\)", lambda mm: f"TMR.{doc_num}/{mm.group(1)}", s)
        s = re.sub(r"\$ANCHOR\(([A-Z][A-Z0-9-]*)\)", sub_anchor, s)
        s = s.replace("$SELF", self_anchor.render())
        s = s.replace("$SPEAKER", speaker_anchor.render())
        s = s.replace("$RAWTEXT", render_value(raw_text))
        if s.strip():
            out_lines.append(s)
    return "\n".join(out_lines)


# --- percept interpretation --------------------------------------------------

# Slots that describe circumstance rather than identity; ignored when deciding
# whether a remembered object and a detection are the same thing.
NONDESCRIPTIVE_PROPS = frozenset({
    "COREFER", "CARDINALITY", "TIME", "LOCATION", "LOCATION-ABSOLUTE",
    "ROTATION-ABSOLUTE", "ORIENTATION",
    "NORTH-OF", "SOUTH-OF", "EAST-OF", "WEST-OF",
})


def _detection_values(detection, prop: str) -> list:
    return [v for p, v in detection.props if p == prop]


def frame_matches_detection(memory: EpisodicMemory, ref: InstanceRef,
                            detection, graph) -> bool:
    """Every descriptive fact remembered about ref holds of the detection.

    Part references are matched existentially and may share detection parts;
    an anchor with no descriptive content matches any detection of a
    compatible concept.
    """
    mf = memory.get(ref)
    if mf is None:
        return False
    if not graph.is_subsumed_by(detection.concept, mf.head.concept):
        return False
    for slot in mf.slots:
        if slot.prop in NONDESCRIPTIVE_PROPS:
            continue
        for value in slot.values:
            if isinstance(value, InstanceRef):
                if not value.anchored:
                    continue
                if slot.prop != "HAS-OBJECT-AS-PART":
                    continue
                if not any(frame_matches_detection(memory, value, part, graph)
                           for part in detection.parts):
                    return False
            elif isinstance(value, (Comparator,)):
                continue
            else:
                if value not in _detection_values(detection, slot.prop):
                    return False
    return True


def match_found_object(memory: EpisodicMemory, sought: InstanceRef,
                       detection, graph) -> bool:
    """Does this detection satisfy the description of the sought anchor?"""
    return frame_matches_detection(memory, sought, detection, graph)


def bind_detection(detection, *, memory: EpisodicMemory, graph,
                   bindings: dict) -> InstanceRef:
    """Choose the episodic anchor for a detected object.

    A previously tagged object keeps its anchor. Otherwise the lowest-indexed
    compatible anchor whose description the detection satisfies is reused,
    preferring anchors of the exact concept; anchors already tagged to a
    different object are off limits, and an anchor of a broader concept only
    qualifies when it carries some descriptive content (a bare generic memory
    must not swallow whatever walks by). Failing all that, a fresh anchor is
    minted. The tag is recorded in bindings either way.
    """
    ref = bindings.get(detection.obj_id)
    if ref is not None:
        return ref
    taken = {r.render() for r in bindings.values()}
    candidates = []
    for mf in memory.anchors.values():
        if mf.head.render() in taken:
            continue
        if not graph.is_subsumed_by(detection.concept, mf.head.concept):
            continue
        if mf.head.concept != detection.concept and not any(
                s.prop not in NONDESCRIPTIVE_PROPS and s.values
                for s in mf.slots):
            continue
        if frame_matches_detection(memory, mf.head, detection, graph):
            candidates.append(mf.head)
    candidates.sort(key=lambda r: (r.concept != detection.concept, r.index))
    ref = candidates[0] if candidates else memory.mint(detection.concept)
    bindings[detection.obj_id] = ref
    return ref


def interpret_percept(detections, *, memory: EpisodicMemory, graph,
                      bindings: dict, self_anchor: InstanceRef, pose,
                      owner: str, doc_num: int, tick: int,
                      source: str = "sense") -> MRDocument:
    """Frame a sweep of detections as a VMR.

    Object frames come first in detection order, parts directly after their
    owner; the observer's own frame follows, and a VISUAL-EVENT head ties the
    scene together whenever anything was seen. Slot order per object: the
    object's fixture properties, parts, absolute placement, then COREFER.
    """
    b = DocBuilder("VMR", doc_num, owner, tick, source)

    def frame_for(det) -> InstanceRef:
        f = b.new_frame(det.concept)
        for prop, value in det.props:
            f.set(prop, value)
        part_refs = [frame_for(p) for p in det.parts]
        if part_refs:
            f.set("HAS-OBJECT-AS-PART", *part_refs)
        if det.pos is not None:
            f.set("LOCATION-ABSOLUTE", NumTuple(det.pos))
            f.set("ROTATION-ABSOLUTE", NumTuple(det.rot))
        anchor = bind_detection(det, memory=memory, graph=graph, bindings=bindings)
        f.set("COREFER", anchor)
        return f.head

    theme_refs = [frame_for(det) for det in detections]
    (pos, yaw) = pose
    me = b.new_frame("LEIA")
    me.set("COREFER", self_anchor)
    me.set("LOCATION", NumTuple(tuple(c / 100 for c in pos)))
    me.set("ORIENTATION", NumTuple((0.0, yaw / 100, 0.0)))
    if theme_refs:
        ev = b.new_frame("VISUAL-EVENT")
        ev.set("AGENT", self_anchor)
        ev.set("THEME", *theme_refs)
        b.doc.head = ev.head
    else:
        b.doc.head = me.head
    return b.doc


# --- audience-sensitive spatial description ----------------------------------


def _facing_vector(yaw_centideg: int) -> tuple:
    rad = math.radians(yaw_centideg / 100)
    return (round(math.sin(rad)), round(math.cos(rad)))


def cardinal_between(found_xz: tuple, landmark_xz: tuple) -> str:
    """Direction word for found relative to the landmark; dominant axis wins,
    east/west on a tie."""
    dx = found_xz[0] - landmark_xz[0]
    dz = found_xz[1] - landmark_xz[1]
    if abs(dx) >= abs(dz):
        return "east" if dx >= 0 else "west"
    return "north" if dz >= 0 else "south"


def relative_between(found_xz: tuple, landmark_xz: tuple,
                     facing_yaw_centideg: int) -> str:
    """Landmark-relative wording from the landmark's own facing."""
    dx = found_xz[0] - landmark_xz[0]
    dz = found_xz[1] - landmark_xz[1]
    fx, fz = _facing_vector(facing_yaw_centideg)
    ahead = dx * fx + dz * fz
    left = dx * -fz + dz * fx
    if abs(ahead) >= abs(left):
        return "in front of" if ahead >= 0 else "behind"
    return "to the left of" if left > 0 else "to the right of"


def relative_from_cardinal(prop: str, facing_yaw_centideg: int) -> str:
    """Convert a stored cardinal relation into landmark-relative wording."""
    if prop not in _DIR_VECTORS:
        raise LexiconError(f"not a cardinal relation: {prop!r}")
    dx, dz = _DIR_VECTORS[prop]
    fx, fz = _facing_vector(facing_yaw_centideg)
    ahead = dx * fx + dz * fz
    left = dx * -fz + dz * fx
    if abs(ahead) >= abs(left):
        return "in front of" if ahead >= 0 else "behind"
    return "to the left of" if left > 0 else "to the right of"


def cardinal_phrase(lexicon: Lexicon, direction_word: str,
                    landmark_concept: str) -> str:
    return f"{direction_word} of {lexicon.surface(landmark_concept).phrase}"


def relative_phrase(lexicon: Lexicon, relation_words: str,
                    landmark_concept: str) -> str:
    return f"{relation_words} {lexicon.surface(landmark_concept).phrase}"


def room_phrase(lexicon: Lexicon, room_concept: str) -> str:
    return f"in {lexicon.surface(room_concept).phrase}"
