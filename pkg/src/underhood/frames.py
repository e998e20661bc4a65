"""Frame documents: the meaning-representation layer shared by language and vision.

A document (TMR for language, VMR for vision) is an ordered list of frames.
Each frame has an instance head like ``KEY.1`` and ordered slots whose values
come from a closed seven-way union:

  instance ref      KEY.1            (anchored form ``#KEY.1``)
  concept name      BLUE-GREEN
  text literal      Long             (quoted form when the bare spelling would
                                      collide with another value shape)
  number            1 / 2.50
  number tuple      (510.00, 0.00, 23.00)   or dim style ``10x2``
  comparator        >,1 / >,FIND-ANCHOR-TIME
  cross-doc ref     TMR.3/KEY.1

Rendering is injective over that union and ``parse_mr_text`` inverts it.
Episodic memory accumulates anchored frames (``#KEY.1``) by additive merge.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

CONCEPT_RE = re.compile(r"[A-Z][A-Z0-9-]*\Z")
INSTANCE_RE = re.compile(r"(#?)([A-Z][A-Z0-9-]*)\.([0-9]+)\Z")
NUMBER_RE = re.compile(r"-?[0-9]+(\.[0-9]+)?\Z")
DIM_RE = re.compile(r"(-?[0-9]+(?:\.[0-9]+)?)x(-?[0-9]+(?:\.[0-9]+)?)\Z")

COMPARATOR_OPS = (">=", "<=", ">", "<")

DOC_KINDS = ("TMR", "VMR")


class FrameError(ValueError):
    """Malformed frame text or an ill-formed value."""


def is_concept_name(name: str) -> bool:
    return bool(CONCEPT_RE.match(name))


@dataclass(frozen=True)
class InstanceRef:
    """``KEY.1`` (document-local) or ``#KEY.1`` (episodic anchor)."""

    concept: str
    index: int
    anchored: bool = False

    def __post_init__(self) -> None:
        if not is_concept_name(self.concept):
            raise FrameError(f"bad concept name {self.concept!r}")
        if self.index < 1:
            raise FrameError(f"instance index must be >= 1, got {self.index}")

    def render(self) -> str:
        return f"{'#' if self.anchored else ''}{self.concept}.{self.index}"

    @staticmethod
    def parse(text: str) -> "InstanceRef":
        m = INSTANCE_RE.match(text)
        if not m:
            raise FrameError(f"not an instance ref: {text!r}")
        return InstanceRef(m.group(2), int(m.group(3)), anchored=bool(m.group(1)))


@dataclass(frozen=True)
class Sym:
    """A bare concept-name mention used as a slot value (e.g. COLOR BLUE-GREEN)."""

    name: str

    def __post_init__(self) -> None:
        if not is_concept_name(self.name):
            raise FrameError(f"bad concept symbol {self.name!r}")


@dataclass(frozen=True)
class Comparator:
    """Open-interval style constraint value, rendered ``>,1``."""

    op: str
    operand: "int | float | Sym"

    def __post_init__(self) -> None:
        if self.op not in COMPARATOR_OPS:
            raise FrameError(f"bad comparator op {self.op!r}")


@dataclass(frozen=True)
class NumTuple:
    """2- or 3-component numeric tuple.

    Paren style renders components with exactly two decimals:
    ``(510.00, 0.00, 23.00)``.  Dim style renders 2 components joined by
    ``x`` with integral values bare: ``10x2``.
    """

    values: tuple
    dim: bool = False

    def __post_init__(self) -> None:
        if len(self.values) not in (2, 3):
            raise FrameError("number tuple takes 2 or 3 components")
        if self.dim and len(self.values) != 2:
            raise FrameError("dim-style tuple takes exactly 2 components")
        # Quantize to two decimals at construction so render/parse round-trips.
        object.__setattr__(
            self, "values", tuple(_quant2(float(v)) for v in self.values)
        )


@dataclass(frozen=True)
class DocRef:
    """Cross-document reference, rendered ``TMR.3/KEY.1``."""

    doc_kind: str
    doc_num: int
    ref: InstanceRef

    def __post_init__(self) -> None:
        if self.doc_kind not in DOC_KINDS:
            raise FrameError(f"bad document kind {self.doc_kind!r}")
        if self.ref.anchored:
            raise FrameError("cross-doc ref target must be doc-local")

    @property
    def doc_id(self) -> str:
        return f"{self.doc_kind}.{self.doc_num}"


# str, int and float participate directly as text/number literals.
SlotValue = InstanceRef | Sym | Comparator | NumTuple | DocRef | str | int | float


def _quant2(v: float) -> float:
    q = round(v * 100) / 100
    return 0.0 if q == 0 else q  # normalize -0.0


def _fmt_num(v: int | float) -> str:
    if isinstance(v, int):
        return str(v)
    if v == int(v):
        return f"{v:.2f}"
    return f"{_quant2(v):.2f}"


def _fmt_dim_component(v: float) -> str:
    return str(int(v)) if v == int(v) else f"{v:.2f}"


_TEXT_SAFE_RE = re.compile(r"[^\t\n\r,\"\\]+\Z")


def _text_needs_quoting(s: str) -> bool:
    if not s or not _TEXT_SAFE_RE.match(s) or s != s.strip():
        return True
    # A bare spelling must not collide with any other value shape.
    if CONCEPT_RE.match(s) or INSTANCE_RE.match(s) or NUMBER_RE.match(s):
        return True
    if DIM_RE.match(s) or "(" in s or ")" in s or "/" in s:
        return True
    return s in COMPARATOR_OPS


def render_value(v: SlotValue) -> str:
    if isinstance(v, InstanceRef):
        return v.render()
    if isinstance(v, Sym):
        return v.name
    if isinstance(v, Comparator):
        return f"{v.op},{render_value(v.operand)}"
    if isinstance(v, NumTuple):
        if v.dim:
            return "x".join(_fmt_dim_component(c) for c in v.values)
        return "(" + ", ".join(f"{c:.2f}" for c in v.values) + ")"
    if isinstance(v, DocRef):
        return f"{v.doc_id}/{v.ref.render()}"
    if isinstance(v, bool):
        raise FrameError("bool is not a slot value")
    if isinstance(v, (int, float)):
        return _fmt_num(v)
    if isinstance(v, str):
        if _text_needs_quoting(v):
            escaped = v.replace("\\", "\\\\").replace('"', '\\"')
            if "\n" in escaped or "\r" in escaped or "\t" in escaped:
                raise FrameError("text literal may not span lines or contain tabs")
            return f'"{escaped}"'
        return v
    raise FrameError(f"unsupported slot value {v!r}")


def parse_value(token: str) -> SlotValue:
    token = token.strip()
    if not token:
        raise FrameError("empty value token")
    if token.startswith('"'):
        if not token.endswith('"') or len(token) < 2:
            raise FrameError(f"unterminated text literal {token!r}")
        body = token[1:-1]
        out, i = [], 0
        while i < len(body):
            ch = body[i]
            if ch == "\\":
                if i + 1 >= len(body) or body[i + 1] not in ('"', "\\"):
                    raise FrameError(f"bad escape in text literal {token!r}")
                out.append(body[i + 1])
                i += 2
            elif ch == '"':
                raise FrameError(f"unescaped quote in text literal {token!r}")
            else:
                out.append(ch)
                i += 1
        return "".join(out)
    if token.startswith("("):
        if not token.endswith(")"):
            raise FrameError(f"unterminated tuple {token!r}")
        parts = [p.strip() for p in token[1:-1].split(",")]
        if len(parts) not in (2, 3):
            raise FrameError(f"tuple takes 2 or 3 components: {token!r}")
        try:
            return NumTuple(tuple(float(p) for p in parts))
        except ValueError as exc:
            raise FrameError(f"bad tuple component in {token!r}") from exc
    if "/" in token:
        doc_part, _, ref_part = token.partition("/")
        dm = INSTANCE_RE.match(doc_part)
        if not dm or dm.group(1) or dm.group(2) not in DOC_KINDS:
            raise FrameError(f"bad cross-doc ref {token!r}")
        return DocRef(dm.group(2), int(dm.group(3)), InstanceRef.parse(ref_part))
    m = INSTANCE_RE.match(token)
    if m:
        return InstanceRef.parse(token)
    dm = DIM_RE.match(token)
    if dm:
        return NumTuple((float(dm.group(1)), float(dm.group(2))), dim=True)
    if NUMBER_RE.match(token):
        return int(token) if "." not in token else _quant2(float(token))
    if CONCEPT_RE.match(token):
        return Sym(token)
    if _text_needs_quoting(token):
        raise FrameError(f"unparseable value token {token!r}")
    return token


def _split_values(text: str) -> list[str]:
    """Split a slot's value field on top-level commas.

    Commas inside paren tuples and inside quoted text literals do not split.
    """
    parts, depth, cur = [], 0, []
    in_quote = False
    i = 0
    while i < len(text):
        ch = text[i]
        if in_quote:
            cur.append(ch)
            if ch == "\\" and i + 1 < len(text):
                cur.append(text[i + 1])
                i += 1
            elif ch == '"':
                in_quote = False
            i += 1
            continue
        if ch == '"':
            in_quote = True
        elif ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth < 0:
                raise FrameError(f"unbalanced parens in {text!r}")
        if ch == "," and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
        i += 1
    if depth != 0:
        raise FrameError(f"unbalanced parens in {text!r}")
    if in_quote:
        raise FrameError(f"unterminated text literal in {text!r}")
    parts.append("".join(cur))
    return parts


def parse_values(text: str) -> list[SlotValue]:
    tokens = _split_values(text)
    values: list[SlotValue] = []
    i = 0
    while i < len(tokens):
        tok = tokens[i].strip()
        if tok in COMPARATOR_OPS:
            # A bare op is never a complete value; it folds with its operand.
            if i + 1 >= len(tokens):
                raise FrameError(f"comparator {tok!r} missing operand")
            operand = parse_value(tokens[i + 1])
            if not isinstance(operand, (int, float, Sym)):
                raise FrameError(f"bad comparator operand {tokens[i + 1]!r}")
            values.append(Comparator(tok, operand))
            i += 2
        else:
            values.append(parse_value(tok))
            i += 1
    if not values:
        raise FrameError("slot requires at least one value")
    return values


@dataclass
class Slot:
    prop: str
    values: list

    def __post_init__(self) -> None:
        if not is_concept_name(self.prop):
            raise FrameError(f"bad property name {self.prop!r}")
        if not self.values:
            raise FrameError(f"slot {self.prop} requires at least one value")

    def render(self) -> str:
        return f"{self.prop}\t" + ",".join(render_value(v) for v in self.values)


@dataclass
class Frame:
    head: InstanceRef
    slots: list = field(default_factory=list)

    def slot(self, prop: str) -> Slot | None:
        for s in self.slots:
            if s.prop == prop:
                return s
        return None

    def values(self, prop: str) -> list:
        s = self.slot(prop)
        return list(s.values) if s else []

    def set(self, prop: str, *values: SlotValue) -> "Frame":
        self.slots.append(Slot(prop, list(values)))
        return self


def render_frame(frame: Frame) -> str:
    lines = [frame.head.render()]
    lines.extend(s.render() for s in frame.slots)
    return "\n".join(lines)


@dataclass
class MRDocument:
    """One meaning-representation document (TMR or VMR)."""

    kind: str
    num: int
    owner: str
    tick: int
    source: str
    frames: list = field(default_factory=list)
    head: InstanceRef | None = None

    def __post_init__(self) -> None:
        if self.kind not in DOC_KINDS:
            raise FrameError(f"bad document kind {self.kind!r}")

    @property
    def doc_id(self) -> str:
        return f"{self.kind}.{self.num}"

    def frame(self, ref: InstanceRef) -> Frame | None:
        for f in self.frames:
            if f.head == ref:
                return f
        return None

    def head_frame(self) -> Frame | None:
        return self.frame(self.head) if self.head else None


def render_document(doc: MRDocument, with_header: bool = True) -> str:
    parts = []
    if with_header:
        head = doc.head.render() if doc.head else "-"
        parts.append(
            f"{doc.doc_id} owner={doc.owner} tick={doc.tick} "
            f"source={doc.source} head={head}"
        )
    parts.extend(render_frame(f) for f in doc.frames)
    return "\n".join(parts)


_HEADER_RE = re.compile(
    r"(TMR|VMR)\.([0-9]+) owner=(\S+) tick=([0-9]+) source=(\S+) head=(\S+)\Z"
)


def parse_mr_text(text: str) -> MRDocument:
    """Invert render_document. Raises FrameError with a line number on bad input."""
    lines = text.split("\n")
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines or not any(ln.strip() for ln in lines):
        raise FrameError("empty document")
    hm = _HEADER_RE.match(lines[0])
    if not hm:
        raise FrameError(f"line 1: bad document header {lines[0]!r}")
    head = None if hm.group(6) == "-" else InstanceRef.parse(hm.group(6))
    doc = MRDocument(
        kind=hm.group(1),
        num=int(hm.group(2)),
        owner=hm.group(3),
        tick=int(hm.group(4)),
        source=hm.group(5),
        head=head,
    )
    current: Frame | None = None
    for lineno, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            raise FrameError(f"line {lineno}: blank line inside document")
        if "\t" in raw:
            if current is None:
                raise FrameError(f"line {lineno}: slot before any frame head")
            prop, _, rest = raw.partition("\t")
            try:
                current.slots.append(Slot(prop, parse_values(rest)))
            except FrameError as exc:
                raise FrameError(f"line {lineno}: {exc}") from exc
        else:
            try:
                ref = InstanceRef.parse(raw.strip())
            except FrameError as exc:
                raise FrameError(f"line {lineno}: bad frame head {raw!r}") from exc
            current = Frame(ref)
            doc.frames.append(current)
    if doc.head and doc.head_frame() is None:
        raise FrameError(f"declared head {doc.head.render()} has no frame")
    return doc


class DocBuilder:
    """Per-document instance numbering context (fresh numbering per document)."""

    def __init__(self, kind: str, num: int, owner: str, tick: int, source: str):
        self.doc = MRDocument(kind=kind, num=num, owner=owner, tick=tick, source=source)
        self._counters: dict[str, int] = {}

    def new_instance(self, concept: str) -> InstanceRef:
        nxt = self._counters.get(concept, 0) + 1
        self._counters[concept] = nxt
        return InstanceRef(concept, nxt)

    def add(self, frame: Frame) -> Frame:
        self.doc.frames.append(frame)
        return frame

    def new_frame(self, concept: str) -> Frame:
        return self.add(Frame(self.new_instance(concept)))


# --- episodic memory -------------------------------------------------------

COREFER = "COREFER"


@dataclass
class MemorySlot:
    prop: str
    values: list = field(default_factory=list)
    provenance: list = field(default_factory=list)  # (doc_id, tick) per value


@dataclass
class MemoryFrame:
    head: InstanceRef
    slots: list = field(default_factory=list)

    def slot(self, prop: str) -> MemorySlot | None:
        for s in self.slots:
            if s.prop == prop:
                return s
        return None

    def values(self, prop: str) -> list:
        s = self.slot(prop)
        return list(s.values) if s else []

    def slot_count(self) -> int:
        return sum(len(s.values) for s in self.slots)

    def as_frame(self) -> Frame:
        return Frame(self.head, [Slot(s.prop, list(s.values)) for s in self.slots])


class EpisodicMemory:
    """Per-agent store of anchored instances, accumulated additively.

    Anchor numbering is per-agent-global and monotonic: the n-th KEY anchor is
    ``#KEY.n`` for the life of the run, never reused, never skipped.
    """

    def __init__(self) -> None:
        self.anchors: dict[str, MemoryFrame] = {}  # key: rendered ref "#KEY.1"
        self._counters: dict[str, int] = {}

    def mint(self, concept: str) -> InstanceRef:
        nxt = self._counters.get(concept, 0) + 1
        self._counters[concept] = nxt
        ref = InstanceRef(concept, nxt, anchored=True)
        self.anchors[ref.render()] = MemoryFrame(ref)
        return ref

    def get(self, ref: InstanceRef) -> MemoryFrame | None:
        return self.anchors.get(ref.render())

    def lookup(self, rendered: str) -> MemoryFrame | None:
        return self.anchors.get(rendered)

    def resolve(self, concept: str) -> InstanceRef | None:
        """Lowest-indexed anchor of exactly this concept, if any."""
        best: InstanceRef | None = None
        for mf in self.anchors.values():
            if mf.head.concept == concept:
                if best is None or mf.head.index < best.index:
                    best = mf.head
        return best

    def resolve_or_mint(self, concept: str) -> InstanceRef:
        return self.resolve(concept) or self.mint(concept)

    def ensure(self, ref: InstanceRef) -> MemoryFrame:
        """Register an externally named anchor (e.g. minted by a lexicon template)."""
        if not ref.anchored:
            raise FrameError("ensure() takes an anchored ref")
        mf = self.anchors.get(ref.render())
        if mf is None:
            mf = MemoryFrame(ref)
            self.anchors[ref.render()] = mf
            self._counters[ref.concept] = max(
                self._counters.get(ref.concept, 0), ref.index
            )
        return mf

    def merge_slot(self, ref: InstanceRef, prop: str, value: SlotValue,
                   doc_id: str, tick: int) -> bool:
        """Additive merge of one value; returns True when newly added."""
        mf = self.ensure(ref)
        slot = mf.slot(prop)
        if slot is None:
            slot = MemorySlot(prop)
            mf.slots.append(slot)
        if value in slot.values:
            return False
        slot.values.append(value)
        slot.provenance.append((doc_id, tick))
        return True


def resolve_corefer(doc: MRDocument, memory: EpisodicMemory, graph=None):
    """Merge a document's COREFER-bearing frames into episodic memory.

    Returns (memory, bindings, conflicts): bindings maps each merged frame's
    doc-local head (rendered) to its anchor; conflicts lists human-readable
    incompatibilities (anchor concept neither subsumes nor is subsumed by the
    frame concept) for frames that were skipped.  Merging never deletes.
    """
    bindings: dict[str, InstanceRef] = {}
    conflicts: list[str] = []

    def compatible(a: str, b: str) -> bool:
        if graph is None:
            return a == b
        return graph.is_subsumed_by(a, b) or graph.is_subsumed_by(b, a)

    # First pass: decide the anchor for every frame with a COREFER slot.
    for frame in doc.frames:
        corefer = frame.slot(COREFER)
        if corefer is None:
            continue
        anchor_ref: InstanceRef | None = None
        for v in corefer.values:
            if isinstance(v, InstanceRef) and v.anchored:
                anchor_ref = v
                break
        if anchor_ref is None:
            # Only cross-document refs: this mention gets a fresh anchor.
            anchor_ref = memory.mint(frame.head.concept)
        existing = memory.get(anchor_ref)
        if existing is not None and not compatible(frame.head.concept,
                                                   anchor_ref.concept):
            conflicts.append(
                f"{frame.head.render()} cannot corefer {anchor_ref.render()}: "
                f"concepts {frame.head.concept} / {anchor_ref.concept} unrelated"
            )
            continue
        memory.ensure(anchor_ref)
        bindings[frame.head.render()] = anchor_ref

    # Second pass: merge slots, re-anchoring doc-local instance values so the
    # memory graph never points into a transient document.
    def anchor_for_local(ref: InstanceRef) -> InstanceRef:
        key = ref.render()
        if key in bindings:
            return bindings[key]
        target = doc.frame(ref)
        minted = memory.mint(ref.concept)
        bindings[key] = minted
        if target is not None:
            merge_frame(target, minted)
        return minted

    def rewrite(value: SlotValue) -> SlotValue:
        if isinstance(value, InstanceRef) and not value.anchored:
            return anchor_for_local(value)
        return value

    def merge_frame(frame: Frame, anchor_ref: InstanceRef) -> None:
        for slot in frame.slots:
            if slot.prop == COREFER:
                continue  # the merge instruction itself, not content
            for v in slot.values:
                memory.merge_slot(anchor_ref, slot.prop, rewrite(v),
                                  doc.doc_id, doc.tick)

    for frame in list(doc.frames):
        anchor_ref = bindings.get(frame.head.render())
        if anchor_ref is not None:
            merge_frame(frame, anchor_ref)

    return memory, bindings, conflicts
