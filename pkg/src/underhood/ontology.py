"""Concept hierarchy with property constraints.

The graph is a DAG rooted at ALL (children OBJECT, EVENT, PROPERTY).
Properties are themselves concepts under PROPERTY; a property's kind
(RELATION vs ATTRIBUTE) is derived from which branch subsumes it.

Fixture format (line oriented, ``#`` comments allowed):

    CONCEPT <NAME> [ISA <P1>[,<P2>...]]
    CONSTRAIN <CONCEPT> <PROPERTY> <range>

Range atoms are concept names or the lowercase literal kinds
``text`` ``number`` ``tuple`` ``comparator`` ``ref``, comma-joined.
Parent order and declaration order are significant and preserved;
``format_ontology`` is the canonical form and a fixed point.
"""

from __future__ import annotations

from dataclasses import dataclass

from .frames import (
    Comparator,
    DocRef,
    Frame,
    InstanceRef,
    NumTuple,
    SlotValue,
    Sym,
    is_concept_name,
)

ROOT = "ALL"
TRI_ROOTS = ("OBJECT", "EVENT", "PROPERTY")
RELATION = "RELATION"
ATTRIBUTE = "ATTRIBUTE"
LITERAL_KINDS = frozenset({"text", "number", "tuple", "comparator", "ref"})


class OntologyError(ValueError):
    """Structural problem in an ontology fixture."""


@dataclass(frozen=True)
class RangeSpec:
    """Union of allowed fillers: concept filters and/or literal kinds."""

    atoms: tuple

    def render(self) -> str:
        return ",".join(self.atoms)


@dataclass(frozen=True)
class PropertyDef:
    name: str
    kind: str  # RELATION | ATTRIBUTE
    range: RangeSpec | None


@dataclass(frozen=True)
class Violation:
    frame: str
    prop: str | None
    kind: str
    detail: str

    def __str__(self) -> str:
        where = f"{self.frame}.{self.prop}" if self.prop else self.frame
        return f"{where}: [{self.kind}] {self.detail}"


class OntologyGraph:
    """Immutable-after-load concept graph."""

    def __init__(self) -> None:
        self._parents: dict[str, tuple] = {}
        self._constraints: dict[tuple, RangeSpec] = {}
        self._constraint_order: list[tuple] = []
        self._ancestors: dict[str, frozenset] = {}
        self._frozen = False

    # -- construction (loader only) --

    def _add_concept(self, name: str, parents: tuple) -> None:
        if self._frozen:
            raise OntologyError("ontology is immutable after load")
        if name in self._parents:
            raise OntologyError(f"duplicate concept {name}")
        self._parents[name] = parents

    def _add_constraint(self, concept: str, prop: str, spec: RangeSpec) -> None:
        if self._frozen:
            raise OntologyError("ontology is immutable after load")
        key = (concept, prop)
        if key in self._constraints:
            raise OntologyError(f"duplicate constraint {concept} {prop}")
        self._constraints[key] = spec
        self._constraint_order.append(key)

    def _freeze(self) -> None:
        self._check_structure()
        for c in self._parents:
            self._ancestors[c] = frozenset(self._walk_up(c))
        self._frozen = True

    def _walk_up(self, concept: str):
        seen: set = set()
        stack = [concept]
        while stack:
            c = stack.pop()
            if c in seen:
                continue
            seen.add(c)
            stack.extend(self._parents[c])
        return seen

    def _check_structure(self) -> None:
        for name, parents in self._parents.items():
            for p in parents:
                if p not in self._parents:
                    raise OntologyError(f"{name}: undeclared parent {p}")
        # Cycle check: iterative DFS, reporting the offending chain.
        WHITE, GRAY, BLACK = 0, 1, 2
        color = {c: WHITE for c in self._parents}
        for start in self._parents:
            if color[start] != WHITE:
                continue
            stack: list = [(start, iter(self._parents[start]))]
            path = [start]
            color[start] = GRAY
            while stack:
                node, it = stack[-1]
                advanced = False
                for parent in it:
                    if color[parent] == GRAY:
                        cycle = path[path.index(parent):] + [parent]
                        raise OntologyError(
                            "cycle: " + " -> ".join(cycle)
                        )
                    if color[parent] == WHITE:
                        color[parent] = GRAY
                        stack.append((parent, iter(self._parents[parent])))
                        path.append(parent)
                        advanced = True
                        break
                if not advanced:
                    color[node] = BLACK
                    stack.pop()
                    path.pop()
        if ROOT not in self._parents:
            raise OntologyError("no ALL root")
        if self._parents[ROOT]:
            raise OntologyError("ALL must have no parents")
        for c, parents in self._parents.items():
            if c != ROOT and not parents:
                raise OntologyError(f"{c}: every concept except ALL needs a parent")
        for tri in TRI_ROOTS:
            if tri not in self._parents or ROOT not in self._parents[tri]:
                raise OntologyError(f"missing top-level concept {tri} under ALL")

    # -- queries --

    def concepts(self):
        return list(self._parents)

    def has(self, concept: str) -> bool:
        return concept in self._parents

    def parents(self, concept: str) -> tuple:
        try:
            return self._parents[concept]
        except KeyError:
            raise OntologyError(f"unknown concept {concept}") from None

    def is_subsumed_by(self, child: str, ancestor: str) -> bool:
        """Reflexive-transitive subsumption."""
        if child not in self._parents:
            raise OntologyError(f"unknown concept {child}")
        if ancestor not in self._parents:
            raise OntologyError(f"unknown concept {ancestor}")
        return ancestor in self._ancestors[child]

    def inherited_filler(self, concept: str, prop: str) -> RangeSpec | None:
        """Nearest-ancestor constraint; BFS with fixture parent order on ties."""
        if concept not in self._parents:
            raise OntologyError(f"unknown concept {concept}")
        queue = [concept]
        seen = {concept}
        while queue:
            nxt: list = []
            for node in queue:
                spec = self._constraints.get((node, prop))
                if spec is not None:
                    return spec
                for parent in self._parents[node]:
                    if parent not in seen:
                        seen.add(parent)
                        nxt.append(parent)
            queue = nxt
        return None

    def property_kind(self, prop: str) -> str | None:
        if prop not in self._parents:
            return None
        if prop in (RELATION, ATTRIBUTE):
            return prop
        if self.is_subsumed_by(prop, RELATION):
            return RELATION
        if self.is_subsumed_by(prop, ATTRIBUTE):
            return ATTRIBUTE
        return None

    def property_def(self, prop: str) -> PropertyDef | None:
        """Derived view of a property: kind from its PROPERTY branch, range from
        the most general (ALL-level) constraint when one exists."""
        kind = self.property_kind(prop)
        if kind is None:
            return None
        return PropertyDef(prop, kind, self.inherited_filler(ROOT, prop))

    def is_property(self, name: str) -> bool:
        return (name in self._parents and name not in ("PROPERTY",)
                and self.is_subsumed_by(name, "PROPERTY"))


def load_ontology(text: str) -> OntologyGraph:
    graph = OntologyGraph()
    for lineno, raw in enumerate(text.split("\n"), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        parts = line.split()
        try:
            if parts[0] == "CONCEPT":
                if len(parts) == 2:
                    graph._add_concept(parts[1], ())
                elif len(parts) == 4 and parts[2] == "ISA":
                    parents = tuple(parts[3].split(","))
                    if not all(is_concept_name(p) for p in parents):
                        raise OntologyError(f"bad parent list {parts[3]!r}")
                    graph._add_concept(parts[1], parents)
                else:
                    raise OntologyError("CONCEPT takes: NAME [ISA P1[,P2...]]")
                if not is_concept_name(parts[1]):
                    raise OntologyError(f"bad concept name {parts[1]!r}")
            elif parts[0] == "CONSTRAIN":
                if len(parts) != 4:
                    raise OntologyError("CONSTRAIN takes: CONCEPT PROPERTY RANGE")
                atoms = tuple(parts[3].split(","))
                for atom in atoms:
                    if atom in LITERAL_KINDS or is_concept_name(atom):
                        continue
                    raise OntologyError(f"bad range atom {atom!r}")
                graph._add_constraint(parts[1], parts[2], RangeSpec(atoms))
            else:
                raise OntologyError(f"unknown record {parts[0]!r}")
        except OntologyError as exc:
            raise OntologyError(f"line {lineno}: {exc}") from None
    graph._freeze()
    # Constraints must name declared concepts and properties.
    for (concept, prop) in graph._constraint_order:
        if not graph.has(concept):
            raise OntologyError(f"constraint on undeclared concept {concept}")
        if not graph.is_property(prop):
            raise OntologyError(f"constraint with undeclared property {prop}")
        for atom in graph._constraints[(concept, prop)].atoms:
            if atom not in LITERAL_KINDS and not graph.has(atom):
                raise OntologyError(f"range atom {atom} is not a declared concept")
    return graph


def format_ontology(graph: OntologyGraph) -> str:
    """Canonical fixture text; load(format(g)) == g and format is a fixed point."""
    lines = []
    for concept in graph.concepts():
        parents = graph.parents(concept)
        if parents:
            lines.append(f"CONCEPT {concept} ISA {','.join(parents)}")
        else:
            lines.append(f"CONCEPT {concept}")
    for key in graph._constraint_order:
        concept, prop = key
        lines.append(f"CONSTRAIN {concept} {prop} {graph._constraints[key].render()}")
    return "\n".join(lines) + "\n"


def _value_matches_atom(value: SlotValue, atom: str, graph: OntologyGraph) -> bool:
    if atom in LITERAL_KINDS:
        if atom == "text":
            return isinstance(value, str)
        if atom == "number":
            return isinstance(value, (int, float)) and not isinstance(value, bool)
        if atom == "tuple":
            return isinstance(value, NumTuple)
        if atom == "comparator":
            return isinstance(value, Comparator)
        if atom == "ref":
            return isinstance(value, (InstanceRef, DocRef))
        return False
    concept = None
    if isinstance(value, Sym):
        concept = value.name
    elif isinstance(value, InstanceRef):
        concept = value.concept
    elif isinstance(value, DocRef):
        concept = value.ref.concept
    if concept is None or not graph.has(concept):
        return False
    return graph.is_subsumed_by(concept, atom)


def validate_frame(frame: Frame, graph: OntologyGraph) -> list:
    """All violations as data; an empty list means the frame is well formed."""
    violations: list[Violation] = []
    head = frame.head.render()
    if not graph.has(frame.head.concept):
        violations.append(
            Violation(head, None, "unknown-concept",
                      f"concept {frame.head.concept} is not in the ontology")
        )
        return violations
    for slot in frame.slots:
        if not graph.is_property(slot.prop):
            violations.append(
                Violation(head, slot.prop, "undeclared-property",
                          f"{slot.prop} is not declared under PROPERTY")
            )
            continue
        spec = graph.inherited_filler(frame.head.concept, slot.prop)
        for value in slot.values:
            if isinstance(value, Sym) and not graph.has(value.name):
                violations.append(
                    Violation(head, slot.prop, "unknown-concept",
                              f"value concept {value.name} is not in the ontology")
                )
                continue
            if isinstance(value, InstanceRef) and not graph.has(value.concept):
                violations.append(
                    Violation(head, slot.prop, "unknown-concept",
                              f"instance concept {value.concept} is not in the "
                              f"ontology")
                )
                continue
            if spec is None:
                continue
            if not any(_value_matches_atom(value, atom, graph)
                       for atom in spec.atoms):
                from .frames import render_value
                violations.append(
                    Violation(head, slot.prop, "range",
                              f"{render_value(value)} outside range "
                              f"{spec.render()}")
                )
    return violations


def validate_document(doc, graph: OntologyGraph) -> list:
    out: list[Violation] = []
    for frame in doc.frames:
        out.extend(validate_frame(frame, graph))
    return out
