"""Cognitive robot teammates over a simulated apartment world.

The package splits into a strategic layer (meaning representations,
episodic memory, agenda-driven reasoning) and a tactical layer (grid
world, search jobs, message fabric), joined by a deterministic tick
runner and exposed through a CLI plus an HTTP/WebSocket gateway.
"""

__version__ = "0.1.0"

from .frames import (
    Comparator,
    DocRef,
    Frame,
    FrameError,
    InstanceRef,
    MRDocument,
    NumTuple,
    Slot,
    Sym,
    parse_mr_text,
    render_document,
)
from .ontology import OntologyError, OntologyGraph, load_ontology, validate_document

__all__ = [
    "Comparator",
    "DocRef",
    "Frame",
    "FrameError",
    "InstanceRef",
    "MRDocument",
    "NumTuple",
    "Slot",
    "Sym",
    "parse_mr_text",
    "render_document",
    "OntologyError",
    "OntologyGraph",
    "load_ontology",
    "validate_document",
    "__version__",
]
