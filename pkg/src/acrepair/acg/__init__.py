"""AC Context Graph construction and serialization."""
from __future__ import annotations

from .builder import (
    COMMENT,
    EDGE_KINDS,
    FUNCTION,
    MODIFIER,
    NODE_KINDS,
    STATE_VAR,
    AcContextGraph,
    AcgEdge,
    AcgNode,
    build_acg,
    build_slice_graph,
    retained_statements,
)
from .serialize import DEFAULT_TOKEN_BUDGET, TRUNCATED_MARKER, estimate_tokens, serialize_acg

__all__ = [
    "COMMENT", "EDGE_KINDS", "FUNCTION", "MODIFIER", "NODE_KINDS", "STATE_VAR", "AcContextGraph", "AcgEdge",
    "AcgNode", "build_acg", "build_slice_graph", "retained_statements", "DEFAULT_TOKEN_BUDGET",
    "TRUNCATED_MARKER", "estimate_tokens", "serialize_acg",
]
