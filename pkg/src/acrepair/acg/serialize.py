"""Deterministic text rendering of an ACG for prompts, with a token budget."""
from __future__ import annotations

import math
from dataclasses import replace
from typing import Optional

from .builder import COMMENT, FUNCTION, MODIFIER, STATE_VAR, AcContextGraph, AcgEdge, AcgNode

DEFAULT_TOKEN_BUDGET = 6000
TRUNCATED_MARKER = "[truncated]"


def estimate_tokens(text: str) -> int:
    """Four characters per token, rounded up."""
    return math.ceil(len(text) / 4)


def _name(key) -> str:
    return key[2]


def _relationship(edge: AcgEdge, nodes: dict) -> str:
    src, dst = _name(edge.src), _name(edge.dst)
    if edge.kind == "invocation":
        return f"{src} invokes {dst}"
    if edge.kind == "modifying":
        return f"{src} is modified by {dst}"
    if edge.kind == "readWrite":
        return f"{src} reads/writes {dst}"
    return f"comment on {dst}: {' '.join(nodes[edge.src].signature.split())}"


def _render(g: AcContextGraph, nodes: dict, dropped: list[str]) -> str:
    root = g.nodes[g.root]
    out = [f"// AC context graph of {root.contract}.{root.name}"]
    for n in sorted(nodes.values(), key=lambda n: n.sort_key):
        if n.kind == COMMENT:
            continue  # rendered through their relationship lines
        tag = " (vulnerable function)" if n.key == g.root else ""
        out.append(f"[{n.kind}] {n.contract}.{n.name}{tag}")
        if n.signature:
            out.append(f"  signature: {n.signature.strip()}")
        if n.body:
            out.append("  body:")
            out.extend(f"    {line.strip()}" for line in n.body)
    rels = [
        _relationship(e, nodes)
        for e in g.edges
        if e.src in nodes and e.dst in nodes
    ]
    if rels:
        out.append("relationships:")
        out.extend(f"  {r}" for r in rels)
    if dropped:
        out.append(f"{TRUNCATED_MARKER} omitted: " + "; ".join(dropped))
    return "\n".join(out) + "\n"


def serialize_acg(g: AcContextGraph, token_budget: Optional[int] = DEFAULT_TOKEN_BUDGET) -> str:
    """Render ``g``; when over budget drop comments, then state-variable bodies,
    then bodies and finally whole nodes of non-root functions (last in order first).

    ``token_budget=None`` disables truncation.
    """
    nodes = dict(g.nodes)
    dropped: list[str] = []
    text = _render(g, nodes, dropped)
    if token_budget is None or estimate_tokens(text) <= token_budget:
        return text

    def fits() -> bool:
        return estimate_tokens(_render(g, nodes, dropped)) <= token_budget

    order = sorted(nodes.values(), key=lambda n: n.sort_key, reverse=True)
    steps = []
    steps += [("drop", n, f"comment {n.contract}.{n.name}") for n in order if n.kind == COMMENT]
    steps += [("strip", n, f"body of {n.name}") for n in order if n.kind == STATE_VAR and n.body]
    steps += [("strip", n, f"body of {n.name}") for n in order if n.kind == FUNCTION and n.key != g.root and n.body]
    steps += [("drop", n, f"function {n.contract}.{n.name}") for n in order if n.kind == FUNCTION and n.key != g.root]
    steps += [("strip", n, f"body of modifier {n.name}") for n in order if n.kind == MODIFIER and n.body]
    steps += [("drop", n, f"state variable {n.name}") for n in order if n.kind == STATE_VAR]
    steps += [("drop", n, f"modifier {n.name}") for n in order if n.kind == MODIFIER]
    for action, n, label in steps:
        if action == "drop":
            nodes.pop(n.key, None)
        elif n.key in nodes:
            nodes[n.key] = replace(nodes[n.key], body=())
        dropped.append(label)
        if fits():
            break
    return _render(g, nodes, dropped)
