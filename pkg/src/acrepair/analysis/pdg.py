"""Per-function program dependency graphs at operation granularity.

Nodes are the operations of a function body in source order.  A data edge
``(d, u, v)`` links every operation ``d`` writing ``v`` to every later
operation ``u`` reading ``v``; there is no kill analysis, matching the
flow-insensitive, name-based treatment used everywhere else.  Control edges
run from the operations of a guard (``if``/``for``/``while``/``do``/``try``
headers, ``require``, ``if (...) revert``) to every operation nested under
it; ``require`` and ``if…revert`` additionally guard every operation that
follows them in the function.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Union

from ..solidity.model import FunctionDef, ModifierDef, Operation, Statement

Callable = Union[FunctionDef, ModifierDef]


@dataclass(frozen=True)
class PdgNode:
    index: int
    op: Operation
    stmt_index: int


@dataclass
class Pdg:
    function: str
    nodes: list[PdgNode]
    statements: list[Statement]
    data_edges: set[tuple[int, int, str]] = field(default_factory=set)
    control_edges: set[tuple[int, int]] = field(default_factory=set)
    params: tuple[str, ...] = ()
    param_uses: dict[str, list[int]] = field(default_factory=dict)
    return_nodes: list[int] = field(default_factory=list)

    def data_succ(self, i: int) -> Iterator[tuple[int, str]]:
        for d, u, v in self.data_edges:
            if d == i:
                yield u, v

    def data_pred(self, i: int) -> Iterator[tuple[int, str]]:
        for d, u, v in self.data_edges:
            if u == i:
                yield d, v

    def control_succ(self, i: int) -> Iterator[int]:
        return (b for a, b in self.control_edges if a == i)

    def control_pred(self, i: int) -> Iterator[int]:
        return (a for a, b in self.control_edges if b == i)

    def dump(self) -> str:
        lines = [f"node {n.index} {n.op.text!r}" for n in self.nodes]
        lines += [f"edge data {d} {u} {v}" for d, u, v in sorted(self.data_edges)]
        lines += [f"edge control {a} {b} -" for a, b in sorted(self.control_edges)]
        lines += [f"edge param entry {u} {p}" for p in sorted(self.param_uses) for u in self.param_uses[p]]
        return "\n".join(lines) + "\n"


def _flatten(body: list[Statement]) -> list[Statement]:
    out: list[Statement] = []
    for stmt in body:
        out.extend(stmt.walk())
    return out


def build_pdg(fn: Callable) -> Pdg:
    statements = _flatten(fn.body)
    raw_nodes: list[tuple[Operation, int]] = []
    for si, stmt in enumerate(statements):
        for op in stmt.operations:
            raw_nodes.append((op, si))
    raw_nodes.sort(key=lambda pair: (pair[0].span.start, pair[0].span.end))
    nodes = [PdgNode(i, op, si) for i, (op, si) in enumerate(raw_nodes)]
    pdg = Pdg(fn.qualname, nodes, statements, params=tuple(p.name for p in fn.params if p.name))

    for d in nodes:
        for u in nodes:
            if u.index <= d.index:
                continue
            for v in d.op.writes & u.op.reads:
                pdg.data_edges.add((d.index, u.index, v))

    nodes_of_stmt: dict[int, list[int]] = {}
    for n in nodes:
        nodes_of_stmt.setdefault(n.stmt_index, []).append(n.index)
    stmt_pos = {id(s): i for i, s in enumerate(statements)}
    for si, stmt in enumerate(statements):
        if not stmt.is_guard:
            continue
        guards = nodes_of_stmt.get(si, [])
        dependents: set[int] = set()
        for child in [*stmt.children, *stmt.else_children]:
            for sub in child.walk():
                dependents.update(nodes_of_stmt.get(stmt_pos[id(sub)], []))
        if stmt.kind in ("require", "ifRevert"):
            dependents.update(n.index for n in nodes if n.op.span.start >= stmt.span.end)
        for g in guards:
            for dep in dependents:
                if dep != g:
                    pdg.control_edges.add((g, dep))

    # every read of a parameter is linked to the parameter entry (no kill analysis)
    for p in pdg.params:
        uses = []
        for n in nodes:
            if p in n.op.reads:
                uses.append(n.index)
        if uses:
            pdg.param_uses[p] = uses
    pdg.return_nodes = [n.index for n in nodes if n.op.is_return]
    return pdg
