"""Name-based call graph over functions and modifiers."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

from ..solidity.model import Call, FunctionDef, ModifierDef, SourceUnit, Span
from ..solidity.operations import is_elementary_type
from .program import BUILTIN_FUNCTIONS, Callable, Program


@dataclass(frozen=True)
class CallEdge:
    caller: str
    callee: str
    span: Span
    arg_bindings: tuple[tuple[str, str], ...] = ()
    kind: str = "call"  # call | modifier (an applied modifier runs as part of the caller)


@dataclass(frozen=True)
class ExternalSink:
    caller: str
    name: str
    qualifier: Optional[str]
    span: Span


@dataclass
class CallGraph:
    program: Program
    nodes: dict[str, Callable] = field(default_factory=dict)
    edges: list[CallEdge] = field(default_factory=list)
    sinks: list[ExternalSink] = field(default_factory=list)

    def callees(self, qualname: str, include_modifiers: bool = True) -> list[str]:
        return [e.callee for e in self.edges if e.caller == qualname and (include_modifiers or e.kind == "call")]

    def callers(self, qualname: str) -> list[CallEdge]:
        return [e for e in self.edges if e.callee == qualname and e.kind == "call"]

    def edges_from(self, qualname: str) -> list[CallEdge]:
        return [e for e in self.edges if e.caller == qualname]

    def transitive_callees(self, qualname: str, include_modifiers: bool = True) -> list[str]:
        """Reachable callables in BFS order, excluding the start; terminates on cycles."""
        seen = {qualname}
        order: list[str] = []
        frontier = [qualname]
        while frontier:
            nxt = []
            for q in frontier:
                for c in self.callees(q, include_modifiers):
                    if c not in seen:
                        seen.add(c)
                        order.append(c)
                        nxt.append(c)
            frontier = nxt
        return order

    def dump(self) -> str:
        """Line-oriented debug format: ``node Q`` / ``edge call SRC DST -`` / ``sink SRC NAME``."""
        lines = [f"node {q}" for q in sorted(self.nodes)]
        for e in sorted(self.edges, key=lambda e: (e.caller, e.callee, e.span, e.kind)):
            lines.append(f"edge {e.kind} {e.caller} {e.callee} -")
        for s in sorted(self.sinks, key=lambda s: (s.caller, s.span, s.name)):
            qual = f"{s.qualifier}." if s.qualifier else ""
            lines.append(f"sink {s.caller} {qual}{s.name}")
        return "\n".join(lines) + "\n"


def is_call_site(call: Call, program: Program) -> bool:
    """Whether a syntactic call may invoke user code (as opposed to builtins, casts, events)."""
    if call.qualifier in ("emit", "revert"):
        return False
    if call.qualifier is None:
        if call.name in BUILTIN_FUNCTIONS or is_elementary_type(call.name) or call.name == "payable":
            return False
        if call.name in program.type_names():
            return False  # struct construction or contract cast
        return True
    root = call.qualifier.split(".")[0]
    if root in ("abi", "msg", "tx", "block", "string", "bytes"):
        return False
    return True


def resolve_call(call: Call, caller: Callable, program: Program) -> Optional[FunctionDef]:
    q = call.qualifier
    if q is None or q == "this":
        return program.resolve_function(caller.contract, call.name, call.arity)
    if q == "super":
        return program.resolve_function(caller.contract, call.name, call.arity, skip_self=True)
    if q in program.contracts:
        return program.resolve_function(q, call.name, call.arity)
    return None


def _callables(program: Program) -> Iterable[Callable]:
    for c in program.contracts.values():
        yield from c.functions
        yield from c.modifiers


def build_call_graph(units: "Iterable[SourceUnit] | Program") -> CallGraph:
    program = units if isinstance(units, Program) else Program(units)
    cg = CallGraph(program)
    for item in _callables(program):
        cg.nodes[item.qualname] = item
    for item in _callables(program):
        for op in item.operations():
            for call in op.calls:
                if not is_call_site(call, program):
                    continue
                target = resolve_call(call, item, program)
                if target is None:
                    cg.sinks.append(ExternalSink(item.qualname, call.name, call.qualifier, call.span))
                    continue
                bindings = tuple(zip(call.args, (p.name for p in target.params)))
                cg.edges.append(CallEdge(item.qualname, target.qualname, call.span, bindings))
        if isinstance(item, FunctionDef):
            for inv in item.modifiers:
                mod = program.resolve_modifier(item.contract, inv.name)
                if mod is not None:
                    bindings = tuple(zip(inv.args, (p.name for p in mod.params)))
                    cg.edges.append(CallEdge(item.qualname, mod.qualname, inv.span, bindings, kind="modifier"))
    return cg


def call_sites(item: Callable, program: Program) -> list[Call]:
    return [c for op in item.operations() for c in op.calls if is_call_site(c, program)]
