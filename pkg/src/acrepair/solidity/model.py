"""Structural model of parsed Solidity sources.

All spans are half-open character offsets into ``SourceUnit.raw``.
"""
from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Optional

from .version import VersionConstraint

TOPLEVEL = "<toplevel>"

STATEMENT_KINDS = ("expr", "require", "ifRevert", "assign", "call", "return", "decl", "control", "other")


@dataclass(frozen=True, order=True)
class Span:
    start: int
    end: int

    def contains(self, other: "Span") -> bool:
        return self.start <= other.start and other.end <= self.end


@dataclass(frozen=True)
class Diagnostic:
    span: Span
    message: str
    severity: str = "error"


@dataclass(frozen=True)
class Call:
    """One syntactic call site inside an operation."""

    name: str
    qualifier: Optional[str]  # receiver base: "this", "super", a contract/var name, or None
    args: tuple[str, ...]
    span: Span

    @property
    def arity(self) -> int:
        return len(self.args)


@dataclass(frozen=True)
class Operation:
    text: str
    span: Span
    reads: frozenset[str] = frozenset()
    writes: frozenset[str] = frozenset()
    calls: tuple[Call, ...] = ()
    is_return: bool = False

    def touches(self, var: str) -> bool:
        return var in self.reads or var in self.writes


@dataclass
class Statement:
    kind: str
    text: str
    span: Span
    operations: list[Operation] = field(default_factory=list)
    children: list["Statement"] = field(default_factory=list)
    else_children: list["Statement"] = field(default_factory=list)
    header: Optional[Span] = None
    declared: list[tuple[str, str]] = field(default_factory=list)  # (name, type) for decl statements

    @property
    def is_guard(self) -> bool:
        return self.kind in ("control", "require", "ifRevert")

    def walk(self) -> Iterator["Statement"]:
        yield self
        for child in self.children:
            yield from child.walk()
        for child in self.else_children:
            yield from child.walk()


@dataclass(frozen=True)
class Param:
    name: str
    type_name: str


@dataclass(frozen=True)
class ModifierInvocation:
    name: str
    args: tuple[str, ...]
    span: Span


@dataclass
class FunctionDef:
    name: str
    contract: str
    kind: str  # function | constructor | fallback | receive
    params: list[Param]
    returns: list[Param]
    visibility: str
    mutability: str
    modifiers: list[ModifierInvocation]
    body: list[Statement]
    has_body: bool
    signature_text: str
    signature_span: Span
    span: Span
    body_span: Optional[Span] = None
    ordinal: int = 0  # distinguishes overloads within one contract
    is_virtual: bool = False

    @property
    def qualname(self) -> str:
        base = f"{self.contract}.{self.name}"
        return base if self.ordinal == 0 else f"{base}#{self.ordinal}"

    @property
    def param_types(self) -> tuple[str, ...]:
        return tuple(p.type_name for p in self.params)

    def statements(self) -> Iterator[Statement]:
        for stmt in self.body:
            yield from stmt.walk()

    def operations(self) -> Iterator[Operation]:
        for stmt in self.statements():
            yield from stmt.operations


@dataclass
class ModifierDef:
    name: str
    contract: str
    params: list[Param]
    body: list[Statement]
    has_body: bool
    signature_text: str
    signature_span: Span
    span: Span
    body_span: Optional[Span] = None

    @property
    def qualname(self) -> str:
        return f"{self.contract}.{self.name}"

    def statements(self) -> Iterator[Statement]:
        for stmt in self.body:
            yield from stmt.walk()

    def operations(self) -> Iterator[Operation]:
        for stmt in self.statements():
            yield from stmt.operations

    @property
    def has_placeholder(self) -> bool:
        return any(s.text.replace(" ", "") == "_;" for s in self.statements())


@dataclass
class StateVarDef:
    name: str
    contract: str
    type_name: str
    visibility: str
    initializer: Optional[str]
    span: Span
    text: str
    constant: bool = False
    immutable: bool = False

    @property
    def qualname(self) -> str:
        return f"{self.contract}.{self.name}"


@dataclass
class TypeDecl:
    """Events, custom errors, structs, enums, user-defined value types."""

    kind: str  # event | error | struct | enum | type
    name: str
    contract: str
    params: list[Param]
    span: Span


@dataclass
class CommentSpan:
    text: str
    span: Span
    attached_to: Optional[tuple[str, str]] = None  # (decl kind, decl name)


@dataclass
class ContractDef:
    name: str
    kind: str  # contract | interface | library | abstract
    inherits: list[str]
    functions: list[FunctionDef]
    modifiers: list[ModifierDef]
    state_vars: list[StateVarDef]
    types: list[TypeDecl]
    comments: list[CommentSpan]
    span: Span
    header_text: str = ""
    body_span: Optional[Span] = None
    synthetic: bool = False

    def function(self, name: str) -> Optional[FunctionDef]:
        for fn in self.functions:
            if fn.name == name:
                return fn
        return None

    def functions_named(self, name: str) -> list[FunctionDef]:
        return [fn for fn in self.functions if fn.name == name]

    def modifier(self, name: str) -> Optional[ModifierDef]:
        for m in self.modifiers:
            if m.name == name:
                return m
        return None

    def state_var(self, name: str) -> Optional[StateVarDef]:
        for v in self.state_vars:
            if v.name == name:
                return v
        return None


@dataclass
class SourceUnit:
    path: str
    raw: str
    pragma: Optional[VersionConstraint]
    contracts: list[ContractDef]
    diagnostics: list[Diagnostic]
    comments: list[CommentSpan] = field(default_factory=list)

    def text(self, span: Span) -> str:
        return self.raw[span.start:span.end]

    @cached_property
    def _line_starts(self) -> list[int]:
        starts = [0]
        for i, ch in enumerate(self.raw):
            if ch == "\n":
                starts.append(i + 1)
        return starts

    def line_of(self, offset: int) -> int:
        """1-based line number containing ``offset``."""
        return bisect.bisect_right(self._line_starts, offset)

    def line_text(self, lineno: int) -> str:
        starts = self._line_starts
        start = starts[lineno - 1]
        end = starts[lineno] - 1 if lineno < len(starts) else len(self.raw)
        return self.raw[start:end]

    def lines_of(self, span: Span) -> range:
        last = max(span.start, span.end - 1)
        return range(self.line_of(span.start), self.line_of(last) + 1)

    def contract(self, name: str) -> Optional[ContractDef]:
        for c in self.contracts:
            if c.name == name:
                return c
        return None

    @property
    def has_errors(self) -> bool:
        return any(d.severity == "error" for d in self.diagnostics)
