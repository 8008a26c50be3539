"""Tolerant Solidity front end: lexer, structural parser and operation splitter."""
from __future__ import annotations

from .model import (
    TOPLEVEL,
    Call,
    CommentSpan,
    ContractDef,
    Diagnostic,
    FunctionDef,
    ModifierDef,
    ModifierInvocation,
    Operation,
    Param,
    SourceUnit,
    Span,
    Statement,
    StateVarDef,
    TypeDecl,
)
from .operations import split_statement
from .parser import parse_source, parse_sources
from .version import VersionConstraint

__all__ = [
    "TOPLEVEL", "Call", "CommentSpan", "ContractDef", "Diagnostic", "FunctionDef", "ModifierDef",
    "ModifierInvocation", "Operation", "Param", "SourceUnit", "Span", "Statement", "StateVarDef",
    "TypeDecl", "VersionConstraint", "parse_source", "parse_sources", "split_statement",
]
