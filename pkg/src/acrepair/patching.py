"""Patch assembly and unified diffs.

Diffs are produced with :mod:`difflib`; applying them is done here because the
standard library has no patch applier.  Files without a trailing newline use
the conventional ``\\ No newline at end of file`` marker.
"""
from __future__ import annotations

import difflib
import re
import textwrap
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .solidity.model import ContractDef, FunctionDef, SourceUnit
from .solidity.parser import parse_source

NO_NEWLINE = "\\ No newline at end of file"
REUSED_MODIFIER = "reusedModifier"
NEW_MODIFIER = "newModifier"
INLINE_REQUIRE = "inlineRequire"
MECHANISMS = (REUSED_MODIFIER, NEW_MODIFIER, INLINE_REQUIRE)
_HUNK_RE = re.compile(r"^@@ -(\d+)(?:,(\d+))? \+(\d+)(?:,(\d+))? @@")


class PatchError(ValueError):
    """A diff does not apply, or patch text cannot be placed in the source."""


@dataclass
class Patch:
    target: str  # contract-qualified name of the patched function
    path: str
    pair_used: tuple[str, str]
    mechanism: str
    mechanism_name: Optional[str]
    patched_function_text: str
    original_source: str
    full_patched_source: str
    unified_diff: str
    declarations: str = ""
    replacements: dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "target": self.target,
            "path": self.path,
            "pairUsed": list(self.pair_used),
            "mechanism": self.mechanism,
            "mechanismName": self.mechanism_name,
            "patchedFunctionText": self.patched_function_text,
            "unifiedDiff": self.unified_diff,
        }


# -- diffs -------------------------------------------------------------------------


def unified_diff(original: str, patched: str, path: str) -> str:
    a = original.splitlines(keepends=True)
    b = patched.splitlines(keepends=True)
    out: list[str] = []
    for line in difflib.unified_diff(a, b, f"a/{path}", f"b/{path}"):
        if line.endswith("\n"):
            out.append(line)
        else:
            out.append(line + "\n" + NO_NEWLINE + "\n")
    return "".join(out)


def apply_unified_diff(original: str, diff: str) -> str:
    """Apply ``diff`` to ``original`` with exact context matching."""
    if not diff:
        return original
    src = original.splitlines(keepends=True)
    lines = diff.splitlines(keepends=True)
    out: list[str] = []
    pos = 0  # next unconsumed index into src
    i = 0
    while i < len(lines) and not lines[i].startswith("@@"):
        i += 1
    while i < len(lines):
        m = _HUNK_RE.match(lines[i])
        if not m:
            raise PatchError(f"malformed hunk header: {lines[i]!r}")
        old_start = int(m.group(1))
        old_len = int(m.group(2)) if m.group(2) is not None else 1
        start = old_start - 1 if old_len else old_start
        if start < pos:
            raise PatchError("overlapping hunks")
        out.extend(src[pos:start])
        pos = start
        i += 1
        while i < len(lines) and not lines[i].startswith("@@"):
            line = lines[i]
            tag, body = line[:1], line[1:]
            no_newline = i + 1 < len(lines) and lines[i + 1].rstrip("\n") == NO_NEWLINE
            if no_newline and body.endswith("\n"):
                body = body[:-1]
            if tag in (" ", "-"):
                if pos >= len(src) or src[pos] != body:
                    found = src[pos] if pos < len(src) else "<end of file>"
                    raise PatchError(f"context mismatch at line {pos + 1}: expected {body!r}, found {found!r}")
                if tag == " ":
                    out.append(body)
                pos += 1
            elif tag == "+":
                out.append(body)
            elif line.rstrip("\n") == NO_NEWLINE:
                pass
            else:
                raise PatchError(f"unexpected diff line: {line!r}")
            i += 1
    out.extend(src[pos:])
    return "".join(out)


# -- assembling a patched source ----------------------------------------------------


def _indent_of(raw: str, offset: int) -> str:
    line_start = raw.rfind("\n", 0, offset) + 1
    prefix = raw[line_start:offset]
    return prefix if not prefix.strip() else ""


def _reindent(text: str, indent: str) -> str:
    """Normalize the block's own indentation, then indent all lines but the first."""
    lines = text.strip("\n").splitlines()
    if not lines:
        return ""
    if lines[0][:1] in (" ", "\t"):
        lines = textwrap.dedent("\n".join(lines)).splitlines()
    else:
        # first line flush-left: the closing line tells the block's base indentation
        last = lines[-1]
        base = len(last) - len(last.lstrip()) if last.strip() == "}" else 0
        lines = [lines[0]] + [l[base:] if l[:base].strip() == "" else l.lstrip() for l in lines[1:]]
    return "\n".join([lines[0]] + [indent + l if l.strip() else "" for l in lines[1:]])


def find_member_span(contract: ContractDef, name: str) -> Optional[tuple[int, int]]:
    for fn in contract.functions:
        if fn.name == name or (name == "constructor" and fn.kind == "constructor"):
            return (fn.span.start, fn.span.end)
    for m in contract.modifiers:
        if m.name == name:
            return (m.span.start, m.span.end)
    for v in contract.state_vars:
        if v.name == name:
            return (v.span.start, v.span.end)
    return None


def assemble_patch(
    unit: SourceUnit,
    fn: FunctionDef,
    function_text: str,
    declarations: str = "",
    replacements: Optional[dict[str, str]] = None,
) -> str:
    """Source of ``unit`` with ``fn`` replaced, new declarations inserted before it
    and other named members of the same contract replaced."""
    contract = unit.contract(fn.contract)
    if contract is None:
        raise PatchError(f"contract {fn.contract} not found in {unit.path}")
    raw = unit.raw
    indent = _indent_of(raw, fn.span.start)
    edits: list[tuple[int, int, str]] = [(fn.span.start, fn.span.end, _reindent(function_text, indent))]
    for name, text in sorted((replacements or {}).items()):
        span = find_member_span(contract, name)
        if span is None:
            raise PatchError(f"cannot replace unknown member {name}")
        if span[0] < fn.span.end and fn.span.start < span[1]:
            raise PatchError(f"replacement for {name} overlaps the patched function")
        edits.append((span[0], span[1], _reindent(text, _indent_of(raw, span[0]))))
    if declarations.strip():
        line_start = raw.rfind("\n", 0, fn.span.start) + 1
        block = "\n".join(indent + l if l.strip() else "" for l in textwrap.dedent(declarations.strip("\n")).splitlines())
        edits.append((line_start, line_start, block + "\n\n"))
    edits.sort(key=lambda e: (e[0], e[1]))
    for (a0, a1, _), (b0, _b1, _) in zip(edits, edits[1:]):
        if b0 < a1:
            raise PatchError("overlapping edits")
    out = raw
    for start, end, text in reversed(edits):
        out = out[:start] + text + out[end:]
    return out


def leading_function_text(text: str) -> Optional[str]:
    """The first function definition in ``text`` (which may be a bare snippet)."""
    unit = parse_source("<patch>", text)
    for c in unit.contracts:
        for fn in c.functions:
            return unit.text(fn.span)
    return None


def classify_mechanism(
    original: FunctionDef,
    patched: Optional[FunctionDef],
    existing_modifiers: Sequence[str],
) -> tuple[str, Optional[str]]:
    """Reused modifier, new modifier or inline check, judged from the patched signature."""
    if patched is None:
        return INLINE_REQUIRE, None
    before = {m.name for m in original.modifiers}
    added = [m.name for m in patched.modifiers if m.name not in before]
    for name in added:
        if name in existing_modifiers:
            return REUSED_MODIFIER, name
    if added:
        return NEW_MODIFIER, added[0]
    return INLINE_REQUIRE, None
