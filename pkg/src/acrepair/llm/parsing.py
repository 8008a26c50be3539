"""Recovering structured answers from model text that may ignore format instructions.

Strategies, in order: strict JSON; fenced code blocks; balanced-brace blocks
(with lenient fixes for single quotes, trailing commas, bare keys, comments
and Python literals); labeled lines such as ``role: Bank``.
"""
from __future__ import annotations

import ast
import json
import re
from typing import Any, Iterator, Optional

from ..errors import Unparseable

LABELS = (
    "role",
    "permission",
    "patch",
    "is_new",
    "vulnerable",
    "verdict",
    "decision",
    "reason",
    "category",
    "elements",
    "mechanism",
    "feedback",
)
_LABEL_ALIASES = {"isnew": "is_new", "new": "is_new", "new pair": "is_new", "answer": "verdict"}
_LABEL_RE = re.compile(
    r"^\s*(?:[-*]\s*)?(?:\*\*|__)?([A-Za-z][A-Za-z _]{0,20}?)(?:\*\*|__)?\s*[:=]\s*(.*)$"
)
_FENCE_RE = re.compile(r"```[A-Za-z0-9_-]*[ \t]*\n(.*?)```", re.DOTALL)
_STRING = r'"(?:\\.|[^"\\])*"|\'(?:\\.|[^\'\\])*\''
_LITERALS = re.compile(rf"({_STRING})|\b(true|false|null)\b")
_BARE_KEYS = re.compile(rf"({_STRING})|([{{,]\s*)([A-Za-z_]\w*)(\s*:)")
_COMMENTS = re.compile(rf"({_STRING})|//[^\n]*|/\*.*?\*/", re.DOTALL)
_PY_LITERALS = {"true": "True", "false": "False", "null": "None"}


def _strict(text: str) -> Optional[Any]:
    try:
        value = json.loads(text, strict=False)
    except ValueError:
        return None
    return value if isinstance(value, (dict, list)) else None


def _lenient(text: str) -> Optional[Any]:
    fixed = _COMMENTS.sub(lambda m: m.group(1) or "", text)
    fixed = _BARE_KEYS.sub(lambda m: m.group(1) or f'{m.group(2)}"{m.group(3)}"{m.group(4)}', fixed)
    value = _strict(re.sub(r",\s*([}\]])", r"\1", fixed))
    if value is not None:
        return value

    def literal(m: re.Match) -> str:
        if m.group(1):
            return m.group(1).replace("\n", "\\n").replace("\r", "\\r").replace("\t", "\\t")
        return _PY_LITERALS[m.group(2)]

    try:
        value = ast.literal_eval(_LITERALS.sub(literal, fixed))
    except (ValueError, SyntaxError, MemoryError, RecursionError):
        return None
    return value if isinstance(value, (dict, list)) else None


def _balanced_blocks(text: str) -> Iterator[str]:
    """Every top-level ``{...}`` block, skipping braces inside string literals."""
    i = 0
    n = len(text)
    while i < n:
        start = text.find("{", i)
        if start < 0:
            return
        depth = 0
        quote = ""
        j = start
        while j < n:
            ch = text[j]
            if quote:
                if ch == "\\":
                    j += 1
                elif ch == quote:
                    quote = ""
            elif ch in "\"'":
                quote = ch
            elif ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    yield text[start : j + 1]
                    break
            j += 1
        else:
            # unterminated: retry from the next brace, ignoring quotes that may be apostrophes
            i = start + 1
            continue
        i = j + 1


def _labeled(text: str) -> Optional[dict]:
    out: dict[str, Any] = {}
    current: Optional[str] = None
    in_fence = False
    for line in text.splitlines():
        stripped = line.strip()
        if stripped.startswith("```"):
            in_fence = not in_fence
            if current is not None:
                out[current].append(line)
            continue
        m = None if in_fence else _LABEL_RE.match(line)
        key = None
        if m:
            raw = " ".join(m.group(1).lower().replace("_", " ").split())
            raw = _LABEL_ALIASES.get(raw, raw)
            key = raw.replace(" ", "_")
        if key in LABELS:
            current = key
            out[current] = [m.group(2).strip().strip("*_").strip()]
        elif current is not None and current == "patch":
            out[current].append(line)
        elif current is not None and stripped == "":
            current = None
    if not out:
        return None
    result: dict[str, Any] = {}
    for key, lines in out.items():
        value = "\n".join(lines).strip()
        fence = _FENCE_RE.search(value + ("\n" if not value.endswith("\n") else ""))
        if fence:
            value = fence.group(1).rstrip("\n")
        value = value.strip().strip("`").strip()
        if not value:
            continue
        result[key] = value.strip('"')
    return result or None


def parse_structured(text: str) -> Any:
    """Best-effort structured value (dict or list) from a model response."""
    if text is None or not text.strip():
        raise Unparseable("empty response")
    body = text.strip()
    value = _strict(body)
    if value is not None:
        return value
    for block in _FENCE_RE.findall(body + "\n"):
        value = _strict(block.strip()) or _lenient(block.strip())
        if value is not None:
            return value
    for block in _balanced_blocks(body):
        value = _strict(block) or _lenient(block)
        if value is not None:
            return value
    value = _labeled(body)
    if value is not None:
        return value
    raise Unparseable(f"no structure recovered from {len(text)} characters of text")
