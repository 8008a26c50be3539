"""Normalization of role and permission names.

Steps, repeated until nothing changes (which makes the function idempotent):

1. strip a leading ``only``/``is``/``get`` when it ends at a word boundary in
   the raw text (camel hump, ``_`` or whitespace), and a literal ``set_``;
2. strip a trailing ``role``/``addr``/``address`` starting at a word boundary;
3. lowercase, turn ``_`` into spaces and collapse whitespace;
4. map through the synonym dictionary (whole-string match).

A strip that would leave nothing is skipped.
"""
from __future__ import annotations

import json
import re
from functools import lru_cache
from importlib import resources
from typing import Mapping, Optional

PREFIXES = ("only", "is", "get")
SUFFIXES = ("address", "addr", "role")
_MAX_ROUNDS = 32


@lru_cache(maxsize=1)
def default_synonyms() -> dict[str, str]:
    text = resources.files("acrepair.rbac").joinpath("data/synonyms.json").read_text(encoding="utf-8")
    synonyms = json.loads(text)
    validate_synonyms(synonyms)
    return synonyms


def validate_synonyms(synonyms: Mapping[str, str]) -> None:
    """Reject maps whose chains loop or whose targets would be stripped again,
    since normalization would never settle."""
    for start, target in synonyms.items():
        if _strip_suffix(_strip_prefix(target)) != target or target != " ".join(target.lower().replace("_", " ").split()):
            raise ValueError(f"synonym target {target!r} is not in normal form")
        seen = {start}
        cur = synonyms[start]
        while cur in synonyms:
            if cur in seen:
                raise ValueError(f"synonym cycle through {start!r}")
            seen.add(cur)
            cur = synonyms[cur]


def _boundary_after(text: str, i: int) -> bool:
    """Whether a word boundary sits right before ``text[i]``."""
    if i >= len(text):
        return False
    ch = text[i]
    return ch.isupper() or ch in "_ \t" or (ch.isdigit() and not text[i - 1].isdigit())


def _strip_prefix(text: str) -> str:
    low = text.lower()
    if low.startswith("set_") and text[4:].strip("_ "):
        return text[4:].lstrip("_ ")
    for p in PREFIXES:
        if low.startswith(p) and _boundary_after(text, len(p)):
            rest = text[len(p):].lstrip("_ \t")
            if rest:
                return rest
    return text


def _strip_suffix(text: str) -> str:
    low = text.lower()
    for s in SUFFIXES:
        if not low.endswith(s) or len(text) == len(s):
            continue
        start = len(text) - len(s)
        head = text[:start]
        camel = text[start].isupper() and (head[-1:].islower() or head[-1:].isdigit())
        sep = head[-1:] in ("_", " ", "\t")
        if camel or sep:
            head = head.rstrip("_ \t")
            if head:
                return head
    return text


def _normalize_one(text: str, synonyms: Mapping[str, str]) -> str:
    cur = text
    for _ in range(_MAX_ROUNDS):
        prev = cur
        cur = _strip_prefix(cur)
        cur = _strip_suffix(cur)
        cur = " ".join(cur.lower().replace("_", " ").split())
        seen = set()
        while cur in synonyms and cur not in seen:
            seen.add(cur)
            cur = synonyms[cur]
        if cur == prev:
            break
    return cur


def normalize_name(text: str, synonyms: Optional[Mapping[str, str]] = None) -> str:
    return _normalize_one(text, default_synonyms() if synonyms is None else synonyms)


def normalize_pair(
    role: str, permission: str, synonyms: Optional[Mapping[str, str]] = None
) -> tuple[str, str]:
    syn = default_synonyms() if synonyms is None else synonyms
    return _normalize_one(role, syn), _normalize_one(permission, syn)
