"""Version-gated language features and their token detectors.

The table itself lives in ``data/features.json``: ``since`` marks the first
compiler version that accepts a construct, ``until`` the first that rejects it.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Callable, Optional

from ..solidity.lexer import COMMENT, IDENT, Token, tokenize
from ..solidity.model import FunctionDef
from ..solidity.version import Version, VersionConstraint, format_version, parse_version


@dataclass(frozen=True)
class Feature:
    id: str
    description: str
    since: Optional[Version] = None
    until: Optional[Version] = None

    def unsupported_under(self, constraint: VersionConstraint) -> Optional[str]:
        """Why ``constraint`` admits a compiler lacking this feature, or None."""
        if constraint.is_unconstrained:
            return None
        if self.since is not None and constraint.min_version() < self.since:
            return f"{self.description} needs solidity >= {format_version(self.since)}"
        if self.until is not None:
            for lo, hi in constraint.ranges:
                if hi is None or max(lo, self.until) < hi:
                    return f"{self.description} was removed in solidity {format_version(self.until)}"
        return None


@lru_cache(maxsize=1)
def feature_table() -> tuple[Feature, ...]:
    text = resources.files("acrepair.gate").joinpath("data/features.json").read_text(encoding="utf-8")
    data = json.loads(text)
    out = []
    for f in data["features"]:
        since = parse_version(f["since"]) if "since" in f else None
        until = parse_version(f["until"]) if "until" in f else None
        out.append(Feature(f["id"], f["description"], since, until))
    return tuple(out)


def _code_tokens(text: str) -> list[Token]:
    toks, _ = tokenize(text)
    return [t for t in toks if t.kind != COMMENT]


def _at(toks: list[Token], i: int, *texts: str) -> bool:
    return 0 <= i < len(toks) and toks[i].is_(*texts)


def _ident(toks: list[Token], i: int) -> bool:
    return 0 <= i < len(toks) and toks[i].kind == IDENT


def _not_member(toks: list[Token], i: int) -> bool:
    return not _at(toks, i - 1, ".")


Detector = Callable[[list[Token], int], bool]

_DETECTORS: dict[str, Detector] = {
    "emit": lambda t, i: t[i].is_("emit") and _ident(t, i + 1),
    "constructor-keyword": lambda t, i: t[i].is_("constructor") and _at(t, i + 1, "("),
    "address-payable": lambda t, i: t[i].is_("address") and _at(t, i + 1, "payable"),
    "receive": lambda t, i: t[i].is_("receive") and _at(t, i + 1, "(") and _not_member(t, i) and not _at(t, i - 1, "function"),
    "fallback-keyword": lambda t, i: t[i].is_("fallback") and _at(t, i + 1, "(") and _not_member(t, i) and not _at(t, i - 1, "function"),
    "virtual-override": lambda t, i: t[i].is_("virtual", "override") and _not_member(t, i),
    "try-catch": lambda t, i: t[i].is_("try") and _not_member(t, i),
    "payable-conversion": lambda t, i: t[i].is_("payable") and _at(t, i + 1, "(") and _not_member(t, i),
    "immutable": lambda t, i: t[i].is_("immutable"),
    "type-min-max": lambda t, i: t[i].is_("min", "max") and _at(t, i - 1, ".") and _at(t, i - 2, ")") and _type_call_before(t, i - 2),
    "unchecked": lambda t, i: t[i].is_("unchecked") and _at(t, i + 1, "{"),
    "custom-error": lambda t, i: (t[i].is_("error") and _ident(t, i + 1) and _at(t, i + 2, "(") and _not_member(t, i))
    or (t[i].is_("revert") and _ident(t, i + 1) and _at(t, i + 2, "(")),
    "abi-encodecall": lambda t, i: t[i].is_("encodeCall") and _at(t, i - 1, ".") and _at(t, i - 2, "abi"),
    "throw": lambda t, i: t[i].is_("throw"),
    "var": lambda t, i: t[i].is_("var") and _ident(t, i + 1) and _not_member(t, i),
    "sha3-suicide": lambda t, i: t[i].is_("sha3", "suicide") and _at(t, i + 1, "(") and _not_member(t, i),
    "now": lambda t, i: t[i].is_("now") and _not_member(t, i),
}


def _type_call_before(toks: list[Token], close: int) -> bool:
    depth = 0
    j = close
    while j >= 0:
        if toks[j].is_(")"):
            depth += 1
        elif toks[j].is_("("):
            depth -= 1
            if depth == 0:
                return _at(toks, j - 1, "type")
        j -= 1
    return False


def features_used(text: str, fn: Optional[FunctionDef] = None) -> list[Feature]:
    """Table features whose constructs occur in ``text`` (one member's source)."""
    toks = _code_tokens(text)
    found: list[Feature] = []
    for feature in feature_table():
        detector = _DETECTORS.get(feature.id)
        if detector is not None and any(detector(toks, i) for i in range(len(toks))):
            found.append(feature)
        elif feature.id == "old-constructor" and fn is not None:
            if fn.kind == "constructor" and fn.signature_text.lstrip().startswith("function"):
                found.append(feature)
        elif feature.id == "constant-function" and fn is not None:
            sig = _code_tokens(fn.signature_text)
            if fn.kind == "function" and any(t.is_("constant") for t in sig):
                found.append(feature)
    return found
