"""Solidity ``pragma solidity`` version constraints as unions of half-open ranges."""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

Version = tuple[int, int, int]
Range = tuple[Version, Optional[Version]]  # high None = unbounded

ZERO: Version = (0, 0, 0)

_COMPARATOR_RE = re.compile(r"^(\^|~|>=|<=|>|<|=)?\s*v?(\d+)(?:\.(\d+|x|\*))?(?:\.(\d+|x|\*))?$")


def parse_version(text: str) -> Version:
    parts = [int(p) for p in text.strip().split(".")[:3]]
    while len(parts) < 3:
        parts.append(0)
    return (parts[0], parts[1], parts[2])


def format_version(v: Version) -> str:
    return "%d.%d.%d" % v


@dataclass(frozen=True)
class VersionConstraint:
    raw_pragma: str
    ranges: tuple[Range, ...] = field(default=((ZERO, None),))
    known: bool = True

    @classmethod
    def unconstrained(cls, raw: str = "") -> "VersionConstraint":
        return cls(raw, ((ZERO, None),), known=False)

    @classmethod
    def parse(cls, expr: str) -> "VersionConstraint":
        """Parse the expression part of a pragma, e.g. ``^0.4.11`` or ``>=0.6.0 <0.9.0``.

        Unknown forms are kept verbatim and treated as unconstrained.
        """
        expr = expr.strip()
        alternatives = [a.strip() for a in expr.split("||")]
        ranges: list[Range] = []
        for alt in alternatives:
            rng = _parse_conjunction(alt)
            if rng is None:
                return cls.unconstrained(expr)
            if rng[1] is None or rng[0] < rng[1]:
                ranges.append(rng)
        if not ranges:
            return cls.unconstrained(expr)
        return cls(expr, tuple(_merge(ranges)))

    @property
    def is_unconstrained(self) -> bool:
        return not self.known or self.ranges == ((ZERO, None),)

    def allows(self, v: Version) -> bool:
        return any(lo <= v and (hi is None or v < hi) for lo, hi in self.ranges)

    def min_version(self) -> Version:
        return min(lo for lo, _ in self.ranges)

    def is_subset_of(self, other: "VersionConstraint") -> bool:
        if other.is_unconstrained:
            return True
        if self.is_unconstrained:
            return False
        for lo, hi in self.ranges:
            if not any(olo <= lo and (ohi is None or (hi is not None and hi <= ohi)) for olo, ohi in other.ranges):
                return False
        return True

    def describe(self) -> str:
        if self.is_unconstrained:
            return "any"
        parts = []
        for lo, hi in self.ranges:
            parts.append(f">={format_version(lo)}" + ("" if hi is None else f" <{format_version(hi)}"))
        return " || ".join(parts)


def _parse_conjunction(alt: str) -> Optional[Range]:
    # allow ">= 0.4.22" with inner whitespace
    alt = re.sub(r"(\^|~|>=|<=|>|<|=)\s+", r"\1", alt)
    terms = alt.split()
    if not terms:
        return None
    lo: Version = ZERO
    hi: Optional[Version] = None
    # hyphen range "a - b"
    if len(terms) == 3 and terms[1] == "-":
        a, b = _comparator("=", terms[0]), _comparator("<=", terms[2])
        if a is None or b is None:
            return None
        return (a[0], b[1])
    for term in terms:
        m = _COMPARATOR_RE.match(term)
        if not m:
            return None
        rng = _comparator(m.group(1) or "=", term.lstrip("^~<>=v"))
        if rng is None:
            return None
        lo = max(lo, rng[0])
        if rng[1] is not None:
            hi = rng[1] if hi is None else min(hi, rng[1])
    return (lo, hi)


def _comparator(op: str, text: str) -> Optional[Range]:
    parts = text.split(".")
    if not parts or not parts[0].isdigit():
        return None
    nums: list[int] = []
    for p in parts[:3]:
        if p in ("x", "*", "X"):
            break
        if not p.isdigit():
            return None
        nums.append(int(p))
    given = len(nums)
    major = nums[0]
    minor = nums[1] if given > 1 else 0
    patch = nums[2] if given > 2 else 0
    v = (major, minor, patch)
    # first version past the partially specified one, e.g. "0.8" -> 0.9.0
    if given >= 3:
        nxt = (major, minor, patch + 1)
    elif given == 2:
        nxt = (major, minor + 1, 0)
    else:
        nxt = (major + 1, 0, 0)
    if op == "^":
        if major > 0:
            return (v, (major + 1, 0, 0))
        if minor > 0 or given == 2:
            return (v, (0, minor + 1, 0))
        return (v, nxt if given >= 3 else (1, 0, 0))
    if op == "~":
        if given >= 2:
            return (v, (major, minor + 1, 0))
        return (v, (major + 1, 0, 0))
    if op == ">=":
        return (v, None)
    if op == ">":
        return (nxt, None)
    if op == "<":
        return (ZERO, v)
    if op == "<=":
        return (ZERO, nxt)
    return (v, nxt)


def _merge(ranges: list[Range]) -> list[Range]:
    ordered = sorted(ranges, key=lambda r: r[0])
    out: list[Range] = []
    for lo, hi in ordered:
        if out:
            plo, phi = out[-1]
            if phi is None or lo <= phi:
                merged_hi = None if (phi is None or hi is None) else max(phi, hi)
                out[-1] = (plo, merged_hi)
                continue
        out.append((lo, hi))
    return out
