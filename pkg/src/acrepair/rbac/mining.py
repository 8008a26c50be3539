"""Mining role-permission pairs from Solidity sources.

Three patterns are recognized per function:

* OZAC: the contract inherits an ``Ownable*`` template and the function is
  guarded by ``onlyOwner`` (role ``owner``), or it inherits an ``Access*``
  template and checks ``onlyRole(X)``, ``hasRole(X, msg.sender)`` or
  ``_checkRole(X)`` (role ``X``);
* Modifier: every applied modifier whose name starts with ``only``
  (case-insensitive) yields the remainder as the role, except the parametric
  ``onlyRole(X)`` which yields ``X``;
* TRS: a ``require``/``if (...) revert`` comparing ``msg.sender`` with
  ``==``/``!=`` yields the other operand's base identifier, or
  ``hardcoded-address`` when that operand is a literal.
"""
from __future__ import annotations

import logging
import os
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional, Union

from ..analysis.program import Program
from ..errors import CorpusUnreadable
from ..solidity.lexer import IDENT, NUMBER, STRING, Token, tokenize
from ..solidity.model import FunctionDef, SourceUnit, Statement
from ..solidity.operations import match_close
from ..solidity.parser import parse_source
from .normalize import default_synonyms, normalize_pair

log = logging.getLogger(__name__)

OZAC = "OZAC"
MODIFIER = "Modifier"
TRS = "TRS"
PATTERNS = (OZAC, MODIFIER, TRS)
HARDCODED = "hardcoded-address"
UNCATEGORIZED = "uncategorized"


@dataclass
class RolePermissionPair:
    role: str
    permission: str
    raw_role: str
    raw_permission: str
    pattern: str
    occurrence_count: int = 1
    patterns: tuple[str, ...] = ()
    category: tuple[str, str] = (UNCATEGORIZED, UNCATEGORIZED)

    @property
    def key(self) -> tuple[str, str]:
        return (self.role, self.permission)

    def to_dict(self) -> dict:
        return {
            "role": self.role,
            "permission": self.permission,
            "rawRole": self.raw_role,
            "rawPermission": self.raw_permission,
            "pattern": self.pattern,
            "patterns": list(self.patterns),
            "occurrenceCount": self.occurrence_count,
            "category": list(self.category),
        }


@dataclass(frozen=True)
class MiningStats:
    total_pairs: int
    unique_pairs: int
    top_k_coverage: float
    k: int

    def to_dict(self) -> dict:
        return {
            "totalPairs": self.total_pairs,
            "uniquePairs": self.unique_pairs,
            "topKCoverage": self.top_k_coverage,
            "k": self.k,
        }


# -- pattern detectors -----------------------------------------------------------


def _ozac_roles(fn: FunctionDef, program: Program) -> list[str]:
    roles: list[str] = []
    ancestors = program.ancestors(fn.contract)
    if any(a.startswith("Ownable") for a in ancestors) and any(m.name == "onlyOwner" for m in fn.modifiers):
        roles.append("owner")
    if any(a.startswith("Access") for a in ancestors):
        for m in fn.modifiers:
            if m.name == "onlyRole" and m.args:
                roles.append(m.args[0].strip())
        for op in fn.operations():
            for call in op.calls:
                if call.qualifier is not None or not call.args:
                    continue
                if call.name == "hasRole" and len(call.args) >= 2 and _is_sender(call.args[1]):
                    roles.append(call.args[0].strip())
                elif call.name == "_checkRole":
                    roles.append(call.args[0].strip())
    return roles


def _modifier_roles(fn: FunctionDef) -> list[str]:
    out = []
    for m in fn.modifiers:
        if m.name == "onlyRole" and m.args:
            # parametric guard: the argument names the role
            out.append(m.args[0].strip())
        elif m.name.lower().startswith("only") and len(m.name) > 4:
            out.append(m.name[4:])
    return out


def _is_sender(expr: str) -> bool:
    compact = "".join(expr.split())
    return compact in ("msg.sender", "_msgSender()", "payable(msg.sender)", "address(msg.sender)")


def _sender_at(toks: list[Token], i: int) -> int:
    """End index (exclusive) of a ``msg.sender``/``_msgSender()`` occurrence at ``i``, else -1."""
    if toks[i].is_("msg") and i + 2 < len(toks) and toks[i + 1].is_(".") and toks[i + 2].is_("sender"):
        return i + 3
    if toks[i].is_("_msgSender") and i + 2 < len(toks) and toks[i + 1].is_("(") and toks[i + 2].is_(")"):
        return i + 3
    return -1


def _operand_role(toks: list[Token], start: int, forward: bool) -> Optional[str]:
    """Base identifier of the operand adjacent to a comparison operator."""
    if forward:
        if start >= len(toks):
            return None
        t = toks[start]
        if t.kind in (NUMBER, STRING):
            return HARDCODED
        if t.kind != IDENT:
            return None
        if t.text in ("address", "payable") and start + 2 < len(toks) and toks[start + 1].is_("("):
            inner = toks[start + 2]
            if inner.kind in (NUMBER, STRING):
                return HARDCODED
            return inner.text if inner.kind == IDENT and not inner.is_("msg", "this") else None
        if t.is_("msg", "tx", "block", "this", "true", "false"):
            return None
        return t.text
    # backward: walk to the start of the left operand
    j = start
    while j >= 0 and toks[j].is_(")", "]"):
        depth = 0
        while j >= 0:
            if toks[j].is_(")", "]"):
                depth += 1
            elif toks[j].is_("(", "["):
                depth -= 1
                if depth == 0:
                    break
            j -= 1
        j -= 1
    while j >= 2 and toks[j - 1].is_(".") and toks[j - 2].kind == IDENT:
        j -= 2
    if j < 0:
        return None
    return _operand_role(toks, j, True)


def trs_roles(stmt: Statement) -> list[str]:
    """Roles compared against ``msg.sender`` in one guard statement."""
    if stmt.kind == "require":
        if not stmt.text.lstrip().startswith("require"):
            return []
        text = stmt.text
    elif stmt.kind == "ifRevert":
        text = "".join(op.text for op in stmt.operations)
    else:
        return []
    toks, _ = tokenize(text)
    toks = [t for t in toks if t.kind != "comment"]
    roles: list[str] = []
    for i in range(len(toks)):
        end = _sender_at(toks, i)
        if end < 0:
            continue
        if end < len(toks) and toks[end].is_("==", "!="):
            role = _operand_role(toks, end + 1, True)
            if role:
                roles.append(role)
        if i > 0 and toks[i - 1].is_("==", "!="):
            role = _operand_role(toks, i - 2, False)
            if role:
                roles.append(role)
    return roles


def _trs_roles(fn: FunctionDef) -> list[str]:
    roles: list[str] = []
    for stmt in fn.statements():
        roles.extend(trs_roles(stmt))
    return roles


# -- extraction ------------------------------------------------------------------


def extract_pairs(
    unit: Union[SourceUnit, Program],
    synonyms: Optional[Mapping[str, str]] = None,
) -> list[RolePermissionPair]:
    """Role-permission pairs of one unit (or program), one record per normalized pair."""
    program = unit if isinstance(unit, Program) else Program([unit])
    syn = default_synonyms() if synonyms is None else synonyms
    per_fn: dict[tuple[str, tuple[str, str]], RolePermissionPair] = {}
    for cname in sorted(program.contracts):
        c = program.contracts[cname]
        for fn in c.functions:
            if fn.kind != "function":
                continue
            found = [(OZAC, r) for r in _ozac_roles(fn, program)]
            found += [(MODIFIER, r) for r in _modifier_roles(fn)]
            found += [(TRS, r) for r in _trs_roles(fn)]
            for pattern, raw_role in found:
                key = normalize_pair(raw_role, fn.name, syn)
                if not key[0] or not key[1]:
                    continue
                rec = per_fn.get((fn.qualname, key))
                if rec is None:
                    per_fn[(fn.qualname, key)] = RolePermissionPair(
                        key[0], key[1], raw_role, fn.name, pattern, 1, (pattern,)
                    )
                else:
                    pats = tuple(p for p in PATTERNS if p in rec.patterns or p == pattern)
                    rec.patterns = pats
                    rec.pattern = pats[0]
                    rec.raw_role = min(rec.raw_role, raw_role)
    return _merge(per_fn.values())


def _merge(records: Iterable[RolePermissionPair]) -> list[RolePermissionPair]:
    merged: dict[tuple[str, str], RolePermissionPair] = {}
    for r in records:
        cur = merged.get(r.key)
        if cur is None:
            merged[r.key] = RolePermissionPair(
                r.role, r.permission, r.raw_role, r.raw_permission, r.pattern, r.occurrence_count, r.patterns, r.category
            )
            continue
        cur.occurrence_count += r.occurrence_count
        cur.patterns = tuple(p for p in PATTERNS if p in cur.patterns or p in r.patterns)
        cur.pattern = cur.patterns[0]
        cur.raw_role = min(cur.raw_role, r.raw_role)
        cur.raw_permission = min(cur.raw_permission, r.raw_permission)
    return rank(merged.values())


def rank(pairs: Iterable[RolePermissionPair]) -> list[RolePermissionPair]:
    return sorted(pairs, key=lambda p: (-p.occurrence_count, p.role, p.permission))


def mining_stats(ranked: list[RolePermissionPair], k: int) -> MiningStats:
    total = sum(p.occurrence_count for p in ranked)
    top = sum(p.occurrence_count for p in ranked[:k])
    coverage = top / total if total else 0.0
    return MiningStats(total, len(ranked), coverage, k)


def mine_corpus(
    root: Union[str, os.PathLike],
    k: int = 10,
    synonyms: Optional[Mapping[str, str]] = None,
    taxonomy=None,
) -> tuple[list[RolePermissionPair], MiningStats]:
    """Mine every ``.sol`` file under ``root``; files are parsed independently."""
    base = Path(root)
    if not base.is_dir() or not os.access(base, os.R_OK | os.X_OK):
        raise CorpusUnreadable(f"cannot read corpus directory {root}")
    records: list[RolePermissionPair] = []
    for path in sorted(base.rglob("*.sol")):
        try:
            data = path.read_bytes()
        except OSError as exc:
            log.warning("skipping unreadable file %s: %s", path, exc)
            continue
        unit = parse_source(str(path.relative_to(base)), data)
        records.extend(extract_pairs(unit, synonyms))
    ranked = _merge(records)
    if taxonomy is not None:
        for p in ranked:
            p.category = categorize(p, taxonomy)
    return ranked, mining_stats(ranked, k)


def _stem(word: str) -> str:
    for suffix in ("ing", "als", "al", "es", "s", "e"):
        if word.endswith(suffix) and len(word) - len(suffix) >= 3:
            return word[: -len(suffix)]
    return word


def categorize(pair: RolePermissionPair, taxonomy) -> tuple[str, str]:
    """Map a mined pair to a taxonomy category by normalized-name containment."""
    for e in taxonomy.sorted_entries():
        role, perm = taxonomy.normalized(e.role_category, e.permission_category)
        role_hit = role == pair.role or role in pair.role.split() or pair.role in role.split()
        if not role_hit:
            continue
        words = [_stem(w) for w in perm.replace("/", " ").split() if len(w) >= 4]
        if words and any(w in pair.permission for w in words):
            return (e.role_category, e.permission_category)
    return (UNCATEGORIZED, UNCATEGORIZED)


def mining_report(ranked: list[RolePermissionPair], stats: MiningStats) -> dict:
    return {"stats": stats.to_dict(), "pairs": [p.to_dict() for p in ranked]}


def pair_multiset(pairs: Iterable[RolePermissionPair]) -> Counter:
    return Counter({p.key: p.occurrence_count for p in pairs})
