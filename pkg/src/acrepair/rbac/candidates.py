"""Names of program elements that may take part in access control (input to Q1)."""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Union

from ..analysis.program import Program
from ..solidity.model import SourceUnit

ROLE_NOUNS = ("owner", "admin", "role", "auth", "bank", "minter", "guardian", "governor")
ROLE_VERBS = ("set", "add", "remove", "grant", "revoke", "transfer", "renounce", "change", "update")
_ADDRESS_TYPES = re.compile(r"^(address(\s+payable)?|mapping\s*\(\s*address\s*=>\s*bool\s*\))$")


@dataclass(frozen=True, order=True)
class Candidate:
    name: str
    kind: str  # function | stateVar | modifier
    contract: str


def _role_like(name: str) -> bool:
    low = name.lower()
    return any(noun in low for noun in ROLE_NOUNS)


def _role_type(type_name: str) -> bool:
    compact = " ".join(type_name.split())
    if _ADDRESS_TYPES.match(compact):
        return True
    # mapping(bytes32 => RoleData) and similar role tables
    return "Role" in type_name


def _role_function(name: str) -> bool:
    parts = re.findall(r"[A-Z]?[a-z0-9]+|[A-Z]+(?![a-z])", name.lstrip("_"))
    if not parts:
        return False
    verb = parts[0].lower()
    return verb in ROLE_VERBS and any(_role_like(p) for p in parts[1:])


def candidate_rbac_elements(units: Union[Program, Iterable[SourceUnit]]) -> list[Candidate]:
    program = units if isinstance(units, Program) else Program(units)
    out: set[Candidate] = set()
    for c in program.contracts.values():
        for m in c.modifiers:
            out.add(Candidate(m.name, "modifier", c.name))
        for v in c.state_vars:
            if _role_type(v.type_name) or _role_like(v.name):
                out.add(Candidate(v.name, "stateVar", c.name))
        for fn in c.functions:
            if fn.kind == "function" and _role_function(fn.name):
                out.add(Candidate(fn.name, "function", c.name))
    kind_order = {"modifier": 0, "stateVar": 1, "function": 2}
    return sorted(out, key=lambda x: (kind_order[x.kind], x.contract, x.name))
