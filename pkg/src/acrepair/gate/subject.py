"""The parsed before/after view of a patch that every static rule inspects."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

from ..analysis.program import Program
from ..errors import UsageError
from ..solidity.model import ContractDef, FunctionDef, ModifierDef, SourceUnit, StateVarDef, TypeDecl
from ..solidity.parser import parse_source

Member = Union[FunctionDef, ModifierDef, StateVarDef, TypeDecl]


def norm_type(type_name: str) -> str:
    """Whitespace-insensitive spelling of a type, e.g. ``mapping(address=>bool)``."""
    out = []
    prev_word = False
    for part in type_name.replace("(", " ( ").replace(")", " ) ").replace("=>", " => ").split():
        word = part[:1].isalnum() or part[:1] == "_"
        if word and prev_word:
            out.append(" ")
        out.append(part)
        prev_word = word
    return "".join(out)


def member_key(m: Member) -> tuple:
    if isinstance(m, FunctionDef):
        return ("function", m.kind, m.name, tuple(norm_type(t) for t in m.param_types))
    if isinstance(m, ModifierDef):
        return ("modifier", m.name)
    if isinstance(m, StateVarDef):
        return ("stateVar", m.name)
    return ("type", m.kind, m.name)


def members_of(c: ContractDef) -> list[Member]:
    return [*c.functions, *c.modifiers, *c.state_vars, *c.types]


def member_text(unit: SourceUnit, m: Member) -> str:
    return unit.text(m.span)


@dataclass
class PatchSubject:
    original: Program
    patched: Program
    original_unit: SourceUnit
    patched_unit: SourceUnit
    contract: str
    original_fn: FunctionDef
    patched_fn: Optional[FunctionDef]
    changed: list[tuple[str, Member]] = field(default_factory=list)  # (contract, member), excluding the target
    added: list[tuple[str, Member]] = field(default_factory=list)
    removed: list[tuple[str, tuple]] = field(default_factory=list)

    @property
    def region(self) -> list[tuple[str, Member]]:
        """The patched function plus every new or modified member."""
        out: list[tuple[str, Member]] = []
        if self.patched_fn is not None:
            out.append((self.contract, self.patched_fn))
        out.extend(self.changed)
        return out

    def is_new(self, m: Member) -> bool:
        return any(m is a for _, a in self.added)


def _locate_patched(original_fn: FunctionDef, before: ContractDef, after: Optional[ContractDef]) -> Optional[FunctionDef]:
    if after is None:
        return None
    same_name = [f for f in after.functions if f.name == original_fn.name and f.kind == original_fn.kind]
    if len(same_name) == 1 and len(before.functions_named(original_fn.name)) == 1:
        return same_name[0]
    want = tuple(norm_type(t) for t in original_fn.param_types)
    for f in same_name:
        if tuple(norm_type(t) for t in f.param_types) == want:
            return f
    for f in same_name:
        if f.ordinal == original_fn.ordinal:
            return f
    # renamed: a function that did not exist before, at the same position in the contract
    old_names = {f.name for f in before.functions}
    fresh = [f for f in after.functions if f.name not in old_names and f.kind == original_fn.kind]
    if fresh:
        index = before.functions.index(original_fn)
        return min(fresh, key=lambda f: abs(after.functions.index(f) - index))
    return None


def build_subject(patch, original: Union[SourceUnit, Sequence[SourceUnit]]) -> PatchSubject:
    """``patch`` needs ``target`` (``C.f``), ``path`` and ``full_patched_source``."""
    units = [original] if isinstance(original, SourceUnit) else list(original)
    before = Program(units)
    found = before.find_function(patch.target)
    if len(found) != 1:
        raise UsageError(f"patch target {patch.target} resolves to {len(found)} functions")
    fn = found[0]
    unit = before.unit_for(fn)
    assert unit is not None
    patched_unit = parse_source(unit.path, patch.full_patched_source)
    after = Program([patched_unit if u is unit else u for u in units])
    before_c = before.contracts[fn.contract]
    after_c = after.contracts.get(fn.contract) if after.unit_of.get(fn.contract) is patched_unit else None
    patched_fn = _locate_patched(fn, before_c, after_c)

    subject = PatchSubject(before, after, unit, patched_unit, fn.contract, fn, patched_fn)
    old_contracts = {c.name: c for c in unit.contracts}
    for c in patched_unit.contracts:
        old = old_contracts.get(c.name)
        old_members = {member_key(m): m for m in members_of(old)} if old else {}
        for m in members_of(c):
            if m is patched_fn:
                continue
            prev = old_members.get(member_key(m))
            if prev is None:
                subject.added.append((c.name, m))
                subject.changed.append((c.name, m))
            elif " ".join(member_text(unit, prev).split()) != " ".join(member_text(patched_unit, m).split()):
                subject.changed.append((c.name, m))
    new_contracts = {c.name: c for c in patched_unit.contracts}
    for c in unit.contracts:
        new = new_contracts.get(c.name)
        if new is None:
            subject.removed.append((c.name, ("contract", c.name)))
            continue
        new_keys = {member_key(m) for m in members_of(new)}
        for m in members_of(c):
            if m is fn:
                continue
            if member_key(m) not in new_keys:
                subject.removed.append((c.name, member_key(m)))
    return subject
