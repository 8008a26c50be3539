"""Whole-program view over parsed units: contract lookup, inheritance, name resolution."""
from __future__ import annotations

import logging
from typing import Iterable, Optional, Union

from ..solidity.model import ContractDef, FunctionDef, ModifierDef, SourceUnit, StateVarDef

log = logging.getLogger(__name__)

Callable = Union[FunctionDef, ModifierDef]

# Globally available functions and namespaces that never resolve to user code.
BUILTIN_FUNCTIONS = frozenset(
    """require assert revert keccak256 sha256 sha3 ripemd160 ecrecover addmod mulmod selfdestruct suicide
    blockhash gasleft type""".split()
)
BUILTIN_NAMESPACES = frozenset({"abi", "msg", "tx", "block", "string", "bytes"})
# members callable on addresses, arrays and bytes values
BUILTIN_MEMBERS = frozenset(
    """transfer send call delegatecall staticcall callcode push pop concat encode encodePacked
    encodeWithSelector encodeWithSignature encodeCall decode value gas""".split()
)


class Program:
    """Parsed units plus the name tables every analysis needs."""

    def __init__(self, units: Iterable[SourceUnit]):
        self.units: list[SourceUnit] = list(units)
        self.contracts: dict[str, ContractDef] = {}
        self.unit_of: dict[str, SourceUnit] = {}
        for unit in self.units:
            for c in unit.contracts:
                if c.name in self.contracts:
                    log.warning("duplicate contract name %s; keeping the first definition", c.name)
                    continue
                self.contracts[c.name] = c
                self.unit_of[c.name] = unit
        self.callables: dict[str, Callable] = {}
        for c in self.contracts.values():
            for fn in c.functions:
                self.callables[fn.qualname] = fn
            for m in c.modifiers:
                self.callables.setdefault(m.qualname, m)
        self._ancestors: dict[str, list[str]] = {}

    # -- inheritance -----------------------------------------------------------

    def ancestors(self, contract: str) -> list[str]:
        """Known base contracts, most-derived first (rightmost base wins), cycle-safe."""
        if contract in self._ancestors:
            return self._ancestors[contract]
        order: list[str] = []
        seen = {contract}
        frontier = [contract]
        while frontier:
            nxt: list[str] = []
            for name in frontier:
                c = self.contracts.get(name)
                if c is None:
                    continue
                for base in reversed(c.inherits):
                    if base not in seen:
                        seen.add(base)
                        order.append(base)
                        nxt.append(base)
            frontier = nxt
        self._ancestors[contract] = order
        return order

    def lineage(self, contract: str) -> list[str]:
        """The contract itself followed by its ancestors."""
        return [contract, *self.ancestors(contract)]

    def inherits_from(self, contract: str, prefix: str) -> bool:
        return any(a.startswith(prefix) for a in self.ancestors(contract))

    # -- lookups ---------------------------------------------------------------

    def contract_of(self, item: Callable) -> Optional[ContractDef]:
        return self.contracts.get(item.contract)

    def unit_for(self, item: Union[Callable, StateVarDef, ContractDef]) -> Optional[SourceUnit]:
        name = item.name if isinstance(item, ContractDef) else item.contract
        return self.unit_of.get(name)

    def find_function(self, ref: str) -> list[FunctionDef]:
        """Functions named by ``C.f``, ``C.f#n`` or bare ``f``."""
        if ref in self.callables and isinstance(self.callables[ref], FunctionDef):
            return [self.callables[ref]]  # type: ignore[list-item]
        if "." in ref:
            cname, fname = ref.rsplit(".", 1)
            c = self.contracts.get(cname)
            return c.functions_named(fname) if c else []
        return [fn for c in self.contracts.values() for fn in c.functions if fn.name == ref]

    def resolve_function(
        self, contract: str, name: str, arity: Optional[int] = None, skip_self: bool = False
    ) -> Optional[FunctionDef]:
        """Name-based lookup through the lineage; prefers an arity match at each level."""
        chain = self.ancestors(contract) if skip_self else self.lineage(contract)
        fallback: Optional[FunctionDef] = None
        for cname in chain:
            c = self.contracts.get(cname)
            if c is None:
                continue
            named = [fn for fn in c.functions_named(name) if fn.kind == "function"]
            if not named:
                continue
            if arity is None:
                return named[0]
            for fn in named:
                if len(fn.params) == arity:
                    return fn
            fallback = fallback or named[0]
        return fallback

    def resolve_modifier(self, contract: str, name: str) -> Optional[ModifierDef]:
        for cname in self.lineage(contract):
            c = self.contracts.get(cname)
            if c is not None and c.modifier(name) is not None:
                return c.modifier(name)
        return None

    def resolve_state_var(self, contract: str, name: str) -> Optional[StateVarDef]:
        for cname in self.lineage(contract):
            c = self.contracts.get(cname)
            if c is not None and c.state_var(name) is not None:
                return c.state_var(name)
        return None

    def visible_state_vars(self, contract: str) -> dict[str, StateVarDef]:
        out: dict[str, StateVarDef] = {}
        for cname in reversed(self.lineage(contract)):
            c = self.contracts.get(cname)
            if c is not None:
                for v in c.state_vars:
                    out[v.name] = v
        return out

    def type_names(self) -> set[str]:
        """Every contract, struct, enum, event, error and value-type name."""
        names = set(self.contracts)
        for c in self.contracts.values():
            names.update(t.name for t in c.types)
        return names

    def applied_modifiers(self, fn: FunctionDef) -> list[ModifierDef]:
        out = []
        for inv in fn.modifiers:
            m = self.resolve_modifier(fn.contract, inv.name)
            if m is not None:
                out.append(m)
        return out
