"""Def-use chains and inter-procedural state-variable footprints."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from ..solidity.model import FunctionDef, StateVarDef
from .callgraph import CallGraph, build_call_graph
from .pdg import Callable, Pdg, build_pdg
from .program import Program

PARAM_ENTRY = -1


@dataclass(frozen=True)
class DefUseChain:
    variable: str
    defs: frozenset[int]  # node indices; PARAM_ENTRY marks the parameter definition
    uses: frozenset[int]


def def_use_chains(pdg: Pdg) -> list[DefUseChain]:
    defs: dict[str, set[int]] = {}
    uses: dict[str, set[int]] = {}
    for p in pdg.params:
        defs.setdefault(p, set()).add(PARAM_ENTRY)
    for n in pdg.nodes:
        for v in n.op.writes:
            defs.setdefault(v, set()).add(n.index)
        for v in n.op.reads:
            uses.setdefault(v, set()).add(n.index)
    names = sorted(set(defs) | set(uses))
    return [DefUseChain(v, frozenset(defs.get(v, ())), frozenset(uses.get(v, ()))) for v in names]


def local_names(item: Callable) -> set[str]:
    """Parameters, named returns and locals declared anywhere in the body."""
    names = {p.name for p in item.params if p.name}
    if isinstance(item, FunctionDef):
        names.update(p.name for p in item.returns if p.name)
    for stmt in item.statements():
        names.update(name for name, _ in stmt.declared)
    return names


def direct_state_vars(item: Callable, program: Program) -> list[StateVarDef]:
    """State variables the item's own body reads or writes (locals shadow)."""
    visible = program.visible_state_vars(item.contract)
    shadowed = local_names(item)
    touched: dict[str, StateVarDef] = {}
    for op in item.operations():
        for name in sorted(op.reads | op.writes):
            if name in visible and name not in shadowed:
                touched.setdefault(name, visible[name])
    return list(touched.values())


def state_vars_touched(
    fn: Callable, program: "Program | list", cg: Optional[CallGraph] = None
) -> list[StateVarDef]:
    """State variables read or written by ``fn`` directly or through callees and applied modifiers."""
    if not isinstance(program, Program):
        program = Program(program)
    cg = cg or build_call_graph(program)
    out: dict[tuple[str, str], StateVarDef] = {}
    for q in [fn.qualname, *cg.transitive_callees(fn.qualname)]:
        item = cg.nodes.get(q, fn if q == fn.qualname else None)
        if item is None:
            continue
        for v in direct_state_vars(item, program):
            out.setdefault((v.contract, v.name), v)
    return sorted(out.values(), key=lambda v: (v.contract, v.name))


def pdgs_for(program: Program) -> dict[str, Pdg]:
    out: dict[str, Pdg] = {}
    for c in program.contracts.values():
        for item in [*c.functions, *c.modifiers]:
            out.setdefault(item.qualname, build_pdg(item))
    return out
