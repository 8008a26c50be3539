"""Independent brute-force oracles used by the unit and acceptance tests.

Nothing here imports the analysis or slicing code: dependencies are re-derived
from the parsed operations by exhaustive pair enumeration.
"""
from __future__ import annotations

from itertools import combinations

from acrepair.solidity import FunctionDef, SourceUnit

OpKey = tuple[str, object]  # (callable qualname, operation span)


def _callables(units: list[SourceUnit]):
    out = {}
    for u in units:
        for c in u.contracts:
            for fn in c.functions:
                q = f"{c.name}.{fn.name}" if fn.ordinal == 0 else f"{c.name}.{fn.name}#{fn.ordinal}"
                out[q] = fn
            for m in c.modifiers:
                out.setdefault(f"{c.name}.{m.name}", m)
    return out


def _contracts(units):
    return {c.name: c for u in units for c in u.contracts}


def _lineage(contracts, name):
    order, todo = [], [name]
    while todo:
        cur = todo.pop(0)
        if cur in order or cur not in contracts:
            continue
        order.append(cur)
        todo.extend(contracts[cur].inherits)
    return order


def _ops(item):
    return sorted((op for s in item.statements() for op in s.operations), key=lambda o: (o.span.start, o.span.end))


def _locals(item):
    names = {p.name for p in item.params if p.name}
    if isinstance(item, FunctionDef):
        names |= {p.name for p in item.returns if p.name}
    for s in item.statements():
        names |= {n for n, _ in s.declared}
    return names


def _resolve(call, caller_contract, contracts, callables):
    if call.qualifier not in (None, "this", "super") and call.qualifier not in contracts:
        return None
    scope = [call.qualifier] if call.qualifier in contracts else _lineage(contracts, caller_contract)
    if call.qualifier == "super":
        scope = scope[1:]
    for cname in scope:
        for fn in contracts[cname].functions:
            if fn.name == call.name and len(fn.params) == len(call.args):
                return f"{cname}.{fn.name}" if fn.ordinal == 0 else f"{cname}.{fn.name}#{fn.ordinal}"
    return None


def slice_oracle(units: list[SourceUnit], target: str, seeds: tuple[str, ...] = ()) -> set[OpKey]:
    contracts = _contracts(units)
    callables = _callables(units)
    edges: set[tuple[OpKey, OpKey]] = set()
    for q, item in callables.items():
        ops = _ops(item)
        for a, b in combinations(ops, 2):
            if a.writes & b.reads:
                edges.add(((q, a.span), (q, b.span)))
        stmts = list(item.statements())
        for s in stmts:
            if s.kind not in ("control", "require", "ifRevert"):
                continue
            nested = [op for ch in [*s.children, *s.else_children] for sub in ch.walk() for op in sub.operations]
            if s.kind in ("require", "ifRevert"):
                nested += [op for op in ops if op.span.start >= s.span.end]
            for g in s.operations:
                for d in nested:
                    if d.span != g.span:
                        edges.add(((q, g.span), (q, d.span)))
        for op in ops:
            for call in op.calls:
                callee_q = _resolve(call, item.contract, contracts, callables)
                if callee_q is None:
                    continue
                callee = callables[callee_q]
                for _, p in zip(call.args, callee.params):
                    for cop in _ops(callee):
                        if p.name in cop.reads:
                            edges.add(((q, op.span), (callee_q, cop.span)))
                for cop in _ops(callee):
                    if cop.is_return:
                        edges.add(((callee_q, cop.span), (q, op.span)))

    # state variables touched by the target, its callees and applied modifiers, plus seeds
    def visible(cname):
        out = {}
        for c in _lineage(contracts, cname):
            for v in contracts[c].state_vars:
                out.setdefault(v.name, c)
        return out

    def direct(item):
        vis, loc = visible(item.contract), _locals(item)
        return {(vis[n], n) for op in _ops(item) for n in op.reads | op.writes if n in vis and n not in loc}

    reach, todo = set(), [target]
    while todo:
        q = todo.pop()
        if q in reach:
            continue
        reach.add(q)
        item = callables[q]
        for op in _ops(item):
            for call in op.calls:
                r = _resolve(call, item.contract, contracts, callables)
                if r:
                    todo.append(r)
        if isinstance(item, FunctionDef):
            for m in item.modifiers:
                for cname in _lineage(contracts, item.contract):
                    if contracts[cname].modifier(m.name):
                        todo.append(f"{cname}.{m.name}")
                        break
    v_state = set()
    for q in reach:
        v_state |= direct(callables[q])
    tc = callables[target].contract
    for s in seeds:
        vis = visible(tc)
        if s in vis:
            v_state.add((vis[s], s))
        for cname in _lineage(contracts, tc):
            m = contracts[cname].modifier(s)
            if m is not None:
                v_state |= direct(m)
                break

    seed_ops = set()
    for q, item in callables.items():
        hits = {n for c, n in direct(item) if (c, n) in v_state}
        for op in _ops(item):
            if (op.reads | op.writes) & hits:
                seed_ops.add((q, op.span))

    def closure(start, forward):
        reached = set(start)
        changed = True
        while changed:
            changed = False
            for a, b in edges:
                src, dst = (a, b) if forward else (b, a)
                if src in reached and dst not in reached:
                    reached.add(dst)
                    changed = True
        return reached

    return closure(seed_ops, True) | closure(seed_ops, False)

