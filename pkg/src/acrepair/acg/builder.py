"""Inter-procedural slicing of the access-control context around a vulnerable function.

The slice starts from every operation, anywhere in the program, that reads
or writes one of the *seed state variables*: those touched by the target
function (directly, through callees or through applied modifiers) plus the
ones named by, or touched by, the RBAC elements picked in Q1.  From those
operations two worklists (data and control) are drained breadth-first, once
backward along dependence edges and once forward.  Besides the intra-function
PDG edges, two kinds of inter-procedural edges are followed:

* call-site operation -> each callee operation reading the bound parameter;
* callee ``return`` operation -> the call-site operation consuming the value.

Every retained operation keeps its complete source line(s).
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Optional

from ..analysis.callgraph import CallGraph, build_call_graph, is_call_site, resolve_call
from ..analysis.defuse import direct_state_vars, state_vars_touched
from ..analysis.pdg import Pdg, build_pdg
from ..analysis.program import Callable, Program
from ..errors import EmptyTarget
from ..solidity.model import FunctionDef, ModifierDef, StateVarDef

FUNCTION = "Function"
MODIFIER = "Modifier"
STATE_VAR = "StateVar"
COMMENT = "Comment"
NODE_KINDS = (FUNCTION, MODIFIER, STATE_VAR, COMMENT)
EDGE_KINDS = ("invocation", "modifying", "readWrite", "comment")

OpId = tuple[str, int]  # (callable qualname, pdg node index)
NodeKey = tuple[str, str, str]  # (kind, contract, name)


@dataclass(frozen=True)
class AcgNode:
    kind: str
    name: str
    contract: str
    signature: str
    body: tuple[str, ...] = ()

    @property
    def key(self) -> NodeKey:
        return (self.kind, self.contract, self.name)

    @property
    def sort_key(self) -> tuple[int, str, str]:
        return (NODE_KINDS.index(self.kind), self.contract, self.name)


@dataclass(frozen=True, order=True)
class AcgEdge:
    src: NodeKey
    dst: NodeKey
    kind: str


@dataclass
class AcContextGraph:
    nodes: dict[NodeKey, AcgNode]
    edges: list[AcgEdge]
    root: NodeKey
    anchors: frozenset[NodeKey] = frozenset()
    retained: frozenset[OpId] = frozenset()
    state_vars: tuple[str, ...] = ()

    def node(self, kind: str, name: str, contract: Optional[str] = None) -> Optional[AcgNode]:
        for n in self.nodes.values():
            if n.kind == kind and n.name == name and (contract is None or n.contract == contract):
                return n
        return None

    def names(self, kind: str) -> set[str]:
        return {n.name for n in self.nodes.values() if n.kind == kind}

    def has_edge(self, src_name: str, dst_name: str, kind: str) -> bool:
        return any(e.kind == kind and e.src[2] == src_name and e.dst[2] == dst_name for e in self.edges)

    def sorted_nodes(self) -> list[AcgNode]:
        return sorted(self.nodes.values(), key=lambda n: n.sort_key)

    def export(self) -> str:
        """One record per node, body line and edge; stable for golden tests."""
        lines = []
        for n in self.sorted_nodes():
            root = " root" if n.key == self.root else ""
            lines.append(f"node {n.kind} {n.contract}.{n.name}{root}")
            lines.append(f"  sig {n.signature}")
            lines += [f"  body {b}" for b in n.body]
        for e in sorted(self.edges):
            lines.append(f"edge {e.kind} {e.src[1]}.{e.src[2]} {e.dst[1]}.{e.dst[2]}")
        return "\n".join(lines) + "\n"


@dataclass
class SliceGraph:
    """Operation-level dependence relation spanning every callable in the program."""

    ops: list[OpId] = field(default_factory=list)
    succ: dict[OpId, set[tuple[OpId, str]]] = field(default_factory=dict)  # (target, "data"|"control")
    pred: dict[OpId, set[tuple[OpId, str]]] = field(default_factory=dict)

    def add(self, a: OpId, b: OpId, kind: str) -> None:
        if a == b:
            return
        self.succ.setdefault(a, set()).add((b, kind))
        self.pred.setdefault(b, set()).add((a, kind))


def node_name(item: Callable) -> str:
    if isinstance(item, FunctionDef) and item.ordinal:
        return f"{item.name}#{item.ordinal}"
    return item.name


def build_slice_graph(program: Program, pdgs: dict[str, Pdg], cg: CallGraph) -> SliceGraph:
    sg = SliceGraph()
    for q in sorted(pdgs):
        pdg = pdgs[q]
        sg.ops.extend((q, n.index) for n in pdg.nodes)
        for d, u, _ in pdg.data_edges:
            sg.add((q, d), (q, u), "data")
        for g, dep in pdg.control_edges:
            sg.add((q, g), (q, dep), "control")
    for q in sorted(pdgs):
        item = cg.nodes.get(q)
        if item is None:
            continue
        pdg = pdgs[q]
        for n in pdg.nodes:
            for call in n.op.calls:
                target = resolve_call(call, item, program) if is_call_site(call, program) else None
                if target is None or target.qualname not in pdgs:
                    continue
                callee_pdg = pdgs[target.qualname]
                for _, param in zip(call.args, (p.name for p in target.params)):
                    for u in callee_pdg.param_uses.get(param, []):
                        sg.add((q, n.index), (target.qualname, u), "data")
                for r in callee_pdg.return_nodes:
                    sg.add((target.qualname, r), (q, n.index), "data")
    return sg


def _closure(sg: SliceGraph, seeds: Iterable[OpId], backward: bool) -> set[OpId]:
    """Drain the data and control worklists; nodes reached by one feed both."""
    adj = sg.pred if backward else sg.succ
    reached: set[OpId] = set(seeds)
    d_data: deque[OpId] = deque(sorted(reached))
    d_control: deque[OpId] = deque(sorted(reached))
    queued = {(op, "data") for op in reached} | {(op, "control") for op in reached}
    while d_data or d_control:
        for worklist, kind in ((d_data, "data"), (d_control, "control")):
            while worklist:
                op = worklist.popleft()
                for nxt, ekind in sorted(adj.get(op, ())):
                    if ekind != kind:
                        continue
                    reached.add(nxt)
                    for wl, k in ((d_data, "data"), (d_control, "control")):
                        if (nxt, k) not in queued:
                            queued.add((nxt, k))
                            wl.append(nxt)
    return reached


def resolve_seeds(
    seeds: Iterable[str], fvul: FunctionDef, program: Program
) -> tuple[list[ModifierDef], list[StateVarDef], list[FunctionDef]]:
    mods: list[ModifierDef] = []
    vars_: list[StateVarDef] = []
    fns: list[FunctionDef] = []
    for name in sorted(set(seeds)):
        m = program.resolve_modifier(fvul.contract, name)
        if m is None:
            m = next((c.modifier(name) for c in program.contracts.values() if c.modifier(name)), None)
        if m is not None:
            mods.append(m)
            continue
        v = program.resolve_state_var(fvul.contract, name)
        if v is None:
            v = next((c.state_var(name) for c in program.contracts.values() if c.state_var(name)), None)
        if v is not None:
            vars_.append(v)
            continue
        fn = program.resolve_function(fvul.contract, name)
        if fn is None:
            found = program.find_function(name)
            fn = found[0] if found else None
        if fn is not None:
            fns.append(fn)
    return mods, vars_, fns


def build_acg(
    fvul: FunctionDef,
    pdgs: Optional[dict[str, Pdg]] = None,
    cg: Optional[CallGraph] = None,
    rbac_seeds: Iterable[str] = (),
    program: Optional[Program] = None,
) -> AcContextGraph:
    if not fvul.has_body:
        raise EmptyTarget(f"{fvul.qualname} has no body")
    if cg is None:
        cg = build_call_graph(program or Program([]))
    program = cg.program
    if pdgs is None:
        pdgs = {q: build_pdg(item) for q, item in cg.nodes.items()}
    sg = build_slice_graph(program, pdgs, cg)

    seed_mods, seed_vars, seed_fns = resolve_seeds(rbac_seeds, fvul, program)
    v_state: dict[tuple[str, str], StateVarDef] = {}
    for v in state_vars_touched(fvul, program, cg):
        v_state[(v.contract, v.name)] = v
    for v in seed_vars:
        v_state[(v.contract, v.name)] = v
    for item in [*seed_mods, *seed_fns]:
        for v in direct_state_vars(item, program):
            v_state[(v.contract, v.name)] = v

    # seed operations: program-wide reads/writes of the seed variables, honoring shadowing
    seed_ops: set[OpId] = set()
    for q in sorted(pdgs):
        item = cg.nodes.get(q)
        if item is None:
            continue
        touched = {(v.contract, v.name) for v in direct_state_vars(item, program)}
        hits = {name for (c, name) in touched if (c, name) in v_state}
        if not hits:
            continue
        for n in pdgs[q].nodes:
            if (n.op.reads | n.op.writes) & hits:
                seed_ops.add((q, n.index))
    retained = _closure(sg, seed_ops, backward=True) | _closure(sg, seed_ops, backward=False)

    callees = [cg.nodes[q] for q in cg.transitive_callees(fvul.qualname) if q in cg.nodes]
    acg_items: dict[str, Callable] = {fvul.qualname: fvul}
    for item in callees:
        acg_items.setdefault(item.qualname, item)
    for q, _ in sorted(retained):
        if q in cg.nodes:
            acg_items.setdefault(q, cg.nodes[q])
    for item in [*seed_mods, *seed_fns]:
        acg_items.setdefault(item.qualname, item)
    for item in list(acg_items.values()):
        if isinstance(item, FunctionDef):
            for m in program.applied_modifiers(item):
                acg_items.setdefault(m.qualname, m)
    inherited_mods: list[ModifierDef] = []
    for base in program.ancestors(fvul.contract):
        c = program.contracts.get(base)
        if c is not None:
            inherited_mods.extend(c.modifiers)
    for m in inherited_mods:
        acg_items.setdefault(m.qualname, m)

    unit = program.unit_for(fvul)
    nodes: dict[NodeKey, AcgNode] = {}
    key_of: dict[str, NodeKey] = {}
    for q in sorted(acg_items):
        item = acg_items[q]
        u = program.unit_for(item) or unit
        if isinstance(item, ModifierDef):
            body = tuple(u.line_text(i) for i in u.lines_of(item.span)) if u else ()
            node = AcgNode(MODIFIER, item.name, item.contract, item.signature_text, body)
        else:
            if item is fvul:
                lines = sorted({ln for stmt in item.statements() for ln in u.lines_of(stmt.span)}) if u else []
            else:
                lines = _retained_lines(item, pdgs.get(q), retained, u)
            node = AcgNode(FUNCTION, node_name(item), item.contract, item.signature_text, tuple(u.line_text(i) for i in lines) if u else ())
        nodes[node.key] = node
        key_of[q] = node.key

    for (contract, name), v in sorted(v_state.items()):
        u = program.unit_for(v) or unit
        lines: list[int] = []
        for q in sorted(acg_items):
            item = acg_items[q]
            if q not in pdgs or not any(sv.name == name and sv.contract == contract for sv in direct_state_vars(item, program)):
                continue
            for n in pdgs[q].nodes:
                if (q, n.index) in retained and n.op.touches(name):
                    iu = program.unit_for(item) or u
                    if iu is u:
                        lines.extend(ln for ln in u.lines_of(n.op.span) if ln not in lines)
        body = tuple(u.line_text(i) for i in lines) if u else ()
        node = AcgNode(STATE_VAR, name, contract, v.text, body)
        nodes[node.key] = node

    edges: set[AcgEdge] = set()
    for q, src_key in key_of.items():
        item = acg_items[q]
        for e in cg.edges_from(q):
            if e.callee in key_of:
                kind = "modifying" if e.kind == "modifier" else "invocation"
                edges.add(AcgEdge(src_key, key_of[e.callee], kind))
        for v in direct_state_vars(item, program):
            vk = (STATE_VAR, v.contract, v.name)
            if vk in nodes:
                edges.add(AcgEdge(src_key, vk, "readWrite"))

    # comments attached to declarations already in the graph
    decl_keys: dict[tuple[str, str, str], NodeKey] = {}
    for key, n in nodes.items():
        kind = {FUNCTION: "function", MODIFIER: "modifier", STATE_VAR: "stateVar"}[n.kind]
        decl_keys[(n.contract, kind, n.name.split("#")[0])] = key
    for c in sorted(program.contracts.values(), key=lambda c: c.name):
        u = program.unit_of[c.name]
        for cm in c.comments:
            if cm.attached_to is None:
                continue
            target = decl_keys.get((c.name, cm.attached_to[0], cm.attached_to[1]))
            if target is None:
                continue
            line = u.line_of(cm.span.start)
            node = AcgNode(COMMENT, f"L{line}", c.name, cm.text, tuple(u.line_text(i) for i in u.lines_of(cm.span)))
            nodes[node.key] = node
            edges.add(AcgEdge(node.key, target, "comment"))

    root = key_of[fvul.qualname]
    anchors = {root}
    anchors.update(key_of[m.qualname] for m in [*seed_mods, *seed_fns, *inherited_mods] if m.qualname in key_of)
    anchors.update((STATE_VAR, v.contract, v.name) for v in seed_vars)
    return AcContextGraph(
        nodes=nodes,
        edges=sorted(edges),
        root=root,
        anchors=frozenset(anchors),
        retained=frozenset(retained),
        state_vars=tuple(sorted(name for _, name in v_state)),
    )


def _retained_lines(item: Callable, pdg: Optional[Pdg], retained: set[OpId], unit) -> list[int]:
    if pdg is None or unit is None:
        return []
    lines: set[int] = set()
    for n in pdg.nodes:
        if (item.qualname, n.index) in retained:
            lines.update(unit.lines_of(n.op.span))
    return sorted(lines)


def retained_statements(g: AcContextGraph, pdgs: dict[str, Pdg]) -> set[tuple[str, int]]:
    """(callable, statement index) pairs owning at least one retained operation."""
    out = set()
    for q, idx in g.retained:
        pdg = pdgs.get(q)
        if pdg is not None:
            out.add((q, pdg.nodes[idx].stmt_index))
    return out
