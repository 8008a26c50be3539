from __future__ import annotations

import pytest

from acrepair.acg import (
    DEFAULT_TOKEN_BUDGET,
    FUNCTION,
    MODIFIER,
    STATE_VAR,
    TRUNCATED_MARKER,
    build_acg,
    estimate_tokens,
    serialize_acg,
)
from acrepair.analysis import Program, build_call_graph
from acrepair.analysis.defuse import pdgs_for
from acrepair.errors import EmptyTarget
from acrepair.solidity import parse_source

from .helpers import load_fixture
from .oracles import slice_oracle

# (fixture, target function, seeds); the last three link across functions
SLICING_CASES = [
    ("s01_straight.sol", "Counter.bump", ()),
    ("s02_guard.sol", "Gate.add", ()),
    ("s02_guard.sol", "Gate.setOpen", ("keeper",)),
    ("s06_modifier.sol", "Guarded.setRate", ("onlyOwner",)),
    ("s07_loop.sol", "Batch.run", ()),
    ("s09_unrelated.sol", "Split.fa", ()),
    ("s10_revert.sol", "Vault.deposit", ()),
    ("s11_locals.sol", "Mixer.mix", ()),
    ("s03_cross_param.sol", "Ledger.credit", ()),
    ("s04_cross_return.sol", "Pricing.quote", ()),
    ("s05_cross_chain.sol", "Chain.entry", ()),
    ("s08_inherit.sol", "Shop.buy", ()),
]
CROSS_FUNCTION = {"s03_cross_param.sol", "s04_cross_return.sol", "s05_cross_chain.sol", "s08_inherit.sol"}


def _graph(rel: str, target: str, seeds=()):
    unit = load_fixture(f"slicing/{rel}")
    program = Program([unit])
    cg = build_call_graph(program)
    fn = program.find_function(target)[0]
    return unit, program, cg, fn, build_acg(fn, cg=cg, rbac_seeds=seeds, program=program)


def _retained_spans(g, program):
    pdgs = pdgs_for(program)
    return {(q, pdgs[q].nodes[i].op.span) for q, i in g.retained}


@pytest.mark.parametrize("rel,target,seeds", SLICING_CASES)
def test_slice_matches_brute_force_oracle(rel, target, seeds):
    unit, program, _, _, g = _graph(rel, target, seeds)
    assert _retained_spans(g, program) == slice_oracle([unit], target, seeds)


def test_fixture_inventory():
    assert len({rel for rel, _, _ in SLICING_CASES}) >= 10
    assert len(CROSS_FUNCTION & {rel for rel, _, _ in SLICING_CASES}) >= 3


def test_parameter_linking_reaches_callee():
    _, program, _, _, g = _graph("s03_cross_param.sol", "Ledger.credit")
    touched = {q for q, _ in g.retained}
    assert {"Ledger.credit", "Ledger._store"} <= touched
    fee_line = "        uint256 fee = amount / 100;"
    assert fee_line in g.node(FUNCTION, "credit").body


def test_return_linking_reaches_call_site():
    _, program, _, _, g = _graph("s04_cross_return.sol", "Pricing.quote")
    assert "        uint256 p = _price(qty);" in g.node(FUNCTION, "quote").body
    assert "        return r;" in g.node(FUNCTION, "_price").body


def test_motivating_example_graph(gymvault):
    program = Program([gymvault])
    cg = build_call_graph(program)
    fn = program.find_function("GymVault.depositFromOtherContract")[0]
    g = build_acg(fn, cg=cg, rbac_seeds=["onlyBank", "onlyOwner"], program=program)
    assert {"depositFromOtherContract", "_autoDeposit"} <= g.names(FUNCTION)
    assert {"onlyBank", "onlyOwner"} <= g.names(MODIFIER)
    assert "isPoolActive" in g.names(STATE_VAR)
    assert g.has_edge("depositFromOtherContract", "_autoDeposit", "invocation")
    assert g.has_edge("depositFromOtherContract", "isPoolActive", "readWrite")
    text = serialize_acg(g)
    assert "depositFromOtherContract invokes _autoDeposit" in text
    assert serialize_acg(g) == text


def test_body_lines_are_verbatim(gymvault):
    program = Program([gymvault])
    fn = program.find_function("GymVault.depositFromOtherContract")[0]
    g = build_acg(fn, cg=build_call_graph(program), rbac_seeds=["onlyBank"], program=program)
    source_lines = set(gymvault.raw.splitlines())
    for node in g.nodes.values():
        for line in node.body:
            assert line in source_lines


def test_empty_body_is_single_node():
    unit = parse_source("t.sol", "contract C { uint x; function f() public { } function g() public { x = 1; } }")
    program = Program([unit])
    g = build_acg(program.find_function("C.f")[0], cg=build_call_graph(program), program=program)
    assert len(g.nodes) == 1 and not g.edges
    text = serialize_acg(g)
    assert "invokes" not in text and "reads/writes" not in text


def test_missing_body_raises():
    unit = parse_source("t.sol", "abstract contract C { function f() public virtual; }")
    program = Program([unit])
    with pytest.raises(EmptyTarget):
        build_acg(program.find_function("C.f")[0], cg=build_call_graph(program), program=program)


def test_unrelated_function_absent():
    _, _, _, _, g = _graph("s09_unrelated.sol", "Split.fa")
    assert "fb" not in g.names(FUNCTION)


def test_seed_monotonicity(gymvault):
    program = Program([gymvault])
    cg = build_call_graph(program)
    fn = program.find_function("GymVault.depositFromOtherContract")[0]
    small = build_acg(fn, cg=cg, program=program)
    big = build_acg(fn, cg=cg, rbac_seeds=["onlyBank", "bank"], program=program)
    assert set(small.nodes) <= set(big.nodes)


def test_deterministic_and_idempotent(gymvault):
    program = Program([gymvault])
    cg = build_call_graph(program)
    fn = program.find_function("GymVault.depositFromOtherContract")[0]
    a = build_acg(fn, cg=cg, rbac_seeds=["onlyBank"], program=program)
    b = build_acg(fn, cg=cg, rbac_seeds=["onlyBank"], program=program)
    assert a.export() == b.export()


def test_edges_unique_and_kinds_valid(gymvault):
    program = Program([gymvault])
    fn = program.find_function("GymVault.depositFromOtherContract")[0]
    g = build_acg(fn, cg=build_call_graph(program), rbac_seeds=["onlyBank", "onlyOwner"], program=program)
    keys = [(e.src, e.dst, e.kind) for e in g.edges]
    assert len(keys) == len(set(keys))
    assert {e.kind for e in g.edges} <= {"invocation", "modifying", "readWrite", "comment"}


def test_comment_nodes_attach_to_graph_members(gymvault):
    program = Program([gymvault])
    fn = program.find_function("GymVault.depositFromOtherContract")[0]
    g = build_acg(fn, cg=build_call_graph(program), rbac_seeds=["onlyBank"], program=program)
    comments = [e for e in g.edges if e.kind == "comment"]
    assert comments and all(e.dst in g.nodes for e in comments)


def test_truncation_marker_and_budget(gymvault):
    program = Program([gymvault])
    fn = program.find_function("GymVault.depositFromOtherContract")[0]
    g = build_acg(fn, cg=build_call_graph(program), rbac_seeds=["onlyBank", "onlyOwner"], program=program)
    full = serialize_acg(g, None)
    assert TRUNCATED_MARKER not in full
    small = serialize_acg(g, 150)
    assert TRUNCATED_MARKER in small
    assert estimate_tokens(small) < estimate_tokens(full)
    assert "depositFromOtherContract" in small
    assert DEFAULT_TOKEN_BUDGET == 6000
