from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from acrepair.patching import (
    INLINE_REQUIRE,
    NEW_MODIFIER,
    NO_NEWLINE,
    REUSED_MODIFIER,
    PatchError,
    apply_unified_diff,
    assemble_patch,
    classify_mechanism,
    leading_function_text,
    unified_diff,
)
from acrepair.solidity.parser import parse_source

SRC = """pragma solidity ^0.8.0;

contract Vault {
    address bank;
    uint256 total;

    modifier onlyBank() {
        require(msg.sender == bank);
        _;
    }

    function deposit(uint256 amount) public {
        total += amount;
    }
}
"""


def _fn(src: str, name: str):
    unit = parse_source("V.sol", src)
    [fn] = [f for c in unit.contracts for f in c.functions if f.name == name]
    return unit, fn


lines = st.lists(st.sampled_from(["a", "b", "c", "", "  d", "}"]), max_size=12)


@settings(max_examples=200, deadline=None)
@given(lines, lines, st.booleans(), st.booleans())
def test_diff_apply_round_trip(a, b, a_nl, b_nl):
    old = "\n".join(a) + ("\n" if a_nl and a else "")
    new = "\n".join(b) + ("\n" if b_nl and b else "")
    diff = unified_diff(old, new, "f.sol")
    assert apply_unified_diff(old, diff) == new


def test_identical_sources_give_empty_diff():
    assert unified_diff(SRC, SRC, "V.sol") == ""
    assert apply_unified_diff(SRC, "") == SRC


def test_missing_final_newline_marker():
    diff = unified_diff("a\nb", "a\nc", "f")
    assert NO_NEWLINE in diff
    assert apply_unified_diff("a\nb", diff) == "a\nc"


def test_context_mismatch_raises():
    diff = unified_diff("a\nb\nc\n", "a\nB\nc\n", "f")
    with pytest.raises(PatchError):
        apply_unified_diff("a\nx\nc\n", diff)


def test_malformed_hunk_header():
    with pytest.raises(PatchError):
        apply_unified_diff("a\n", "--- a/f\n+++ b/f\n@@ nonsense @@\n")


def test_assemble_reindents_function():
    unit, fn = _fn(SRC, "deposit")
    text = "function deposit(uint256 amount) public onlyBank {\n    total += amount;\n}"
    out = assemble_patch(unit, fn, text)
    assert "    function deposit(uint256 amount) public onlyBank {\n        total += amount;\n    }" in out
    assert out.replace("public onlyBank {", "public {") == SRC


def test_assemble_inserts_declarations_before_function():
    unit, fn = _fn(SRC, "deposit")
    decl = "address admin;\n\nmodifier onlyAdmin() {\n    require(msg.sender == admin);\n    _;\n}"
    out = assemble_patch(unit, fn, "function deposit(uint256 amount) public onlyAdmin {\n    total += amount;\n}", decl)
    assert out.index("    address admin;") < out.index("    modifier onlyAdmin()") < out.index("function deposit")
    assert "        require(msg.sender == admin);" in out


def test_assemble_replaces_named_member():
    unit, fn = _fn(SRC, "deposit")
    out = assemble_patch(
        unit, fn, unit.text(fn.span), replacements={"onlyBank": "modifier onlyBank() {\n    require(msg.sender == bank, \"bank\");\n    _;\n}"}
    )
    assert 'require(msg.sender == bank, "bank");' in out


def test_assemble_unknown_replacement():
    unit, fn = _fn(SRC, "deposit")
    with pytest.raises(PatchError):
        assemble_patch(unit, fn, unit.text(fn.span), replacements={"nothing": "x"})


def test_assemble_replacement_overlapping_target():
    unit, fn = _fn(SRC, "deposit")
    with pytest.raises(PatchError):
        assemble_patch(unit, fn, unit.text(fn.span), replacements={"deposit": "function deposit() public {}"})


def test_leading_function_text():
    text = "Here:\nfunction f(uint x) public onlyOwner { x = 1; }\nfunction g() {}"
    assert leading_function_text("function f(uint x) public onlyOwner { x = 1; }") == "function f(uint x) public onlyOwner { x = 1; }"
    assert leading_function_text("no code here") is None
    assert leading_function_text(text).startswith("function f")


@pytest.mark.parametrize(
    "patched, expected",
    [
        ("function deposit(uint256 amount) public onlyBank { total += amount; }", (REUSED_MODIFIER, "onlyBank")),
        ("function deposit(uint256 amount) public onlyAdmin { total += amount; }", (NEW_MODIFIER, "onlyAdmin")),
        ("function deposit(uint256 amount) public { require(msg.sender == bank); total += amount; }", (INLINE_REQUIRE, None)),
    ],
)
def test_classify_mechanism(patched, expected):
    _, original = _fn(SRC, "deposit")
    _, new = _fn(f"contract Vault {{ {patched} }}", "deposit")
    assert classify_mechanism(original, new, ["onlyBank"]) == expected


def test_classify_without_patched_function():
    _, original = _fn(SRC, "deposit")
    assert classify_mechanism(original, None, ["onlyBank"]) == (INLINE_REQUIRE, None)
