from __future__ import annotations

import json
import random
import string
from collections import Counter
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from acrepair.errors import CorpusUnreadable
from acrepair.rbac.candidates import candidate_rbac_elements
from acrepair.rbac.mining import (
    HARDCODED,
    MODIFIER,
    OZAC,
    TRS,
    RolePermissionPair,
    extract_pairs,
    mine_corpus,
    mining_stats,
    pair_multiset,
    rank,
)
from acrepair.rbac.normalize import normalize_name, normalize_pair
from acrepair.rbac.taxonomy import (
    ADDED,
    DUPLICATE,
    REJECTED,
    ROLE_GROUPS,
    RUNTIME,
    SHIPPED,
    Taxonomy,
    TaxonomyStore,
    propose_taxonomy_entry,
    sanitize_taxonomy,
)
from acrepair.solidity.parser import parse_source

from .helpers import FIXTURES, load_fixture

MINING = FIXTURES / "mining"

# per-role permission counts of the shipped table (Admin excludes the runtime Low-level call row)
ROLE_COUNTS = {
    "Admin": 9,
    "Owner of the contract": 5,
    "Owner of funds/stakes/tokens": 10,
    "Minter": 2,
    "Loaner": 8,
    "Borrower": 8,
    "Vault/Bank": 4,
    "Logger": 2,
}


def _unit(src: str, name: str = "t.sol"):
    return parse_source(name, src)


def _expected_mining() -> Counter:
    data = json.loads((MINING / "expected.json").read_text())
    return Counter({(r, p): c for r, p, c in data["pairs"]})


# -- mining ------------------------------------------------------------------------


def test_mining_corpus_matches_hand_labels():
    ranked, stats = mine_corpus(MINING, k=10)
    assert pair_multiset(ranked) == _expected_mining()
    assert len(list(MINING.glob("*.sol"))) == 20


def test_mining_stats_hand_computed():
    ranked, stats = mine_corpus(MINING, k=10)
    # 3 + 2 + 2 + 31 singletons; the top 10 are the three repeated pairs and seven singletons
    assert stats.total_pairs == 38
    assert stats.unique_pairs == 34
    assert stats.top_k_coverage == pytest.approx(14 / 38, abs=0, rel=1e-12)
    assert mining_stats(ranked, 1).top_k_coverage == pytest.approx(3 / 38)
    assert mining_stats(ranked, 100).top_k_coverage == 1.0


def test_ranking_ties_lexicographic():
    ranked, _ = mine_corpus(MINING, k=10)
    keys = [(-p.occurrence_count, p.role, p.permission) for p in ranked]
    assert keys == sorted(keys)
    assert [p.key for p in ranked[:4]] == [
        ("owner", "mint"),
        ("minter", "mint"),
        ("owner", "pause"),
        ("admin", "addoracle"),
    ]


def test_rank_independent_of_input_order():
    ranked, _ = mine_corpus(MINING)
    rng = random.Random(7)
    for _ in range(5):
        shuffled = ranked[:]
        rng.shuffle(shuffled)
        assert [p.key for p in rank(shuffled)] == [p.key for p in ranked]


def test_modifier_example():
    src = "contract C { modifier onlyOwner { _; } function transferOwnership(address n) public onlyOwner {} }"
    [p] = extract_pairs(_unit(src))
    assert (p.role, p.permission, p.pattern) == ("owner", "transferownership", MODIFIER)


def test_trs_example():
    src = "contract C { address bank; function deposit() public { require(msg.sender == bank); } }"
    [p] = extract_pairs(_unit(src))
    assert (p.role, p.permission, p.pattern) == ("bank", "deposit", TRS)


def test_ozac_and_modifier_merge_into_one_record():
    src = "contract C is Ownable { function pause() external onlyOwner {} }"
    [p] = extract_pairs(_unit(src))
    assert p.key == ("owner", "pause")
    assert p.occurrence_count == 1
    assert p.patterns == (OZAC, MODIFIER)


def test_trs_literal_is_hardcoded():
    src = "contract C { function f() public { require(msg.sender == address(0x1)); } }"
    [p] = extract_pairs(_unit(src))
    assert p.role == HARDCODED


def test_empty_corpus(tmp_path):
    ranked, stats = mine_corpus(tmp_path)
    assert ranked == []
    assert (stats.total_pairs, stats.unique_pairs, stats.top_k_coverage) == (0, 0, 0.0)


def test_unreadable_corpus(tmp_path):
    with pytest.raises(CorpusUnreadable):
        mine_corpus(tmp_path / "missing")


def test_stats_small_example():
    pairs = [
        RolePermissionPair("a", "x", "a", "x", TRS, 3),
        RolePermissionPair("b", "y", "b", "y", TRS, 1),
        RolePermissionPair("c", "z", "c", "z", TRS, 1),
    ]
    s = mining_stats(rank(pairs), 2)
    assert (s.total_pairs, s.unique_pairs) == (5, 3)
    assert s.top_k_coverage == pytest.approx(4 / 5)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.sampled_from("abc"), st.sampled_from("xyz"), st.integers(1, 5)), max_size=12))
def test_stats_invariants(rows):
    merged: dict = {}
    for r, p, c in rows:
        merged[(r, p)] = merged.get((r, p), 0) + c
    pairs = [RolePermissionPair(r, p, r, p, TRS, c) for (r, p), c in merged.items()]
    for k in (0, 1, 3, 20):
        s = mining_stats(rank(pairs), k)
        assert s.unique_pairs <= s.total_pairs or s.total_pairs == 0
        assert 0.0 <= s.top_k_coverage <= 1.0


# -- normalization -----------------------------------------------------------------


@pytest.mark.parametrize(
    "raw, expected",
    [
        (("OnlyOwner", "TransferOwnership"), ("owner", "transferownership")),
        (("administrator", "mint"), ("admin", "mint")),
        (("MINTER_ROLE", "set_fee"), ("minter", "fee")),
        (("isAdmin", "getReward"), ("admin", "reward")),
        (("adminAddress", "mint"), ("admin", "mint")),
        (("Vault/Bank", "Deposit"), ("bank", "deposit")),
        (("DEFAULT_ADMIN_ROLE", "grant"), ("admin", "grant")),
        (("role", "island"), ("role", "island")),
    ],
)
def test_normalize_examples(raw, expected):
    assert normalize_pair(*raw) == expected


def test_normalize_idempotent_on_random_strings():
    rng = random.Random(1234)
    alphabet = string.ascii_letters + "_ " + "0123456789"
    pieces = ["only", "Only", "is", "get", "set_", "Role", "_role", "Addr", "Address", "admin", "Owner"]
    for _ in range(1000):
        parts = [rng.choice(pieces) if rng.random() < 0.4 else "".join(rng.choice(alphabet) for _ in range(rng.randint(1, 6))) for _ in range(rng.randint(1, 4))]
        text = "".join(parts)
        once = normalize_name(text)
        assert normalize_name(once) == once, text


@settings(max_examples=200, deadline=None)
@given(st.text(min_size=1, max_size=20))
def test_normalize_idempotent_property(text):
    once = normalize_pair(text, text)
    assert normalize_pair(*once) == once
    assert once[0] == once[0].lower()


# -- taxonomy ------------------------------------------------------------------------


def test_shipped_taxonomy_shape():
    t = Taxonomy.shipped()
    assert len(t) == 48
    assert set(t.role_groups()) == set(ROLE_GROUPS)
    assert Counter(e.role_category for e in t.entries) == ROLE_COUNTS
    assert all(e.provenance == SHIPPED and e.detailed_checks for e in t.entries)


def test_taxonomy_round_trip(tmp_path):
    t = Taxonomy.shipped()
    propose_taxonomy_entry(t, ("Admin", "Low-level call"), ["check caller before call"], now="2024-01-01T00:00:00+00:00")
    path = tmp_path / "tax.json"
    t.save(path)
    again = Taxonomy.load(path)
    assert again.sorted_entries() == t.sorted_entries()
    assert (again.version, again.synonyms) == (t.version, t.synonyms)
    again.save(tmp_path / "again.json")
    assert (tmp_path / "again.json").read_bytes() == path.read_bytes()


def test_propose_low_level_call_extends_to_49():
    t = Taxonomy.shipped()
    v0 = t.version
    res = propose_taxonomy_entry(t, ("Admin", "Low-level call"))
    assert res.status == ADDED
    assert len(t) == 49
    assert t.version == v0 + 1
    assert res.entry.provenance == RUNTIME and res.entry.added_at


def test_propose_duplicate_under_normalization():
    t = Taxonomy.shipped()
    res = propose_taxonomy_entry(t, ("OnlyOwner", "Pause contract"))
    assert res.status == DUPLICATE
    assert res.entry.permission_category == "Pause contract"
    assert len(t) == 48


@pytest.mark.parametrize("cand", [("", "mint"), ("Admin", "  "), ("Admin", "x; selfdestruct(a)"), ("A" * 81, "mint")])
def test_propose_rejects_malformed(cand):
    t = Taxonomy.shipped()
    v0 = t.version
    res = propose_taxonomy_entry(t, cand)
    assert res.status == REJECTED
    assert t.version == v0 and len(t) == 48


@settings(max_examples=80, deadline=None)
@given(st.lists(st.tuples(st.sampled_from(["Admin", "admins", "OnlyAdmin", "Owner", "the owner", "Minter"]),
                          st.sampled_from(["Mint", "mint", "Pause", "pause", "Upgrade_contract", "upgrade contract"])), max_size=10))
def test_propose_never_creates_normalized_duplicates(cands):
    t = Taxonomy.shipped()
    for c in cands:
        propose_taxonomy_entry(t, c)
    keys = [t.normalized(e.role_category, e.permission_category) for e in t.entries]
    assert len(keys) == len(set(keys))


def test_store_persists_on_add(tmp_path):
    path = tmp_path / "tax.json"
    store = TaxonomyStore.open(path)
    assert store.propose(("Admin", "Low-level call")).added
    assert len(Taxonomy.load(path)) == 49


def test_sanitize_merge_runtime_duplicate():
    t = Taxonomy.shipped()
    propose_taxonomy_entry(t, ("Admin", "Halt trading"))
    v = t.version

    def review(entries):
        return [{"action": "merge", "into": ["Owner of the contract", "Pause contract"]} if e.provenance == RUNTIME else "keep" for e in entries]

    results = sanitize_taxonomy(t, review)
    assert len(t) == 48 and t.version == v + 1
    assert results[-1][1].action == "merge"


def test_sanitize_all_keep_no_mutation():
    t = Taxonomy.shipped()
    propose_taxonomy_entry(t, ("Admin", "Low-level call"))
    before = t.to_json()
    sanitize_taxonomy(t, lambda entries: ["keep"] * len(entries))
    assert t.to_json() == before


def test_sanitize_shipped_entries_immutable():
    t = Taxonomy.shipped()
    before = t.to_json()
    results = sanitize_taxonomy(t, lambda entries: ["drop"] * len(entries))
    assert t.to_json() == before
    assert all(v.action == "keep" for _, v in results)


def test_sanitize_callback_failure_is_atomic():
    t = Taxonomy.shipped()
    propose_taxonomy_entry(t, ("Admin", "Low-level call"))
    before = t.to_json()

    def review(entries):
        raise RuntimeError("reviewer down")

    with pytest.raises(RuntimeError):
        sanitize_taxonomy(t, review)
    assert t.to_json() == before


# -- candidates ----------------------------------------------------------------------


def test_candidates_motivating_example(gymvault):
    names = {(c.name, c.kind) for c in candidate_rbac_elements([gymvault])}
    assert ("onlyBank", "modifier") in names
    assert ("onlyOwner", "modifier") in names


def test_candidates_empty_when_nothing_role_like():
    src = "contract C { uint256 total; function add(uint256 x) public { total += x; } }"
    assert candidate_rbac_elements([_unit(src)]) == []


def test_candidates_hand_labeled_fixture():
    src = """
    contract C {
        mapping(address => bool) whitelist;
        mapping(address => uint256) balances;
        address payable treasury;
        uint256 fee;
        bytes32 constant MINTER_ROLE = keccak256("M");
        modifier whenNotPaused { _; }
        function setOwner(address n) public {}
        function grantMinter(address n) public {}
        function setFee(uint256 f) public {}
        function transfer(address to, uint256 v) public {}
    }
    """
    got = {(c.name, c.kind) for c in candidate_rbac_elements([_unit(src)])}
    assert got == {
        ("whitelist", "stateVar"),
        ("treasury", "stateVar"),
        ("MINTER_ROLE", "stateVar"),
        ("whenNotPaused", "modifier"),
        ("setOwner", "function"),
        ("grantMinter", "function"),
    }
