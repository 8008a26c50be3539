from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from acrepair.errors import ProviderUnavailable, UsageError
from acrepair.llm import ChatMessage, ModelConfig, ReplayProvider, ScriptedProvider, Transcript
from acrepair.repair import (
    ACCEPTED,
    COPILOT,
    EXHAUSTED,
    FAILURE,
    MAX_MAD_ROUNDS,
    NOT_VULNERABLE,
    SKIPPED,
    STATIC_REJECTED,
    VULNERABLE,
    PromptEnvelope,
    RepairCase,
    Session,
    exit_code,
    parse_q0,
    parse_q4,
    run_case,
)
from acrepair.rbac.taxonomy import Taxonomy, TaxonomyStore

from .helpers import bench_case

Q1 = json.dumps({"elements": ["onlyBank", "onlyOwner"], "reason": "existing guards"})
Q2 = json.dumps({"role": "Vault/Bank", "permission": "Deposit", "is_new": False})
ACCEPT = json.dumps({"verdict": "accept", "reason": "fine"})


def q3(tag: str) -> str:
    body = (
        "function depositFromOtherContract(uint256 _depositAmount, uint8 _periodId,\n"
        "        bool isUnlocked, address _from\n    ) external onlyBank {\n"
        f"        require(isPoolActive,'Not running yet {tag}');\n"
        "        _autoDeposit(_depositAmount,_periodId,isUnlocked,_from);\n    }"
    )
    return json.dumps({"patch": body, "mechanism": "reusedModifier"})


def reject(n: int) -> str:
    return json.dumps({"verdict": "reject", "reason": f"objection {n}", "category": "missingValidation"})


def mad_script(accept_round: int | None) -> list[str]:
    """Q1, Q2, Q3, then one reject and regeneration per round; accept at ``accept_round``."""
    script = [Q1, Q2, q3("r0")]
    last = MAX_MAD_ROUNDS if accept_round is None else accept_round
    for r in range(1, last + 1):
        script += [reject(r), q3(f"r{r}")]
    script.append(ACCEPT if accept_round is not None else reject(last + 1))
    return script


def gym(mode: str = "confirmedInput") -> RepairCase:
    case, _ = bench_case("gymvault", mode=mode)
    return case


# -- debate -------------------------------------------------------------------------------


@pytest.mark.parametrize("rounds", [0, 1, 2, 3])
def test_mad_rounds(rounds):
    provider = ScriptedProvider(mad_script(rounds))
    report = run_case(gym(), provider)
    assert report.outcome == ACCEPTED
    assert report.debate["round"] == rounds
    assert f"Not running yet r{rounds}" in report.patch.patched_function_text
    assert len(report.debate["validatorFeedback"]) == rounds


def test_mad_exhaustion_keeps_last_patch():
    provider = ScriptedProvider(mad_script(None))
    report = run_case(gym(), provider)
    assert report.outcome == EXHAUSTED
    assert report.debate["round"] == MAX_MAD_ROUNDS
    assert "Not running yet r3" in report.patch.patched_function_text
    assert report.validation["overallPass"]
    assert exit_code(report) == 0


@settings(max_examples=25, deadline=None)
@given(st.lists(st.booleans(), min_size=1, max_size=8))
def test_mad_round_never_exceeds_three(verdicts):
    script = [Q1, Q2, q3("r0")]
    verdicts = verdicts + [False] * (MAX_MAD_ROUNDS + 1 - len(verdicts))
    for i, ok in enumerate(verdicts):
        script += [ACCEPT if ok else reject(i), q3(f"r{i + 1}")]
    report = run_case(gym(), ScriptedProvider(script))
    assert report.outcome in (ACCEPTED, EXHAUSTED)
    assert 0 <= report.debate["round"] <= MAX_MAD_ROUNDS
    first_accept = verdicts.index(True) if True in verdicts else None
    if first_accept is not None and first_accept <= MAX_MAD_ROUNDS:
        assert report.outcome == ACCEPTED and report.debate["round"] == first_accept
    else:
        assert report.outcome == EXHAUSTED


def test_provider_failure_in_debate_aborts_with_state():
    script = [Q1, Q2, q3("r0"), reject(1), ProviderUnavailable("down")]
    report = run_case(gym(), ScriptedProvider(script))
    assert report.outcome == FAILURE
    assert report.error_type == "DebateAborted"
    assert report.debate["round"] == 1
    assert exit_code(report) == 70


def test_validator_unparseable_twice_counts_as_reject():
    script = [Q1, Q2, q3("r0"), "hmm", "still thinking", q3("r1"), ACCEPT]
    report = run_case(gym(), ScriptedProvider(script))
    assert report.outcome == ACCEPTED
    assert report.debate["round"] == 1
    assert report.debate["validatorFeedback"][0]["category"] == "other"


# -- Q0 -----------------------------------------------------------------------------------


def test_q0_no_skips_case():
    provider = ScriptedProvider([json.dumps({"vulnerable": False, "reason": "guarded"})])
    report = run_case(gym(COPILOT), provider)
    assert report.outcome == SKIPPED
    assert report.q0_verdict == NOT_VULNERABLE
    assert report.patch is None
    assert exit_code(report) == 0


def test_q0_operator_can_override():
    provider = ScriptedProvider([json.dumps({"vulnerable": True})])
    report = run_case(gym(COPILOT), provider, confirm=lambda verdict: False)
    assert (report.q0_verdict, report.outcome) == (VULNERABLE, SKIPPED)


def test_q0_unparseable_fails_safe_to_vulnerable():
    provider = ScriptedProvider(["what?", "unclear", "no idea"] + mad_script(0))
    report = run_case(gym(COPILOT), provider)
    assert report.q0_verdict == VULNERABLE
    assert report.outcome == ACCEPTED
    assert any("Q0" in w for w in report.warnings)


@pytest.mark.parametrize(
    "text, verdict",
    [
        ('{"vulnerable": true}', VULNERABLE),
        ('{"vulnerable": "no"}', NOT_VULNERABLE),
        ("Yes.", VULNERABLE),
        ("No, the function is guarded.", NOT_VULNERABLE),
        ("Vulnerable: yes\nReason: unchecked", VULNERABLE),
        ("maybe", None),
        ("no idea", None),
        ("Not vulnerable: the caller is checked", NOT_VULNERABLE),
        ("Yes, anyone can call it", VULNERABLE),
    ],
)
def test_parse_q0(text, verdict):
    assert parse_q0(text) == verdict


def test_parse_q4_categories():
    ok, fb = parse_q4('{"verdict": "reject", "reason": "x", "category": "wrong"}')
    assert not ok and fb.category == "other"
    ok, _ = parse_q4('{"verdict": "accept"}')
    assert ok
    assert parse_q4("no structure") is None


# -- Q1 / Q2 / Q3 ---------------------------------------------------------------------------


def test_q1_skipped_without_candidates():
    case, recorded = bench_case("rewardtoken")
    captured = Transcript()
    report = run_case(case, ReplayProvider(recorded), transcript=captured)
    assert report.outcome == ACCEPTED
    assert [ex.stage for ex in captured.exchanges][0] == "Q2"
    assert report.rbac_elements == []


def test_q1_unknown_names_dropped():
    script = [json.dumps({"elements": ["onlyBank", "superUser"]}), Q2, q3("r0"), ACCEPT]
    report = run_case(gym(), ScriptedProvider(script))
    assert report.rbac_elements == ["onlyBank"]
    assert any("superUser" in w for w in report.warnings)


def test_q2_unresolved():
    report = run_case(gym(), ScriptedProvider([Q1, "no idea", "really no idea"]))
    assert report.outcome == FAILURE
    assert report.error_type == "PairUnresolved"
    assert report.failed_stage == "Q2"


def test_q2_new_pair_extends_taxonomy():
    store = TaxonomyStore(Taxonomy.shipped())
    case, recorded = bench_case("executor")
    report = run_case(case, ReplayProvider(recorded), store=store)
    assert report.pair_is_new
    assert len(store.snapshot()) == 49


def test_q3_generation_failed():
    report = run_case(gym(), ScriptedProvider([Q1, Q2, "nothing useful", "still nothing"]))
    assert report.outcome == FAILURE
    assert report.error_type == "GenerationFailed"
    assert report.failed_stage == "Q3"


def test_static_rejection_after_loops():
    case, recorded = bench_case("governed")
    report = run_case(case, ReplayProvider(recorded))
    assert report.outcome == STATIC_REJECTED
    assert not report.validation["overallPass"]
    assert exit_code(report) == 2


def test_static_failure_reprompts_with_feedback():
    bad = json.dumps({"patch": "function depositFromOtherContract(uint256 _depositAmount, uint8 _periodId, bool isUnlocked, address _from) external onlyVault { _autoDeposit(_depositAmount,_periodId,isUnlocked,_from); }"})
    provider = ScriptedProvider([Q1, Q2, bad, q3("fixed"), ACCEPT])
    report = run_case(gym(), provider)
    assert report.outcome == ACCEPTED
    assert any("onlyVault" in m.content for m in provider.requests[3])


# -- session and context --------------------------------------------------------------------


def test_context_overflow_reported():
    cfg = ModelConfig(context_window=50)
    report = run_case(gym(), ScriptedProvider(mad_script(0)), cfg=cfg, token_budget=None)
    assert report.outcome == FAILURE
    assert report.error_type == "ContextOverflow"
    assert report.failed_stage == "Q1"


def test_session_history_only_grows():
    session = Session(ScriptedProvider(["a", "b", "c"]))
    snapshots = []
    for i in range(3):
        session.ask(PromptEnvelope("Q1", f"ask {i}", "code"))
        snapshots.append(list(session.history))
    for earlier, later in zip(snapshots, snapshots[1:]):
        assert later[: len(earlier)] == earlier
        assert len(later) == len(earlier) + 2
    assert session.history[1] == ChatMessage("assistant", "a")


def test_validator_has_no_generator_history():
    provider = ScriptedProvider(mad_script(0))
    run_case(gym(), provider)
    q4_messages = provider.requests[3]
    assert len(q4_messages) == 1


def test_unknown_target_is_usage_error():
    case = RepairCase(gym().units, "GymVault.noSuchFunction")
    report = run_case(case, ScriptedProvider([]))
    assert report.error_type == UsageError.__name__
    assert exit_code(report) == 64


def test_report_usage_matches_ledger():
    report = run_case(gym(), ScriptedProvider(mad_script(1)))
    assert report.usage["calls"] == 6
    assert report.usage["promptTokens"] > 0


def test_replay_twice_is_byte_identical():
    case, recorded = bench_case("gymvault")
    a = run_case(case, ReplayProvider(recorded)).to_json(include_timing=False)
    b = run_case(case, ReplayProvider(recorded)).to_json(include_timing=False)
    assert a == b
