from __future__ import annotations

import json

import httpx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from acrepair.errors import ProviderUnavailable, TranscriptDiverged, TranscriptExhausted, Unparseable
from acrepair.llm import (
    ChatMessage,
    Exchange,
    LiveProvider,
    ModelConfig,
    PriceProfile,
    RecordingProvider,
    ReplayProvider,
    ScriptedProvider,
    Transcript,
    Usage,
    UsageLedger,
    approx_tokens,
    complete,
    parse_structured,
    request_hash,
    request_payload,
)
from acrepair.llm.types import PRICE_PROFILE_ENV

from .helpers import FIXTURES

PARSING = json.loads((FIXTURES / "parsing" / "outputs.json").read_text(encoding="utf-8"))
MSGS = [ChatMessage("user", "hello there")]
CFG = ModelConfig()


def _completion(text: str, usage: dict | None = None) -> dict:
    body = {"choices": [{"message": {"role": "assistant", "content": text}}]}
    if usage is not None:
        body["usage"] = usage
    return body


def _live(handler, **kw) -> tuple[LiveProvider, list[float]]:
    sleeps: list[float] = []
    client = httpx.Client(transport=httpx.MockTransport(handler))
    p = LiveProvider("https://llm.test/v1", "k", client=client, sleep=sleeps.append, **kw)
    return p, sleeps


# -- parse_structured ------------------------------------------------------------------


@pytest.mark.parametrize("case", PARSING["positive"], ids=lambda c: c["name"])
def test_parse_recovers_payload(case):
    assert parse_structured(case["text"]) == case["expected"]


@pytest.mark.parametrize("case", PARSING["negative"], ids=lambda c: c["name"])
def test_parse_rejects_adversarial(case):
    with pytest.raises(Unparseable):
        parse_structured(case["text"])


def test_parse_fixture_sizes():
    assert len(PARSING["positive"]) == 20
    assert len(PARSING["negative"]) == 5


def test_parse_strict_two_keys():
    assert parse_structured('{"role":"bank","permission":"deposit"}') == {"role": "bank", "permission": "deposit"}


@settings(max_examples=100, deadline=None)
@given(st.dictionaries(st.sampled_from(["role", "permission", "reason", "verdict"]), st.text(max_size=30), min_size=1))
def test_parse_prose_wrapped_json_property(payload):
    text = f"Here is the answer:\n{json.dumps(payload)}\nHope this helps."
    assert parse_structured(text) == payload


# -- live provider -------------------------------------------------------------------------


def test_live_success_uses_reported_usage():
    seen = {}

    def handler(req: httpx.Request):
        seen["url"] = str(req.url)
        seen["auth"] = req.headers["authorization"]
        seen["body"] = json.loads(req.content)
        return httpx.Response(200, json=_completion("ok", {"prompt_tokens": 11, "completion_tokens": 2}))

    p, sleeps = _live(handler)
    text, usage = p.chat(MSGS, CFG)
    assert text == "ok"
    assert (usage.prompt_tokens, usage.completion_tokens, usage.estimated) == (11, 2, False)
    assert seen["url"] == "https://llm.test/v1/chat/completions"
    assert seen["auth"] == "Bearer k"
    assert seen["body"]["model"] == CFG.model_name
    assert seen["body"]["messages"] == [{"role": "user", "content": "hello there"}]
    assert "response_format" not in seen["body"]
    assert sleeps == []


def test_live_sends_response_format_when_enabled():
    bodies = []

    def handler(req):
        bodies.append(json.loads(req.content))
        return httpx.Response(200, json=_completion("{}"))

    p, _ = _live(handler, send_response_format=True)
    p.chat(MSGS, CFG)
    assert bodies[0]["response_format"] == {"type": "json_object"}


def test_live_retries_transient_then_succeeds():
    statuses = iter([429, 503, 200])

    def handler(req):
        code = next(statuses)
        if code != 200:
            return httpx.Response(code)
        return httpx.Response(200, json=_completion("fine", {"prompt_tokens": 1, "completion_tokens": 1}))

    p, sleeps = _live(handler)
    assert p.chat(MSGS, CFG)[0] == "fine"
    assert sleeps == [1.0, 2.0]


def test_live_transport_errors_retried():
    calls = []

    def handler(req):
        calls.append(1)
        if len(calls) == 1:
            raise httpx.ConnectError("refused", request=req)
        return httpx.Response(200, json=_completion("up"))

    p, sleeps = _live(handler)
    assert p.chat(MSGS, CFG)[0] == "up"
    assert len(calls) == 2


def test_live_gives_up_after_three_retries():
    calls = []

    def handler(req):
        calls.append(1)
        return httpx.Response(500)

    p, sleeps = _live(handler)
    with pytest.raises(ProviderUnavailable):
        p.chat(MSGS, CFG)
    assert len(calls) == 4
    assert sleeps == [1.0, 2.0, 4.0]


def test_live_client_error_not_retried():
    calls = []

    def handler(req):
        calls.append(1)
        return httpx.Response(401, text="bad key")

    p, _ = _live(handler)
    with pytest.raises(ProviderUnavailable):
        p.chat(MSGS, CFG)
    assert len(calls) == 1


def test_live_malformed_body():
    p, _ = _live(lambda req: httpx.Response(200, json={"nope": 1}))
    with pytest.raises(ProviderUnavailable):
        p.chat(MSGS, CFG)


def test_live_estimates_usage_when_missing():
    p, _ = _live(lambda req: httpx.Response(200, json=_completion("two words")))
    _, usage = p.chat(MSGS, CFG)
    assert usage.estimated
    assert (usage.prompt_tokens, usage.completion_tokens) == (2, 2)


def test_live_requires_credentials(monkeypatch):
    monkeypatch.delenv("ACREPAIR_LLM_ENDPOINT", raising=False)
    monkeypatch.delenv("ACREPAIR_LLM_API_KEY", raising=False)
    with pytest.raises(ProviderUnavailable):
        LiveProvider()


# -- transcripts and replay ----------------------------------------------------------------


def _recorded(responses: list[str], prompts: list[str]) -> Transcript:
    t = Transcript("c1", "mock", {"function": "f"})
    rec = RecordingProvider(ScriptedProvider(responses), t)
    for p in prompts:
        complete(rec, [ChatMessage("user", p)], CFG, stage="Q0", agent="generator")
    return t


def test_replay_round_trip(tmp_path):
    t = _recorded(["a", "b"], ["p1", "p2"])
    path = tmp_path / "t.jsonl"
    t.save(path)
    loaded = Transcript.load(path)
    assert loaded.to_jsonl() == t.to_jsonl()
    replay = ReplayProvider(loaded)
    assert replay.chat([ChatMessage("user", "p1")], CFG)[0] == "a"
    assert replay.chat([ChatMessage("user", "p2")], CFG)[0] == "b"
    assert replay.consumed == 2


def test_replay_divergence_names_both_hashes():
    t = _recorded(["a"], ["p1"])
    replay = ReplayProvider(t)
    with pytest.raises(TranscriptDiverged) as info:
        replay.chat([ChatMessage("user", "something else")], CFG)
    assert info.value.index == 0
    assert info.value.expected == t.exchanges[0].request_hash
    assert info.value.expected != info.value.actual


def test_replay_config_change_diverges():
    t = _recorded(["a"], ["p1"])
    with pytest.raises(TranscriptDiverged):
        ReplayProvider(t).chat([ChatMessage("user", "p1")], ModelConfig(temperature=0.7))


def test_replay_exhausted():
    t = _recorded(["a"], ["p1"])
    replay = ReplayProvider(t)
    replay.chat([ChatMessage("user", "p1")], CFG)
    with pytest.raises(TranscriptExhausted):
        replay.chat([ChatMessage("user", "p1")], CFG)


def test_tampered_record_hash_rejected():
    t = _recorded(["a"], ["p1"])
    lines = t.to_jsonl().splitlines()
    rec = json.loads(lines[1])
    rec["request"]["messages"][0]["content"] = "edited"
    with pytest.raises(ValueError):
        Transcript.from_jsonl("\n".join([lines[0], json.dumps(rec)]))


@settings(max_examples=100, deadline=None)
@given(st.dictionaries(st.text(max_size=5), st.integers() | st.text(max_size=5), max_size=6))
def test_request_hash_ignores_key_order(d):
    reordered = dict(reversed(list(d.items())))
    assert request_hash({"x": d}) == request_hash({"x": reordered})


def test_scripted_items():
    boom = ProviderUnavailable("down")
    p = ScriptedProvider(["plain", {"text": "t", "usage": {"prompt": 5, "completion": 7}}, lambda m: m[-1].content.upper(), boom])
    assert p.chat(MSGS, CFG)[0] == "plain"
    assert p.chat(MSGS, CFG) == ("t", Usage(5, 7, 0.0))
    assert p.chat(MSGS, CFG)[0] == "HELLO THERE"
    with pytest.raises(ProviderUnavailable):
        p.chat(MSGS, CFG)
    with pytest.raises(TranscriptExhausted):
        p.chat(MSGS, CFG)


def test_complete_requires_messages():
    with pytest.raises(ValueError):
        complete(ScriptedProvider(["x"]), [], CFG)


def test_chat_message_validation():
    with pytest.raises(ValueError):
        ChatMessage("robot", "x")
    with pytest.raises(ValueError):
        ChatMessage("user", "")


# -- accounting --------------------------------------------------------------------------


def test_approx_tokens():
    assert approx_tokens("require(msg.sender == bank);") == 10
    assert approx_tokens("") == 0


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 10_000), st.integers(0, 10_000)), max_size=20))
def test_ledger_totals_equal_per_call_sums(usages):
    script = [{"text": "x", "usage": {"prompt": p, "completion": c}} for p, c in usages]
    provider = ScriptedProvider(script)
    ledger = UsageLedger()
    for _ in usages:
        complete(provider, MSGS, CFG, ledger)
    assert ledger.prompt_tokens == sum(p for p, _ in usages)
    assert ledger.completion_tokens == sum(c for _, c in usages)
    assert len(ledger.calls) == len(usages)


def test_cost_uses_shipped_price_profile():
    prices = PriceProfile.load()
    assert prices.prices["gpt-4-0613"] == (0.03, 0.06)
    ledger = UsageLedger(prices)
    ledger.record("gpt-4-0613", Usage(1000, 500))
    ledger.record("gpt-4-0613", Usage(2000, 0))
    assert ledger.estimated_cost == pytest.approx(3000 * 0.03 / 1000 + 500 * 0.06 / 1000)
    ledger.record("unknown-model", Usage(10_000, 10_000))
    assert ledger.estimated_cost == pytest.approx(0.12)


def test_price_profile_env_override(tmp_path, monkeypatch):
    path = tmp_path / "p.json"
    path.write_text(json.dumps({"profile": "cheap", "per_1k_tokens": {"m": {"prompt": 1, "completion": 2}}}))
    monkeypatch.setenv(PRICE_PROFILE_ENV, str(path))
    prices = PriceProfile.load()
    assert prices.name == "cheap"
    assert prices.cost("m", 1000, 1000) == 3.0


def test_ledger_rejects_negative_usage():
    with pytest.raises(ValueError):
        UsageLedger().record("m", Usage(-1, 0))


def test_request_payload_shape():
    payload = request_payload(MSGS, CFG)
    assert payload["config"]["model"] == CFG.model_name
    assert "context_window" not in payload["config"]
    assert Exchange(payload, "r", Usage()).request_hash == request_hash(payload)
