"""Model providers: live HTTP client, transcript replay, scripted mock, recorder.

Every provider exposes ``name`` and ``chat(messages, cfg, stage, agent)``
returning ``(text, Usage)``.  :func:`complete` is the single entry point the
pipeline uses; it records usage into the caller's ledger.

Live wire contract (chat-completion style)::

    POST {endpoint}/chat/completions
    Authorization: Bearer {key}
    {"model": ..., "messages": [{"role", "content"}...], "temperature": ..., "max_tokens": ...}
    -> {"choices": [{"message": {"content": "..."}}],
        "usage": {"prompt_tokens": n, "completion_tokens": m}}
"""
from __future__ import annotations

import os
import threading
import time
from typing import Callable, Optional, Protocol, Sequence, Union

import httpx

from ..errors import ProviderUnavailable, TranscriptDiverged, TranscriptExhausted
from .transcript import Exchange, Transcript, request_hash, request_payload
from .types import ChatMessage, ModelConfig, Usage, UsageLedger

ENDPOINT_ENV = "ACREPAIR_LLM_ENDPOINT"
API_KEY_ENV = "ACREPAIR_LLM_API_KEY"
MAX_RETRIES = 3
_TRANSIENT_STATUS = {408, 429, 500, 502, 503, 504}


class Provider(Protocol):
    name: str

    def chat(self, messages: list[ChatMessage], cfg: ModelConfig, stage: str = "", agent: str = "") -> tuple[str, Usage]:
        ...


def complete(
    provider: Provider,
    messages: Sequence[ChatMessage],
    cfg: ModelConfig,
    ledger: Optional[UsageLedger] = None,
    stage: str = "",
    agent: str = "",
) -> tuple[str, Usage]:
    messages = list(messages)
    if not messages:
        raise ValueError("at least one message is required")
    text, usage = provider.chat(messages, cfg, stage, agent)
    if ledger is not None:
        ledger.record(cfg.model_name, usage)
    return text, usage


class LiveProvider:
    """HTTPS chat-completion client with bounded retries on transient failures."""

    name = "live"

    def __init__(
        self,
        endpoint: Optional[str] = None,
        api_key: Optional[str] = None,
        client: Optional[httpx.Client] = None,
        sleep: Callable[[float], None] = time.sleep,
        backoff: float = 1.0,
        timeout: float = 120.0,
        send_response_format: bool = False,
    ):
        self.endpoint = (endpoint or os.environ.get(ENDPOINT_ENV) or "").rstrip("/")
        self.api_key = api_key or os.environ.get(API_KEY_ENV) or ""
        if not self.endpoint or not self.api_key:
            raise ProviderUnavailable(f"live provider needs {ENDPOINT_ENV} and {API_KEY_ENV}")
        self._client = client or httpx.Client(timeout=timeout)
        self._sleep = sleep
        self._backoff = backoff
        self._send_response_format = send_response_format

    def _body(self, messages: list[ChatMessage], cfg: ModelConfig) -> dict:
        body = {
            "model": cfg.model_name,
            "messages": [m.to_dict() for m in messages],
            "temperature": cfg.temperature,
            "max_tokens": cfg.max_output_tokens,
        }
        if self._send_response_format and cfg.response_format == "json":
            body["response_format"] = {"type": "json_object"}
        return body

    def chat(self, messages: list[ChatMessage], cfg: ModelConfig, stage: str = "", agent: str = "") -> tuple[str, Usage]:
        body = self._body(messages, cfg)
        headers = {"Authorization": f"Bearer {self.api_key}"}
        last_error = "no attempt made"
        for attempt in range(MAX_RETRIES + 1):
            if attempt:
                self._sleep(self._backoff * 2 ** (attempt - 1))
            started = time.monotonic()
            try:
                resp = self._client.post(f"{self.endpoint}/chat/completions", json=body, headers=headers)
            except httpx.TransportError as exc:
                last_error = f"transport error: {exc}"
                continue
            if resp.status_code in _TRANSIENT_STATUS:
                last_error = f"HTTP {resp.status_code}"
                continue
            if resp.status_code >= 400:
                raise ProviderUnavailable(f"HTTP {resp.status_code}: {resp.text[:200]}")
            elapsed = time.monotonic() - started
            try:
                data = resp.json()
                text = data["choices"][0]["message"]["content"] or ""
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise ProviderUnavailable(f"malformed completion response: {exc}") from exc
            u = data.get("usage") or {}
            if "prompt_tokens" in u and "completion_tokens" in u:
                usage = Usage(int(u["prompt_tokens"]), int(u["completion_tokens"]), elapsed)
            else:
                usage = Usage.approximate(messages, text, elapsed)
            return text, usage
        raise ProviderUnavailable(f"giving up after {MAX_RETRIES} retries: {last_error}")


class ReplayProvider:
    """Returns recorded responses in order, failing loudly on any request mismatch."""

    name = "replay"

    def __init__(self, transcript: Transcript):
        self.transcript = transcript
        self._next = 0
        self._lock = threading.Lock()

    @property
    def consumed(self) -> int:
        return self._next

    def chat(self, messages: list[ChatMessage], cfg: ModelConfig, stage: str = "", agent: str = "") -> tuple[str, Usage]:
        actual = request_hash(request_payload(messages, cfg))
        with self._lock:
            index = self._next
            if index >= len(self.transcript.exchanges):
                raise TranscriptExhausted(f"transcript has only {index} exchanges; request {actual} has no recording")
            ex = self.transcript.exchanges[index]
            if ex.request_hash != actual:
                raise TranscriptDiverged(ex.request_hash, actual, index)
            self._next += 1
        return ex.response, ex.usage


ScriptItem = Union[str, dict, BaseException, Callable[[list[ChatMessage]], str]]


class ScriptedProvider:
    """Deterministic mock answering from a fixed script.

    Items are response strings, ``{"text": ..., "usage": {"prompt": n, "completion": m}}``
    dicts, exceptions (raised when reached) or callables taking the messages.
    """

    name = "mock"

    def __init__(self, script: Sequence[ScriptItem]):
        self._script = list(script)
        self._next = 0
        self._lock = threading.Lock()
        self.requests: list[list[ChatMessage]] = []

    def chat(self, messages: list[ChatMessage], cfg: ModelConfig, stage: str = "", agent: str = "") -> tuple[str, Usage]:
        with self._lock:
            if self._next >= len(self._script):
                raise TranscriptExhausted(f"script exhausted after {self._next} responses")
            item = self._script[self._next]
            self._next += 1
            self.requests.append(list(messages))
        if isinstance(item, BaseException):
            raise item
        if callable(item):
            item = item(messages)
        if isinstance(item, dict):
            text = item["text"]
            u = item.get("usage")
            if u is not None:
                return text, Usage(int(u["prompt"]), int(u["completion"]), float(u.get("wall_time", 0.0)))
            return text, Usage.approximate(messages, text)
        return item, Usage.approximate(messages, item)


class RecordingProvider:
    """Wraps another provider and appends every exchange to a transcript."""

    def __init__(self, inner: Provider, transcript: Transcript):
        self.inner = inner
        self.transcript = transcript
        self.name = inner.name
        self._lock = threading.Lock()

    def chat(self, messages: list[ChatMessage], cfg: ModelConfig, stage: str = "", agent: str = "") -> tuple[str, Usage]:
        text, usage = self.inner.chat(messages, cfg, stage, agent)
        with self._lock:
            self.transcript.exchanges.append(Exchange(request_payload(messages, cfg), text, usage, stage, agent))
        return text, usage
