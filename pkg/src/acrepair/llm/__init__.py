"""Provider abstraction, transcripts, usage accounting and response parsing."""
from __future__ import annotations

from .parsing import parse_structured
from .providers import (
    API_KEY_ENV,
    ENDPOINT_ENV,
    LiveProvider,
    Provider,
    RecordingProvider,
    ReplayProvider,
    ScriptedProvider,
    complete,
)
from .transcript import Exchange, Transcript, canonical_json, request_hash, request_payload
from .types import ChatMessage, ModelConfig, PriceProfile, Usage, UsageLedger, approx_tokens

__all__ = [
    "parse_structured", "API_KEY_ENV", "ENDPOINT_ENV", "LiveProvider", "Provider", "RecordingProvider",
    "ReplayProvider", "ScriptedProvider", "complete", "Exchange", "Transcript", "canonical_json",
    "request_hash", "request_payload", "ChatMessage", "ModelConfig", "PriceProfile", "Usage", "UsageLedger",
    "approx_tokens",
]
