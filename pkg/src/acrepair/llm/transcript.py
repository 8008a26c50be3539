"""Recorded model exchanges, stored as JSON lines.

The first line is a header (``caseId``, ``provider``, free-form ``inputs``);
every following line is one exchange carrying the canonical request hash.
"""
from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

from ..fsutil import atomic_write
from .types import ChatMessage, ModelConfig, Usage

SCHEMA = 1


def canonical_json(value) -> str:
    return json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def request_payload(messages: list[ChatMessage], cfg: ModelConfig) -> dict:
    return {"messages": [m.to_dict() for m in messages], "config": cfg.to_dict()}


def request_hash(payload: dict) -> str:
    return hashlib.sha256(canonical_json(payload).encode("utf-8")).hexdigest()


@dataclass
class Exchange:
    request: dict
    response: str
    usage: Usage
    stage: str = ""
    agent: str = ""

    @property
    def request_hash(self) -> str:
        return request_hash(self.request)

    def to_record(self, index: int) -> dict:
        return {
            "type": "exchange",
            "index": index,
            "stage": self.stage,
            "agent": self.agent,
            "requestHash": self.request_hash,
            "request": self.request,
            "response": self.response,
            "usage": {"promptTokens": self.usage.prompt_tokens, "completionTokens": self.usage.completion_tokens},
        }

    @classmethod
    def from_record(cls, rec: dict) -> "Exchange":
        u = rec.get("usage") or {}
        usage = Usage(int(u.get("promptTokens", 0)), int(u.get("completionTokens", 0)))
        ex = cls(rec["request"], rec["response"], usage, rec.get("stage", ""), rec.get("agent", ""))
        stored = rec.get("requestHash")
        if stored and stored != ex.request_hash:
            raise ValueError(f"exchange {rec.get('index')} hash does not match its request")
        return ex


@dataclass
class Transcript:
    case_id: str = ""
    provider: str = ""
    inputs: dict = field(default_factory=dict)
    exchanges: list[Exchange] = field(default_factory=list)

    def to_jsonl(self) -> str:
        header = {"type": "header", "schema": SCHEMA, "caseId": self.case_id, "provider": self.provider, "inputs": self.inputs}
        lines = [canonical_json(header)]
        lines += [canonical_json(ex.to_record(i)) for i, ex in enumerate(self.exchanges)]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> "Transcript":
        t = cls()
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip():
                continue
            rec = json.loads(line)
            if rec.get("type") == "header":
                t.case_id = rec.get("caseId", "")
                t.provider = rec.get("provider", "")
                t.inputs = rec.get("inputs", {})
            elif rec.get("type") == "exchange":
                t.exchanges.append(Exchange.from_record(rec))
            else:
                raise ValueError(f"line {lineno}: unknown record type {rec.get('type')!r}")
        return t

    @classmethod
    def load(cls, path: Union[str, os.PathLike]) -> "Transcript":
        return cls.from_jsonl(Path(path).read_text(encoding="utf-8"))

    def save(self, path: Union[str, os.PathLike]) -> None:
        atomic_write(Path(path), self.to_jsonl())

    def responses(self) -> list[str]:
        return [ex.response for ex in self.exchanges]
