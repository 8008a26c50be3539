"""Messages, model configuration and usage accounting."""
from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

ROLES = ("system", "user", "assistant")
PRICE_PROFILE_ENV = "ACREPAIR_PRICE_PROFILE"
_TOKEN_RE = re.compile(r"\w+|[^\w\s]")


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str

    def __post_init__(self) -> None:
        if self.role not in ROLES:
            raise ValueError(f"unknown message role {self.role!r}")
        if not self.content:
            raise ValueError("message content must be nonempty")

    def to_dict(self) -> dict:
        return {"role": self.role, "content": self.content}

    @classmethod
    def from_dict(cls, d: dict) -> "ChatMessage":
        return cls(d["role"], d["content"])


@dataclass(frozen=True)
class ModelConfig:
    model_name: str = "gpt-4-0613"
    temperature: float = 0.0
    max_output_tokens: int = 4096
    response_format: str = "json"  # json | freeText
    context_window: int = 8192

    def to_dict(self) -> dict:
        # context_window is a local admission check, not part of the request
        return {
            "model": self.model_name,
            "temperature": self.temperature,
            "max_tokens": self.max_output_tokens,
            "response_format": self.response_format,
        }


def approx_tokens(text: str) -> int:
    """Offline token estimate: words and individual punctuation marks."""
    return len(_TOKEN_RE.findall(text))


@dataclass(frozen=True)
class Usage:
    prompt_tokens: int = 0
    completion_tokens: int = 0
    wall_time: float = 0.0
    estimated: bool = False

    @property
    def total_tokens(self) -> int:
        return self.prompt_tokens + self.completion_tokens

    @classmethod
    def approximate(cls, messages: list[ChatMessage], completion: str, wall_time: float = 0.0) -> "Usage":
        prompt = sum(approx_tokens(m.content) for m in messages)
        return cls(prompt, approx_tokens(completion), wall_time, estimated=True)


@dataclass(frozen=True)
class PriceProfile:
    """USD per 1,000 tokens, keyed by model name."""

    prices: dict[str, tuple[float, float]]
    name: str = "default"

    @classmethod
    def load(cls, path: Optional[str] = None) -> "PriceProfile":
        path = path or os.environ.get(PRICE_PROFILE_ENV)
        if path:
            text = Path(path).read_text(encoding="utf-8")
        else:
            text = resources.files("acrepair.llm").joinpath("data/prices.json").read_text(encoding="utf-8")
        data = json.loads(text)
        prices = {m: (float(p["prompt"]), float(p["completion"])) for m, p in data["per_1k_tokens"].items()}
        return cls(prices, data.get("profile", "custom"))

    def cost(self, model: str, prompt_tokens: float, completion_tokens: float) -> float:
        if model not in self.prices:
            return 0.0
        p, c = self.prices[model]
        return (prompt_tokens * p + completion_tokens * c) / 1000.0


@dataclass
class UsageLedger:
    """Per-session usage totals; never decreases."""

    prices: PriceProfile = field(default_factory=PriceProfile.load)
    calls: list[tuple[str, Usage]] = field(default_factory=list)

    def record(self, model: str, usage: Usage) -> None:
        if usage.prompt_tokens < 0 or usage.completion_tokens < 0 or usage.wall_time < 0:
            raise ValueError("usage must be non-negative")
        self.calls.append((model, usage))

    @property
    def prompt_tokens(self) -> int:
        return sum(u.prompt_tokens for _, u in self.calls)

    @property
    def completion_tokens(self) -> int:
        return sum(u.completion_tokens for _, u in self.calls)

    @property
    def wall_time(self) -> float:
        return sum(u.wall_time for _, u in self.calls)

    def totals_by_model(self) -> dict[str, tuple[int, int]]:
        out: dict[str, tuple[int, int]] = {}
        for model, u in self.calls:
            p, c = out.get(model, (0, 0))
            out[model] = (p + u.prompt_tokens, c + u.completion_tokens)
        return out

    @property
    def estimated_cost(self) -> float:
        return sum(self.prices.cost(m, p, c) for m, (p, c) in sorted(self.totals_by_model().items()))

    def to_dict(self, include_time: bool = True) -> dict:
        d = {
            "calls": len(self.calls),
            "promptTokens": self.prompt_tokens,
            "completionTokens": self.completion_tokens,
            "estimatedCostUSD": round(self.estimated_cost, 6),
            "priceProfile": self.prices.name,
        }
        if include_time:
            d["wallTimeSeconds"] = round(self.wall_time, 3)
        return d
