"""Prompt envelopes for the Q0-Q4 stages.

Every envelope has a natural-language part (the task) and a code-context part.
Builders are pure: the same case, taxonomy and graph give the same bytes.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

from ..llm.types import ChatMessage
from ..rbac.candidates import Candidate
from ..rbac.taxonomy import Taxonomy

PERSONA = "You are a smart contract security specialist."
VALIDATOR_PERSONA = "You are a smart contract auditor who reviews proposed security patches."
STAGES = ("Q0", "Q1", "Q2", "Q3", "Q4")
FEEDBACK_CATEGORIES = ("incorrectRole", "missingValidation", "logicConflict", "other")
FORMAT_REMINDER = "Reply with a single JSON object and nothing else, using exactly the keys requested above."


@dataclass(frozen=True)
class PromptEnvelope:
    stage: str
    nl_part: str
    cc_part: str
    history: tuple[ChatMessage, ...] = ()

    def __post_init__(self) -> None:
        if self.stage not in STAGES:
            raise ValueError(f"unknown stage {self.stage!r}")

    @property
    def content(self) -> str:
        if not self.cc_part:
            return self.nl_part
        return f"{self.nl_part}\n\n{self.cc_part}"

    def messages(self) -> list[ChatMessage]:
        return [*self.history, ChatMessage("user", self.content)]

    def with_reminder(self, reminder: str = FORMAT_REMINDER) -> "PromptEnvelope":
        return PromptEnvelope(self.stage, f"{self.nl_part}\n\n{reminder}", self.cc_part, self.history)


@dataclass(frozen=True)
class CodeContext:
    """Everything about the target the prompts show, precomputed once per case."""

    target: str  # Contract.function
    function_text: str
    description: str = ""
    inherited: tuple[str, ...] = ()
    callees: tuple[str, ...] = ()
    modifiers: tuple[tuple[str, str], ...] = ()  # (qualified name, source text)
    state_vars: tuple[tuple[str, str], ...] = ()
    functions: tuple[tuple[str, str], ...] = ()  # (qualified name, signature)
    pragma: str = ""
    candidates: tuple[Candidate, ...] = field(default_factory=tuple)


def _block(title: str, body: str) -> str:
    return f"### {title}\n{body.rstrip()}" if body.strip() else f"### {title}\n(none)"


def _code(text: str) -> str:
    return f"```solidity\n{text.rstrip()}\n```"


def _description(ctx: CodeContext) -> str:
    return ctx.description.strip() or "(no description provided)"


def build_q0(ctx: CodeContext, history: Sequence[ChatMessage] = ()) -> PromptEnvelope:
    nl = (
        f"{PERSONA} An external detector flagged the function {ctx.target} as possibly missing an "
        "access-control check. Decide whether the function really lets an unauthorized caller perform "
        "a privileged operation. A function that is intentionally public, or already restricted by a "
        "modifier or a require on the caller, is not vulnerable.\n"
        'Answer with JSON: {"vulnerable": true|false, "reason": "<one sentence>"}.'
    )
    cc = "\n\n".join(
        [
            _block("Flagged function", _code(ctx.function_text)),
            _block("Modifiers in scope", "\n".join(_code(t) for _, t in ctx.modifiers)),
            _block("Report", _description(ctx)),
        ]
    )
    return PromptEnvelope("Q0", nl, cc, tuple(history))


def build_q1(ctx: CodeContext, history: Sequence[ChatMessage] = ()) -> PromptEnvelope:
    names = "\n".join(f"- {c.kind} {c.contract}.{c.name}" for c in ctx.candidates)
    nl = (
        f"{PERSONA} We are going to repair an access-control vulnerability in {ctx.target} step by step. "
        "First, look at the code elements listed under 'Candidates' and decide which of them already "
        "implement role-based access control in this code base (owner or role variables, guard "
        "modifiers, role management functions). Only pick names from the candidate list.\n"
        'Answer with JSON: {"elements": ["<name>", ...], "reason": "<short explanation>"}.'
    )
    cc = "\n\n".join(
        [
            _block("(1) Vulnerable function", _code(ctx.function_text)),
            _block("(2) Modifiers", "\n".join(_code(t) for _, t in ctx.modifiers)),
            _block("(3) State variables", "\n".join(t for _, t in ctx.state_vars)),
            _block("(4) Inherited contracts", ", ".join(ctx.inherited)),
            _block("(5) Functions called by the vulnerable function", " -> ".join(ctx.callees)),
            _block("(6) Vulnerability description", _description(ctx)),
            _block("Candidates", names),
        ]
    )
    return PromptEnvelope("Q1", nl, cc, tuple(history))


def taxonomy_listing(taxonomy: Taxonomy) -> str:
    lines = []
    for e in taxonomy.sorted_entries():
        lines.append(f"- {e.role_category} | {e.permission_category}")
    return "\n".join(lines)


def build_q2(ctx: CodeContext, acg_text: str, taxonomy: Taxonomy, history: Sequence[ChatMessage] = ()) -> PromptEnvelope:
    nl = (
        f"{PERSONA} Using the access-control elements identified so far and the context graph below, "
        f"choose the role that should be allowed to call {ctx.target} and the permission that the call "
        "exercises. Pick one (role | permission) pair from the taxonomy. If none fits, propose a new "
        "pair in the same style and set is_new to true.\n"
        'Answer with JSON: {"role": "<role>", "permission": "<permission>", "is_new": true|false, '
        '"reason": "<short explanation>"}.'
    )
    cc = "\n\n".join(
        [
            _block(f"Role-permission taxonomy (version {taxonomy.version})", taxonomy_listing(taxonomy)),
            _block("Access-control context graph", acg_text),
            _block("Vulnerability description", _description(ctx)),
        ]
    )
    return PromptEnvelope("Q2", nl, cc, tuple(history))


def build_q3(
    ctx: CodeContext,
    pair: tuple[str, str],
    checks: Sequence[str],
    elements: Sequence[str],
    history: Sequence[ChatMessage] = (),
    feedback: Optional[str] = None,
) -> PromptEnvelope:
    role, permission = pair
    reuse = ", ".join(elements) if elements else "none were found"
    nl = (
        f"{PERSONA} Now write the patch for {ctx.target} so that only the role '{role}' can perform "
        f"'{permission}'. Existing access-control elements: {reuse}. Reuse or strengthen these "
        "before introducing anything new. If nothing suitable exists, add the smallest new modifier "
        "or require check, together with any state variable and constructor assignment it needs. "
        "Keep the function name, parameters, return values and behavior otherwise unchanged, and "
        f"stay compatible with the pragma ({ctx.pragma or 'none'}).\n"
        "Answer with JSON: {\"patch\": \"<the complete patched function>\", "
        "\"declarations\": \"<new contract-level declarations, or empty>\", "
        "\"replacements\": {\"<existing member name>\": \"<its full new text>\"}, "
        "\"mechanism\": \"reusedModifier|newModifier|inlineRequire\"}."
    )
    parts = [
        _block("Role-permission pair", f"{role} | {permission}"),
        _block("Examples of permission checks for this pair", "\n".join(f"- {c}" for c in checks)),
        _block("Function to patch", _code(ctx.function_text)),
    ]
    if feedback:
        parts.append(_block("Problems with the previous patch (fix all of them)", feedback))
    return PromptEnvelope("Q3", nl, "\n\n".join(parts), tuple(history))


def build_q4(
    ctx: CodeContext,
    acg_text: str,
    pair: tuple[str, str],
    patched_function: str,
    diff: str,
) -> PromptEnvelope:
    role, permission = pair
    nl = (
        f"{VALIDATOR_PERSONA} A generator proposed the patch below for an access-control vulnerability "
        f"in {ctx.target}, restricting '{permission}' to the role '{role}'. Accept it only if it both "
        "blocks unauthorized callers and keeps the original behavior for legitimate callers. Otherwise "
        "explain the problem and classify it as incorrectRole (wrong or overly strict role), "
        "missingValidation (some path is still unchecked), logicConflict (breaks existing logic) or other.\n"
        'Answer with JSON: {"verdict": "accept"|"reject", "reason": "<explanation>", '
        '"category": "incorrectRole|missingValidation|logicConflict|other"}.'
    )
    cc = "\n\n".join(
        [
            _block("Vulnerability description", _description(ctx)),
            _block("Access-control context graph", acg_text),
            _block("Patched function", _code(patched_function)),
            _block("Unified diff", f"```diff\n{diff.rstrip()}\n```"),
        ]
    )
    return PromptEnvelope("Q4", nl, cc, ())
