"""The Q0-Q4 repair pipeline and the generator/validator debate loop."""
from __future__ import annotations

import logging
import re
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional, Sequence

from ..acg.builder import build_acg
from ..acg.serialize import DEFAULT_TOKEN_BUDGET, TRUNCATED_MARKER, estimate_tokens, serialize_acg
from ..analysis.callgraph import CallGraph, build_call_graph
from ..analysis.program import Program
from ..errors import (
    AcRepairError,
    ContextOverflow,
    DebateAborted,
    GenerationFailed,
    PairUnresolved,
    ProviderUnavailable,
    TranscriptDiverged,
    Unparseable,
    UsageError,
)
from ..gate.rules import ValidationReport, validate
from ..llm.parsing import parse_structured
from ..llm.providers import Provider, RecordingProvider, complete
from ..llm.transcript import Transcript
from ..llm.types import ChatMessage, ModelConfig, UsageLedger, approx_tokens
from ..patching import (
    Patch,
    PatchError,
    assemble_patch,
    classify_mechanism,
    unified_diff,
)
from ..rbac.candidates import candidate_rbac_elements
from ..rbac.taxonomy import Taxonomy, TaxonomyStore
from ..solidity.model import FunctionDef, ModifierDef, SourceUnit, StateVarDef
from ..solidity.parser import parse_source
from .prompts import (
    FEEDBACK_CATEGORIES,
    CodeContext,
    PromptEnvelope,
    build_q0,
    build_q1,
    build_q2,
    build_q3,
    build_q4,
)
from .report import ACCEPTED, EXHAUSTED, FAILURE, SKIPPED, STATIC_REJECTED, CaseReport

log = logging.getLogger(__name__)

CONFIRMED_INPUT = "confirmedInput"
COPILOT = "copilot"
VULNERABLE = "Vulnerable"
NOT_VULNERABLE = "NotVulnerable"
MAX_MAD_ROUNDS = 3
MAX_STATIC_LOOPS = 2
Q0_RETRIES = 2
_NEGATIVE = re.compile(r"(no|false|safe)\s*($|[.,;:!-])|not[\s_-]*vulnerable\b|(false|safe)\b")
_POSITIVE = re.compile(r"(yes|true)\s*($|[.,;:!-])|(vulnerable|true)\b")
_FENCE_RE = re.compile(r"```[A-Za-z0-9_-]*[ \t]*\n(.*?)```", re.DOTALL)


@dataclass
class RepairCase:
    units: list[SourceUnit]
    f_vul_name: str
    description: str = ""
    mode: str = CONFIRMED_INPUT
    case_id: str = ""

    def __post_init__(self) -> None:
        if self.mode not in (CONFIRMED_INPUT, COPILOT):
            raise UsageError(f"unknown mode {self.mode!r}")
        if not self.case_id:
            self.case_id = self.f_vul_name

    def target(self, program: Optional[Program] = None) -> FunctionDef:
        program = program or Program(self.units)
        found = [fn for fn in program.find_function(self.f_vul_name) if fn.kind != "modifier"]
        if len(found) != 1:
            what = "no function" if not found else f"{len(found)} functions"
            raise UsageError(f"{self.f_vul_name} resolves to {what}; use Contract.function")
        return found[0]


@dataclass
class Session:
    """One generator conversation: provider, ledger and session memory."""

    provider: Provider
    cfg: ModelConfig = field(default_factory=ModelConfig)
    ledger: UsageLedger = field(default_factory=UsageLedger)
    history: list[ChatMessage] = field(default_factory=list)
    prompts: list[PromptEnvelope] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def ask(self, env: PromptEnvelope, agent: str = "generator", remember: bool = True) -> str:
        messages = env.messages()
        needed = sum(approx_tokens(m.content) for m in messages)
        if needed > self.cfg.context_window:
            raise ContextOverflow(
                f"{env.stage} prompt needs about {needed} tokens; context window is {self.cfg.context_window}"
            )
        self.prompts.append(env)
        text, _ = complete(self.provider, messages, self.cfg, self.ledger, env.stage, agent)
        if remember:
            self.history.append(ChatMessage("user", env.content))
            self.history.append(ChatMessage("assistant", text if text.strip() else "(empty response)"))
        return text

    def warn(self, message: str) -> None:
        log.warning(message)
        self.warnings.append(message)


# -- context -------------------------------------------------------------------------


def build_context(case: RepairCase, program: Program, cg: CallGraph, fn: FunctionDef) -> CodeContext:
    unit = program.unit_for(fn)
    assert unit is not None
    lineage = [c for c in program.lineage(fn.contract) if c in program.contracts]
    modifiers = []
    state_vars = []
    for cname in lineage:
        c = program.contracts[cname]
        owner = program.unit_of[cname]
        modifiers += [(m.qualname, owner.text(m.span)) for m in c.modifiers]
        state_vars += [(v.qualname, owner.text(v.span)) for v in c.state_vars]
    candidates = tuple(c for c in candidate_rbac_elements(program) if c.contract in lineage)
    functions = tuple(
        (f"{c.contract}.{c.name}", c.name) for c in candidates if c.kind == "function"
    )
    callees = tuple(cg.transitive_callees(fn.qualname, include_modifiers=False))
    return CodeContext(
        target=f"{fn.contract}.{fn.name}",
        function_text=unit.text(fn.span),
        description=case.description,
        inherited=tuple(program.ancestors(fn.contract)),
        callees=callees,
        modifiers=tuple(modifiers),
        state_vars=tuple(state_vars),
        functions=functions,
        pragma=unit.pragma.raw_pragma if unit.pragma else "",
        candidates=candidates,
    )


# -- Q0 ------------------------------------------------------------------------------


def _yes_no(value) -> Optional[bool]:
    if isinstance(value, bool):
        return value
    if isinstance(value, str):
        word = value.strip().lower().strip("\"'`*")
        # a bare yes/no only counts when it stands alone, so "no idea" stays undecided
        if _NEGATIVE.match(word):
            return False
        if _POSITIVE.match(word):
            return True
    return None


def parse_q0(text: str) -> Optional[str]:
    try:
        value = parse_structured(text)
    except Unparseable:
        value = None
    verdict = None
    if isinstance(value, dict):
        for key in ("vulnerable", "is_vulnerable", "isVulnerable", "verdict", "answer"):
            if key in value:
                verdict = _yes_no(value[key])
                break
    if verdict is None and value is None:
        verdict = _yes_no(text or "")
    if verdict is None:
        return None
    return VULNERABLE if verdict else NOT_VULNERABLE


def run_q0(session: Session, ctx: CodeContext) -> str:
    for attempt in range(Q0_RETRIES + 1):
        env = build_q0(ctx, session.history)
        text = session.ask(env if attempt == 0 else env.with_reminder())
        verdict = parse_q0(text)
        if verdict is not None:
            return verdict
    session.warn("Q0 answer unparseable after retries; treating the function as vulnerable")
    return VULNERABLE


# -- Q1 ------------------------------------------------------------------------------


def _element_names(value) -> Optional[list[str]]:
    if isinstance(value, dict):
        for key in ("elements", "rbac_elements", "names", "rbac"):
            if key in value:
                value = value[key]
                break
        else:
            return None
    if isinstance(value, str):
        value = [v for v in re.split(r"[,\n]", value) if v.strip()]
    if not isinstance(value, list):
        return None
    out = []
    for item in value:
        if isinstance(item, dict):
            item = item.get("name", "")
        name = str(item).strip().strip("`'\"- ")
        name = name.split()[-1] if name.split() else ""
        out.append(name.rsplit(".", 1)[-1].rstrip("()"))
    return [n for n in out if n]


def run_q1(session: Session, ctx: CodeContext) -> list[str]:
    if not ctx.candidates:
        return []
    offered = [c.name for c in ctx.candidates]
    for attempt in range(2):
        env = build_q1(ctx, session.history)
        text = session.ask(env if attempt == 0 else env.with_reminder())
        try:
            names = _element_names(parse_structured(text))
        except Unparseable:
            names = None
        if names is None:
            continue
        unknown = sorted(set(names) - set(offered))
        if unknown:
            session.warn(f"Q1 named unknown elements, dropped: {', '.join(unknown)}")
        chosen = set(names) & set(offered)
        return [n for n in dict.fromkeys(offered) if n in chosen]
    session.warn("Q1 answer unparseable; continuing without identified RBAC elements")
    return []


# -- Q2 ------------------------------------------------------------------------------


def _pair_from(value) -> Optional[tuple[str, str, bool, list[str]]]:
    if not isinstance(value, dict):
        return None
    role = value.get("role")
    perm = value.get("permission")
    if not isinstance(role, str) or not isinstance(perm, str) or not role.strip() or not perm.strip():
        return None
    flag = value.get("is_new", value.get("isNew", False))
    is_new = _yes_no(flag) if not isinstance(flag, bool) else flag
    checks = value.get("checks") or value.get("detailed_checks") or []
    if not isinstance(checks, list):
        checks = [str(checks)]
    return role.strip(), perm.strip(), bool(is_new), [str(c) for c in checks]


def run_q2(session: Session, ctx: CodeContext, acg_text: str, store: TaxonomyStore) -> tuple[str, str, bool]:
    problem = "no answer"
    for attempt in range(2):
        taxonomy = store.snapshot()
        env = build_q2(ctx, acg_text, taxonomy, session.history)
        text = session.ask(env if attempt == 0 else env.with_reminder())
        try:
            parsed = _pair_from(parse_structured(text))
        except Unparseable:
            parsed = None
        if parsed is None:
            problem = "no role-permission pair in the answer"
            continue
        role, perm, _claimed_new, checks = parsed
        entry = taxonomy.find(role, perm)
        if entry is not None:
            return entry.role_category, entry.permission_category, False
        result = store.propose((role, perm), checks)
        if result.status == "rejected":
            problem = f"proposed pair rejected: {result.reason}"
            continue
        assert result.entry is not None
        return result.entry.role_category, result.entry.permission_category, result.added
    raise PairUnresolved(problem)


# -- Q3 ------------------------------------------------------------------------------


def _strip_fences(text: str) -> str:
    m = _FENCE_RE.search(text if text.endswith("\n") else text + "\n")
    return m.group(1) if m else text


def _snippet_members(text: str):
    unit = parse_source("<patch>", text)
    members = []
    for c in unit.contracts:
        for m in [*c.functions, *c.modifiers, *c.state_vars, *c.types]:
            members.append((m.span.start, m))
    members.sort(key=lambda x: x[0])
    return unit, [m for _, m in members]


def patch_from_response(
    text: str,
    case: RepairCase,
    program: Program,
    fn: FunctionDef,
    pair: tuple[str, str],
) -> Patch:
    try:
        value = parse_structured(text)
    except Unparseable:
        value = {"patch": text}
    if isinstance(value, list) and value and isinstance(value[0], dict):
        value = value[0]
    if not isinstance(value, dict) or not isinstance(value.get("patch"), str) or not value["patch"].strip():
        raise Unparseable("answer carries no patch text")
    snippet_unit, members = _snippet_members(_strip_fences(value["patch"]))
    functions = [m for m in members if isinstance(m, FunctionDef)]
    target = next((f for f in functions if f.name == fn.name and f.kind == fn.kind), None)
    if target is None and len(functions) == 1:
        target = functions[0]
    if target is None:
        raise Unparseable("patch text contains no function definition")

    unit = program.unit_for(fn)
    contract = program.contracts[fn.contract]
    declarations: list[str] = []
    replacements: dict[str, str] = {}
    for m in members:
        if m is target:
            continue
        member_text = snippet_unit.text(m.span)
        name = "constructor" if isinstance(m, FunctionDef) and m.kind == "constructor" else m.name
        existing = None
        if isinstance(m, FunctionDef):
            existing = next((f for f in contract.functions if (f.kind == "constructor" and name == "constructor") or f.name == name), None)
        elif isinstance(m, StateVarDef):
            existing = contract.state_var(m.name)
        elif isinstance(m, ModifierDef):
            existing = contract.modifier(m.name)
        elif any(t.name == m.name for t in contract.types):
            continue  # events, errors and structs that already exist stay as they are
        if existing is None:
            declarations.append(member_text)
        elif " ".join(unit.text(existing.span).split()) != " ".join(member_text.split()):
            replacements[name] = member_text
    extra = value.get("declarations")
    if isinstance(extra, str) and extra.strip():
        declarations.append(_strip_fences(extra).strip())
    extra_repl = value.get("replacements")
    if isinstance(extra_repl, dict):
        for name, body in extra_repl.items():
            if isinstance(body, str) and body.strip():
                replacements[str(name)] = _strip_fences(body).strip()

    function_text = snippet_unit.text(target.span)
    full = assemble_patch(unit, fn, function_text, "\n\n".join(declarations), replacements)
    patched_unit = parse_source(unit.path, full)
    patched_contract = patched_unit.contract(fn.contract)
    patched_fn = None
    if patched_contract is not None:
        patched_fn = next((f for f in patched_contract.functions if f.name == target.name and f.kind == target.kind), None)
    existing_modifiers = [m.name for cname in program.lineage(fn.contract) if cname in program.contracts for m in program.contracts[cname].modifiers]
    mechanism, mechanism_name = classify_mechanism(fn, patched_fn, existing_modifiers)
    return Patch(
        target=f"{fn.contract}.{fn.name}" if fn.ordinal == 0 else fn.qualname,
        path=unit.path,
        pair_used=pair,
        mechanism=mechanism,
        mechanism_name=mechanism_name,
        patched_function_text=function_text,
        original_source=unit.raw,
        full_patched_source=full,
        unified_diff=unified_diff(unit.raw, full, unit.path),
        declarations="\n\n".join(declarations),
        replacements=replacements,
    )


def run_q3(
    session: Session,
    case: RepairCase,
    program: Program,
    fn: FunctionDef,
    ctx: CodeContext,
    pair: tuple[str, str],
    checks: Sequence[str],
    elements: Sequence[str],
    feedback: Optional[str] = None,
) -> Patch:
    problem = ""
    for attempt in range(2):
        env = build_q3(ctx, pair, checks, elements, session.history, feedback)
        text = session.ask(env if attempt == 0 else env.with_reminder())
        try:
            return patch_from_response(text, case, program, fn, pair)
        except (Unparseable, PatchError) as exc:
            problem = str(exc)
    raise GenerationFailed(f"no usable patch after 2 attempts: {problem}")


def static_feedback(report: ValidationReport) -> str:
    return "The patch failed these static checks:\n" + report.feedback()


def generate_checked(
    session: Session,
    case: RepairCase,
    program: Program,
    fn: FunctionDef,
    ctx: CodeContext,
    pair: tuple[str, str],
    checks: Sequence[str],
    elements: Sequence[str],
    feedback: Optional[str] = None,
) -> tuple[Patch, ValidationReport, int]:
    """Q3 followed by up to two static-repair loops; returns (patch, report, loops used)."""
    patch = run_q3(session, case, program, fn, ctx, pair, checks, elements, feedback)
    report = validate(patch, case.units)
    loops = 0
    while not report.overall_pass and loops < MAX_STATIC_LOOPS:
        loops += 1
        patch = run_q3(session, case, program, fn, ctx, pair, checks, elements, static_feedback(report))
        report = validate(patch, case.units)
    return patch, report, loops


# -- Q4 / debate ---------------------------------------------------------------------


@dataclass(frozen=True)
class ValidatorFeedback:
    reason: str
    category: str

    def to_dict(self) -> dict:
        return {"reason": self.reason, "category": self.category}


@dataclass
class DebateState:
    round: int = 0
    candidate_patch: Optional[Patch] = None
    validator_feedback: list[ValidatorFeedback] = field(default_factory=list)
    outcome: Optional[str] = None
    validation: Optional[ValidationReport] = None
    log: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "round": self.round,
            "outcome": self.outcome,
            "validatorFeedback": [f.to_dict() for f in self.validator_feedback],
            "log": list(self.log),
        }


def _category(value) -> str:
    text = str(value or "").strip()
    for c in FEEDBACK_CATEGORIES:
        if text.lower().replace(" ", "").replace("_", "") == c.lower():
            return c
    return "other"


def parse_q4(text: str) -> Optional[tuple[bool, ValidatorFeedback]]:
    try:
        value = parse_structured(text)
    except Unparseable:
        return None
    if not isinstance(value, dict):
        return None
    raw = value.get("verdict", value.get("decision", value.get("accept")))
    if isinstance(raw, bool):
        accepted = raw
    elif isinstance(raw, str) and raw.strip().lower() in ("accept", "accepted", "approve", "approved", "yes", "pass"):
        accepted = True
    elif isinstance(raw, str) and raw.strip().lower() in ("reject", "rejected", "no", "fail", "revise"):
        accepted = False
    else:
        return None
    reason = str(value.get("reason", value.get("feedback", ""))).strip()
    return accepted, ValidatorFeedback(reason, _category(value.get("category")))


def review(session: Session, ctx: CodeContext, acg_text: str, pair: tuple[str, str], patch: Patch) -> tuple[bool, ValidatorFeedback]:
    env = build_q4(ctx, acg_text, pair, patch.patched_function_text, patch.unified_diff)
    for attempt in range(2):
        text = session.ask(env if attempt == 0 else env.with_reminder(), agent="validator", remember=False)
        parsed = parse_q4(text)
        if parsed is not None:
            return parsed
    session.warn("validator answer unparseable; counting it as a rejection")
    return False, ValidatorFeedback("validator answer could not be parsed", "other")


def run_mad_loop(
    session: Session,
    case: RepairCase,
    program: Program,
    fn: FunctionDef,
    ctx: CodeContext,
    acg_text: str,
    pair: tuple[str, str],
    checks: Sequence[str],
    elements: Sequence[str],
    patch0: Patch,
    report0: Optional[ValidationReport] = None,
) -> DebateState:
    """Validator reviews, generator refines; at most three re-attempts."""
    report0 = report0 or validate(patch0, case.units)
    if not report0.overall_pass:
        raise ValueError("the debate starts from a statically valid patch")
    state = DebateState(candidate_patch=patch0, validation=report0)
    needs_review = True
    feedback = ""
    try:
        while True:
            if needs_review:
                accepted, fb = review(session, ctx, acg_text, pair, state.candidate_patch)
                state.log.append({"round": state.round, "step": "review", "accepted": accepted, **fb.to_dict()})
                if accepted:
                    state.outcome = ACCEPTED
                    return state
                state.validator_feedback.append(fb)
                feedback = f"The reviewer rejected the previous patch ({fb.category}): {fb.reason}"
            if state.round >= MAX_MAD_ROUNDS:
                state.outcome = EXHAUSTED
                return state
            state.round += 1
            patch, report, loops = generate_checked(session, case, program, fn, ctx, pair, checks, elements, feedback)
            state.log.append({"round": state.round, "step": "generate", "staticLoops": loops, "staticPass": report.overall_pass})
            if report.overall_pass:
                state.candidate_patch = patch
                state.validation = report
                needs_review = True
            else:
                feedback = static_feedback(report)
                needs_review = False
    except (ProviderUnavailable, TranscriptDiverged) as exc:
        raise DebateAborted(f"provider failed during round {state.round}: {exc}", state) from exc


# -- whole case ----------------------------------------------------------------------


Confirm = Callable[[str], bool]


@contextmanager
def _stage(report: CaseReport, name: str, clock: Callable[[], float]) -> Iterator[None]:
    start = clock()
    report.failed_stage = name
    try:
        yield
    finally:
        report.durations[name] = report.durations.get(name, 0.0) + (clock() - start)


def run_case(
    case: RepairCase,
    provider: Provider,
    store: Optional[TaxonomyStore] = None,
    cfg: Optional[ModelConfig] = None,
    token_budget: Optional[int] = DEFAULT_TOKEN_BUDGET,
    confirm: Optional[Confirm] = None,
    transcript: Optional[Transcript] = None,
    ledger: Optional[UsageLedger] = None,
    clock: Callable[[], float] = time.monotonic,
) -> CaseReport:
    """Q0 (copilot only), Q1, ACG, Q2, Q3 with static checks, then the debate.

    Always returns a report; stage errors become ``outcome=Failure``.
    """
    if transcript is not None:
        provider = RecordingProvider(provider, transcript)
    session = Session(provider, cfg or ModelConfig(), ledger or UsageLedger())
    store = store or TaxonomyStore(Taxonomy.shipped())
    report = CaseReport(case.case_id, case.f_vul_name, case.mode)
    try:
        with _stage(report, "setup", clock):
            program = Program(case.units)
            fn = case.target(program)
            report.target = f"{fn.contract}.{fn.name}"
            cg = build_call_graph(program)
            ctx = build_context(case, program, cg, fn)
        if case.mode == COPILOT:
            with _stage(report, "Q0", clock):
                verdict = run_q0(session, ctx)
                report.q0_verdict = verdict
                proceed = confirm(verdict) if confirm is not None else verdict == VULNERABLE
            if not proceed:
                report.outcome = SKIPPED
                report.failed_stage = None
                return report
        with _stage(report, "Q1", clock):
            elements = run_q1(session, ctx)
            report.rbac_elements = elements
        with _stage(report, "ACG", clock):
            graph = build_acg(fn, cg=cg, rbac_seeds=elements, program=program)
            acg_text = serialize_acg(graph, token_budget)
            report.acg_summary = {
                "nodes": len(graph.nodes),
                "edges": len(graph.edges),
                "tokens": estimate_tokens(acg_text),
                "truncated": TRUNCATED_MARKER in acg_text,
            }
        with _stage(report, "Q2", clock):
            role, perm, is_new = run_q2(session, ctx, acg_text, store)
            report.pair_used = (role, perm)
            report.pair_is_new = is_new
            checks = store.snapshot().checks_for(role, perm)
        with _stage(report, "Q3", clock):
            patch, validation, _ = generate_checked(session, case, program, fn, ctx, (role, perm), checks, elements)
            report.patch = patch
            report.validation = validation.to_dict()
            if not validation.overall_pass:
                report.outcome = STATIC_REJECTED
                report.failed_stage = None
                return report
        with _stage(report, "Q4", clock):
            state = run_mad_loop(
                session, case, program, fn, ctx, acg_text, (role, perm), checks, elements, patch, validation
            )
            report.patch = state.candidate_patch
            report.validation = state.validation.to_dict() if state.validation else None
            report.debate = state.to_dict()
            report.outcome = state.outcome or FAILURE
        report.failed_stage = None
    except DebateAborted as exc:
        report.outcome = FAILURE
        report.error = str(exc)
        report.error_type = type(exc).__name__
        if exc.state is not None:
            report.debate = exc.state.to_dict()
    except AcRepairError as exc:
        report.outcome = FAILURE
        report.error = str(exc)
        report.error_type = type(exc).__name__
    finally:
        report.usage = session.ledger.to_dict()
        report.warnings = list(session.warnings)
    return report
