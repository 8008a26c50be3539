"""Repair orchestration: prompts, the Q0-Q4 pipeline, the debate loop and reports."""
from __future__ import annotations

from .orchestrator import (
    CONFIRMED_INPUT,
    COPILOT,
    MAX_MAD_ROUNDS,
    MAX_STATIC_LOOPS,
    NOT_VULNERABLE,
    VULNERABLE,
    DebateState,
    RepairCase,
    Session,
    ValidatorFeedback,
    build_context,
    generate_checked,
    parse_q0,
    parse_q4,
    patch_from_response,
    run_case,
    run_mad_loop,
    run_q0,
    run_q1,
    run_q2,
    run_q3,
)
from .prompts import FEEDBACK_CATEGORIES, CodeContext, PromptEnvelope
from .report import (
    ACCEPTED,
    EXHAUSTED,
    FAILURE,
    OUTCOMES,
    SKIPPED,
    STATIC_REJECTED,
    CaseReport,
    exit_code,
    write_artifacts,
)

__all__ = [
    "CONFIRMED_INPUT", "COPILOT", "MAX_MAD_ROUNDS", "MAX_STATIC_LOOPS", "NOT_VULNERABLE", "VULNERABLE",
    "DebateState", "RepairCase", "Session", "ValidatorFeedback", "build_context", "generate_checked",
    "parse_q0", "parse_q4", "patch_from_response", "run_case", "run_mad_loop", "run_q0", "run_q1",
    "run_q2", "run_q3", "FEEDBACK_CATEGORIES", "CodeContext", "PromptEnvelope", "ACCEPTED", "EXHAUSTED",
    "FAILURE", "OUTCOMES", "SKIPPED", "STATIC_REJECTED", "CaseReport", "exit_code", "write_artifacts",
]
