"""Static validity checks applied to generated patches."""
from __future__ import annotations

from .features import Feature, feature_table, features_used
from .rules import (
    DEF_USE,
    INFEASIBLE_INVOCATION,
    MISUSED_TYPES,
    MSG_SENDER_CHECK,
    RULES,
    SOLIDITY_VERSION,
    STRUCTURAL_COMPAT,
    UNDEFINED_TOKENS,
    Finding,
    InvocationSets,
    RuleVerdict,
    TokenSets,
    ValidationReport,
    check_def_use,
    check_infeasible_invocations,
    check_misused_types,
    check_msg_sender,
    check_solidity_version,
    check_structural_compat,
    check_undefined_tokens,
    invocation_sets,
    token_sets,
    validate,
)
from .subject import PatchSubject, build_subject

__all__ = [
    "Feature", "feature_table", "features_used", "DEF_USE", "INFEASIBLE_INVOCATION", "MISUSED_TYPES",
    "MSG_SENDER_CHECK", "RULES", "SOLIDITY_VERSION", "STRUCTURAL_COMPAT", "UNDEFINED_TOKENS", "Finding",
    "InvocationSets", "RuleVerdict", "TokenSets", "ValidationReport", "check_def_use",
    "check_infeasible_invocations", "check_misused_types", "check_msg_sender", "check_solidity_version",
    "check_structural_compat", "check_undefined_tokens", "invocation_sets", "token_sets", "validate",
    "PatchSubject", "build_subject",
]
