"""Per-case report and the artifact files written for it."""
from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

from ..errors import (
    DebateAborted,
    MissingInput,
    ProviderUnavailable,
    TranscriptDiverged,
    UsageError,
)
from ..fsutil import atomic_write
from ..patching import Patch

ACCEPTED = "Accepted"
EXHAUSTED = "ExhaustedKeptLast"
STATIC_REJECTED = "StaticRejected"
SKIPPED = "Skipped"
FAILURE = "Failure"
OUTCOMES = (ACCEPTED, EXHAUSTED, STATIC_REJECTED, SKIPPED, FAILURE)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_STATIC_REJECT = 2
EXIT_USAGE = 64
EXIT_MISSING_INPUT = 66
EXIT_PROVIDER = 70

_PROVIDER_ERRORS = {c.__name__ for c in (ProviderUnavailable, TranscriptDiverged, DebateAborted)} | {"TranscriptExhausted"}


@dataclass
class CaseReport:
    case_id: str
    target: str
    mode: str
    outcome: str = FAILURE
    failed_stage: Optional[str] = None
    error: Optional[str] = None
    error_type: Optional[str] = None
    q0_verdict: Optional[str] = None
    rbac_elements: list[str] = field(default_factory=list)
    pair_used: Optional[tuple[str, str]] = None
    pair_is_new: bool = False
    acg_summary: dict = field(default_factory=dict)
    debate: Optional[dict] = None
    validation: Optional[dict] = None
    patch: Optional[Patch] = None
    usage: dict = field(default_factory=dict)
    durations: dict[str, float] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    @property
    def succeeded(self) -> bool:
        return self.outcome in (ACCEPTED, EXHAUSTED)

    def to_dict(self, include_timing: bool = True) -> dict:
        d = {
            "caseId": self.case_id,
            "target": self.target,
            "mode": self.mode,
            "outcome": self.outcome,
            "failedStage": self.failed_stage,
            "error": self.error,
            "errorType": self.error_type,
            "q0Verdict": self.q0_verdict,
            "rbacElements": list(self.rbac_elements),
            "pairUsed": list(self.pair_used) if self.pair_used else None,
            "pairIsNew": self.pair_is_new,
            "acgSummary": self.acg_summary,
            "debate": self.debate,
            "validation": self.validation,
            "patch": self.patch.to_dict() if self.patch else None,
            "usage": dict(self.usage),
            "warnings": list(self.warnings),
        }
        if include_timing:
            d["durations"] = {k: round(v, 4) for k, v in self.durations.items()}
        else:
            d["usage"].pop("wallTimeSeconds", None)
        return d

    def to_json(self, include_timing: bool = True) -> str:
        return json.dumps(self.to_dict(include_timing), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def exit_code(report: CaseReport) -> int:
    if report.outcome in (ACCEPTED, EXHAUSTED, SKIPPED):
        return EXIT_OK
    if report.outcome == STATIC_REJECTED:
        return EXIT_STATIC_REJECT
    if report.error_type in _PROVIDER_ERRORS:
        return EXIT_PROVIDER
    if report.error_type == UsageError.__name__:
        return EXIT_USAGE
    if report.error_type == MissingInput.__name__:
        return EXIT_MISSING_INPUT
    return EXIT_FAILURE


def safe_case_id(text: str) -> str:
    cleaned = re.sub(r"[^A-Za-z0-9._-]+", "_", text).strip("._")
    return cleaned or "case"


def write_artifacts(report: CaseReport, out_dir: Union[str, os.PathLike]) -> dict[str, Path]:
    """Write report.json, and when a patch exists patch.diff and the patched source."""
    out = Path(out_dir)
    written: dict[str, Path] = {}
    report_path = out / "report.json"
    atomic_write(report_path, report.to_json())
    written["report"] = report_path
    if report.patch is not None:
        diff_path = out / "patch.diff"
        atomic_write(diff_path, report.patch.unified_diff)
        written["diff"] = diff_path
        src_path = out / ("patched_" + Path(report.patch.path).name)
        atomic_write(src_path, report.patch.full_patched_source)
        written["patched"] = src_path
    return written
