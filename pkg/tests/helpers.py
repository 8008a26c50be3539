from __future__ import annotations

import json
from pathlib import Path
from typing import Optional

from acrepair.solidity import SourceUnit, parse_source

FIXTURES = Path(__file__).parent / "fixtures"


def load_fixture(rel: str) -> SourceUnit:
    return parse_source(rel, (FIXTURES / rel).read_text(encoding="utf-8"))


def bench_case(case_id: str, manifest: str = "bench10.json", mode: Optional[str] = None):
    """(RepairCase, Transcript) for one case of a fixture manifest."""
    from acrepair.cli import BenchCase, load_units
    from acrepair.llm import Transcript
    from acrepair.repair import RepairCase

    data = json.loads((FIXTURES / manifest).read_text(encoding="utf-8"))
    [raw] = [c for c in data["cases"] if c["id"] == case_id]
    bc = BenchCase.from_dict(raw)
    units = load_units(bc.sources, FIXTURES)
    case = RepairCase(units, bc.function, bc.description, mode or bc.mode, bc.case_id)
    return case, Transcript.load(FIXTURES / bc.transcript)
