"""Command-line entry points: repair, mine, taxonomy, replay and bench."""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence, TextIO

from .acg.serialize import DEFAULT_TOKEN_BUDGET
from .errors import AcRepairError, CorpusUnreadable, MissingInput, UsageError
from .fsutil import atomic_write
from .llm.providers import LiveProvider, Provider, ReplayProvider, ScriptedProvider
from .llm.transcript import Transcript
from .llm.types import UsageLedger
from .patching import PatchError, apply_unified_diff
from .rbac.mining import mine_corpus, mining_report
from .rbac.normalize import normalize_pair
from .rbac.taxonomy import Taxonomy, TaxonomyStore
from .repair.orchestrator import COPILOT, CONFIRMED_INPUT, VULNERABLE, RepairCase, run_case
from .repair.report import (
    ACCEPTED,
    EXHAUSTED,
    EXIT_FAILURE,
    EXIT_MISSING_INPUT,
    EXIT_OK,
    EXIT_PROVIDER,
    EXIT_USAGE,
    CaseReport,
    exit_code,
    safe_case_id,
    write_artifacts,
)
from .solidity.model import SourceUnit
from .solidity.parser import parse_source

log = logging.getLogger("acrepair")

COMMANDS = ("repair", "mine", "taxonomy", "replay", "bench")
PROVIDERS = ("live", "replay", "mock")
DEFAULT_OUT = "acrepair-out"


@dataclass
class RunConfig:
    command: str
    input_paths: list[str] = field(default_factory=list)
    f_vul_name: Optional[str] = None
    description: str = ""
    provider_name: str = "live"
    mode: str = CONFIRMED_INPUT
    taxonomy_path: Optional[str] = None
    transcript_path: Optional[str] = None
    token_budget: Optional[int] = DEFAULT_TOKEN_BUDGET
    interactive: bool = False
    assume_yes: bool = False
    jobs: int = 1
    out_dir: str = DEFAULT_OUT

    def __post_init__(self) -> None:
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}")
        if self.provider_name not in PROVIDERS:
            raise UsageError(f"unknown provider {self.provider_name!r}")
        if self.command == "repair" and not self.f_vul_name and not self.interactive:
            raise UsageError("repair needs --function (or an interactive terminal to pick one)")
        if self.command == "replay" and not self.transcript_path:
            raise UsageError("replay needs --transcript")
        if self.provider_name in ("replay", "mock") and self.command == "repair" and not self.transcript_path:
            raise UsageError(f"--provider {self.provider_name} needs --transcript")
        if self.jobs < 1:
            raise UsageError("--jobs must be at least 1")


# -- inputs --------------------------------------------------------------------------


def load_units(paths: Sequence[str], base: Optional[Path] = None) -> list[SourceUnit]:
    """Parse the given ``.sol`` files, expanding directories; unit paths stay as given."""
    units = []
    for raw in paths:
        p = Path(raw)
        if base is not None and not p.is_absolute():
            p = base / p
        if p.is_dir():
            files = sorted(p.rglob("*.sol"))
            if not files:
                raise MissingInput(f"no .sol files under {raw}")
            for f in files:
                units.append(parse_source(str(Path(raw) / f.relative_to(p)), f.read_bytes()))
        elif p.is_file():
            units.append(parse_source(raw, p.read_bytes()))
        else:
            raise MissingInput(f"no such file: {raw}")
    if not units:
        raise UsageError("no input files")
    return units


def case_id_for(paths: Sequence[str], function: str) -> str:
    digest = hashlib.sha256("\0".join([*paths, function]).encode("utf-8")).hexdigest()[:8]
    stem = Path(paths[0]).stem if paths else "case"
    return safe_case_id(f"{stem}_{function}_{digest}")


def make_provider(name: str, transcript_path: Optional[str]) -> Provider:
    if name == "live":
        return LiveProvider()
    if transcript_path is None:
        raise UsageError(f"--provider {name} needs --transcript")
    if not Path(transcript_path).is_file():
        raise MissingInput(f"no such transcript: {transcript_path}")
    transcript = Transcript.load(transcript_path)
    if name == "replay":
        return ReplayProvider(transcript)
    # mock: answers in recorded order without checking request hashes
    return ScriptedProvider([{"text": ex.response, "usage": {"prompt": ex.usage.prompt_tokens, "completion": ex.usage.completion_tokens}} for ex in transcript.exchanges])


# -- repair --------------------------------------------------------------------------


def _pick_function(units: list[SourceUnit], stdin: TextIO, stdout: TextIO) -> str:
    names = [fn.qualname for u in units for c in u.contracts for fn in c.functions if fn.kind == "function"]
    if not names:
        raise UsageError("no functions to repair")
    for i, name in enumerate(names, 1):
        print(f"  {i}. {name}", file=stdout)
    print("Function to repair (number): ", end="", file=stdout, flush=True)
    answer = stdin.readline().strip()
    if not answer.isdigit() or not 1 <= int(answer) <= len(names):
        raise UsageError(f"invalid selection {answer!r}")
    return names[int(answer) - 1]


def _confirm(cfg: RunConfig, stdin: TextIO, stdout: TextIO) -> Callable[[str], bool]:
    def confirm(verdict: str) -> bool:
        default = verdict == VULNERABLE
        print(f"Q0 verdict: {verdict}", file=stdout)
        if cfg.assume_yes or not cfg.interactive:
            return default
        hint = "Y/n" if default else "y/N"
        print(f"Proceed with the repair? [{hint}] ", end="", file=stdout, flush=True)
        answer = stdin.readline().strip().lower()
        return default if not answer else answer.startswith("y")

    return confirm


def run_repair_case(
    case: RepairCase,
    provider: Provider,
    out_dir: Path,
    store: Optional[TaxonomyStore] = None,
    token_budget: Optional[int] = DEFAULT_TOKEN_BUDGET,
    confirm: Optional[Callable[[str], bool]] = None,
    inputs: Optional[dict] = None,
    ledger: Optional[UsageLedger] = None,
) -> CaseReport:
    """Run one case and write its report, diff, patched source and transcript."""
    transcript = Transcript(case.case_id, getattr(provider, "name", ""), inputs or {})
    report = run_case(
        case, provider, store=store, token_budget=token_budget, confirm=confirm,
        transcript=transcript, ledger=ledger,
    )
    write_artifacts(report, out_dir)
    transcript.save(out_dir / "transcript.jsonl")
    return report


def _case_inputs(cfg: RunConfig, function: str) -> dict:
    return {
        "sources": list(cfg.input_paths),
        "function": function,
        "description": cfg.description,
        "mode": cfg.mode,
        "tokenBudget": cfg.token_budget,
    }


def cmd_repair(cfg: RunConfig, stdin: TextIO = sys.stdin, stdout: TextIO = sys.stdout) -> int:
    units = load_units(cfg.input_paths)
    function = cfg.f_vul_name or _pick_function(units, stdin, stdout)
    case_id = case_id_for(cfg.input_paths, function)
    case = RepairCase(units, function, cfg.description, cfg.mode, case_id)
    case.target()  # usage errors surface before any model call
    provider = make_provider(cfg.provider_name, cfg.transcript_path)
    store = TaxonomyStore.open(cfg.taxonomy_path)
    out = Path(cfg.out_dir) / case_id
    report = run_repair_case(
        case, provider, out, store, cfg.token_budget, _confirm(cfg, stdin, stdout), _case_inputs(cfg, function)
    )
    _summarize(report, out, stdout)
    return exit_code(report)


def _summarize(report: CaseReport, out: Path, stdout: TextIO) -> None:
    pair = " | ".join(report.pair_used) if report.pair_used else "-"
    print(f"{report.case_id}: {report.outcome} (pair: {pair})", file=stdout)
    if report.error:
        print(f"  {report.error_type}: {report.error}", file=stdout)
    print(f"  artifacts: {out}", file=stdout)


def cmd_replay(cfg: RunConfig, stdin: TextIO = sys.stdin, stdout: TextIO = sys.stdout) -> int:
    """Re-run the case recorded in a transcript header against its recorded responses."""
    path = Path(cfg.transcript_path or "")
    if not path.is_file():
        raise MissingInput(f"no such transcript: {path}")
    transcript = Transcript.load(path)
    inputs = transcript.inputs
    sources = cfg.input_paths or inputs.get("sources") or []
    function = cfg.f_vul_name or inputs.get("function")
    if not sources or not function:
        raise UsageError("transcript header lacks sources or function; pass them explicitly")
    # recorded source paths are relative to the transcript's sourceRoot
    base = None if cfg.input_paths else path.parent / inputs.get("sourceRoot", ".")
    units = load_units(sources, base)
    case_id = transcript.case_id or case_id_for(sources, function)
    mode = inputs.get("mode", cfg.mode)
    case = RepairCase(units, function, inputs.get("description", cfg.description), mode, case_id)
    budget = inputs.get("tokenBudget", cfg.token_budget)
    out = Path(cfg.out_dir) / safe_case_id(case_id)
    report = run_repair_case(
        case, ReplayProvider(transcript), out, TaxonomyStore.open(cfg.taxonomy_path), budget,
        _confirm(cfg, stdin, stdout), dict(inputs),
    )
    _summarize(report, out, stdout)
    return exit_code(report)


# -- mine / taxonomy -----------------------------------------------------------------


def cmd_mine(cfg: RunConfig, top_k: int = 10, stdout: TextIO = sys.stdout) -> int:
    if len(cfg.input_paths) != 1:
        raise UsageError("mine takes exactly one corpus directory")
    root = Path(cfg.input_paths[0])
    if not root.exists():
        raise MissingInput(f"no such directory: {root}")
    taxonomy = Taxonomy.load(cfg.taxonomy_path) if cfg.taxonomy_path else Taxonomy.shipped()
    ranked, stats = mine_corpus(root, top_k, taxonomy.synonyms, taxonomy)
    report = mining_report(ranked, stats)
    out = Path(cfg.out_dir) / "mine" / safe_case_id(root.resolve().name or "corpus") / "mining.json"
    atomic_write(out, json.dumps(report, indent=2, sort_keys=True) + "\n")
    for p in ranked[:top_k]:
        print(f"{p.occurrence_count:5d}  {p.role} | {p.permission}", file=stdout)
    print(f"{stats.total_pairs} occurrences, {stats.unique_pairs} distinct pairs, "
          f"top-{stats.k} coverage {stats.top_k_coverage:.2%}", file=stdout)
    print(f"  report: {out}", file=stdout)
    return EXIT_OK


def cmd_taxonomy(cfg: RunConfig, action: str, args: argparse.Namespace, stdout: TextIO = sys.stdout) -> int:
    store = TaxonomyStore.open(cfg.taxonomy_path)
    if action == "show":
        t = store.snapshot()
        for e in t.sorted_entries():
            print(f"{e.role_category} | {e.permission_category} [{e.provenance}]", file=stdout)
        print(f"{len(t)} entries, version {t.version}", file=stdout)
        return EXIT_OK
    if action == "export":
        text = store.snapshot().to_json()
        if args.output:
            atomic_write(Path(args.output), text)
        else:
            stdout.write(text)
        return EXIT_OK
    if action == "add":
        if not cfg.taxonomy_path:
            raise UsageError("taxonomy add needs --taxonomy to persist the entry")
        result = store.propose((args.role, args.permission), args.check or [])
        print(f"{result.status}: {args.role} | {args.permission}" + (f" ({result.reason})" if result.reason else ""), file=stdout)
        return EXIT_OK if result.status != "rejected" else EXIT_FAILURE
    raise UsageError(f"unknown taxonomy action {action!r}")


# -- bench ---------------------------------------------------------------------------


@dataclass
class BenchCase:
    case_id: str
    sources: list[str]
    function: str
    description: str = ""
    mode: str = CONFIRMED_INPUT
    transcript: Optional[str] = None
    expected_pair: Optional[tuple[str, str]] = None
    golden_diff: Optional[str] = None

    @classmethod
    def from_dict(cls, d: dict) -> "BenchCase":
        pair = d.get("expectedPair")
        return cls(
            case_id=d["id"],
            sources=list(d["sources"]),
            function=d["function"],
            description=d.get("description", ""),
            mode=d.get("mode", CONFIRMED_INPUT),
            transcript=d.get("transcript"),
            expected_pair=tuple(pair) if pair else None,
            golden_diff=d.get("goldenDiff"),
        )


@dataclass
class CaseScore:
    case_id: str
    outcome: str
    generated: bool
    pair_match: Optional[bool]
    diff_match: Optional[bool]
    success: bool
    error: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "caseId": self.case_id,
            "outcome": self.outcome,
            "generated": self.generated,
            "pairMatch": self.pair_match,
            "diffMatch": self.diff_match,
            "success": self.success,
            "error": self.error,
        }


@dataclass
class BenchResult:
    per_case: list[CaseScore]

    @property
    def rate_gen(self) -> float:
        return sum(c.generated for c in self.per_case) / len(self.per_case) if self.per_case else 0.0

    @property
    def rate_success(self) -> float:
        return sum(c.success for c in self.per_case) / len(self.per_case) if self.per_case else 0.0

    def to_dict(self) -> dict:
        return {
            "cases": len(self.per_case),
            "generated": sum(c.generated for c in self.per_case),
            "successful": sum(c.success for c in self.per_case),
            "rateGen": self.rate_gen,
            "rateSuccess": self.rate_success,
            "perCase": [c.to_dict() for c in self.per_case],
        }


def _tokens(text: str) -> list[str]:
    return text.split()


def pair_matches(expected: tuple[str, str], actual: Optional[Sequence[str]], taxonomy: Taxonomy) -> bool:
    if not actual:
        return False
    return normalize_pair(*expected, taxonomy.synonyms) == normalize_pair(actual[0], actual[1], taxonomy.synonyms)


def diff_matches(golden_diff: str, report: CaseReport) -> bool:
    """The golden fix and ours yield the same source up to whitespace."""
    if report.patch is None:
        return False
    try:
        expected = apply_unified_diff(report.patch.original_source, golden_diff)
    except PatchError:
        return False
    return _tokens(expected) == _tokens(report.patch.full_patched_source)


def score_case(bc: BenchCase, report: CaseReport, taxonomy: Taxonomy, golden_text: Optional[str]) -> CaseScore:
    generated = report.outcome in (ACCEPTED, EXHAUSTED) and report.patch is not None
    pair_ok = pair_matches(bc.expected_pair, report.pair_used, taxonomy) if bc.expected_pair else None
    diff_ok = diff_matches(golden_text, report) if golden_text is not None else None
    success = generated and pair_ok is not False and diff_ok is not False
    return CaseScore(bc.case_id, report.outcome, generated, pair_ok, diff_ok, success, report.error)


def run_bench(
    cases: Sequence[BenchCase],
    base: Path,
    provider_name: str,
    out_dir: Path,
    taxonomy: Taxonomy,
    jobs: int = 1,
    token_budget: Optional[int] = DEFAULT_TOKEN_BUDGET,
) -> BenchResult:
    def one(bc: BenchCase) -> CaseScore:
        case_out = out_dir / safe_case_id(bc.case_id)
        try:
            units = load_units(bc.sources, base)
            transcript = str(base / bc.transcript) if bc.transcript else None
            provider = make_provider(provider_name, transcript)
            case = RepairCase(units, bc.function, bc.description, bc.mode, bc.case_id)
            # each case sees the same starting taxonomy so results do not depend on scheduling
            store = TaxonomyStore(taxonomy.copy())
            inputs = {"sources": bc.sources, "function": bc.function, "description": bc.description, "mode": bc.mode}
            report = run_repair_case(case, provider, case_out, store, token_budget, None, inputs)
        except AcRepairError as exc:
            return CaseScore(bc.case_id, "Failure", False, None, None, False, f"{type(exc).__name__}: {exc}")
        golden = (base / bc.golden_diff).read_text(encoding="utf-8") if bc.golden_diff else None
        return score_case(bc, report, taxonomy, golden)

    with ThreadPoolExecutor(max_workers=jobs) as pool:
        scores = list(pool.map(one, cases))
    return BenchResult(scores)


def load_manifest(path: Path) -> list[BenchCase]:
    if not path.is_file():
        raise MissingInput(f"no such bench manifest: {path}")
    data = json.loads(path.read_text(encoding="utf-8"))
    return [BenchCase.from_dict(d) for d in data["cases"]]


def cmd_bench(cfg: RunConfig, stdout: TextIO = sys.stdout) -> int:
    if len(cfg.input_paths) != 1:
        raise UsageError("bench takes exactly one manifest file")
    manifest = Path(cfg.input_paths[0])
    cases = load_manifest(manifest)
    taxonomy = Taxonomy.load(cfg.taxonomy_path) if cfg.taxonomy_path else Taxonomy.shipped()
    out = Path(cfg.out_dir) / "bench" / safe_case_id(manifest.stem)
    result = run_bench(cases, manifest.parent, cfg.provider_name, out, taxonomy, cfg.jobs, cfg.token_budget)
    atomic_write(out / "bench.json", json.dumps(result.to_dict(), indent=2, sort_keys=True) + "\n")
    for c in result.per_case:
        print(f"{c.case_id}: {c.outcome} generated={c.generated} success={c.success}", file=stdout)
    print(f"rateGen={result.rate_gen:.4f} rateSuccess={result.rate_success:.4f}", file=stdout)
    print(f"  report: {out / 'bench.json'}", file=stdout)
    return EXIT_OK


# -- argument parsing ----------------------------------------------------------------


def _budget(text: str) -> Optional[int]:
    if text.lower() in ("none", "off", "0"):
        return None
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError("token budget must be positive")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--provider", choices=PROVIDERS, default="live")
    common.add_argument("--transcript", help="transcript file (JSON lines) for replay and mock providers")
    common.add_argument("--taxonomy", help="taxonomy JSON; created on first extension if missing")
    common.add_argument("--token-budget", type=_budget, default=DEFAULT_TOKEN_BUDGET,
                        help="ACG token budget; 'none' disables truncation")
    common.add_argument("--out", default=DEFAULT_OUT, help="output root directory")
    common.add_argument("--jobs", type=int, default=1)
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="acrepair", description="Access-control repair for Solidity contracts.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("repair", parents=[common], help="repair one vulnerable function")
    r.add_argument("sources", nargs="+", help=".sol files or directories")
    r.add_argument("--function", dest="function", help="Contract.function to repair")
    r.add_argument("--description", default="", help="vulnerability description from the report")
    r.add_argument("--copilot", action="store_true", help="confirm the report with Q0 first")
    r.add_argument("--yes", action="store_true", help="accept the Q0 verdict without asking")

    m = sub.add_parser("mine", parents=[common], help="mine role-permission pairs from a corpus")
    m.add_argument("corpus")
    m.add_argument("--top-k", type=int, default=10)

    t = sub.add_parser("taxonomy", parents=[common], help="show, export or extend the taxonomy")
    t.add_argument("action", choices=("show", "export", "add"))
    t.add_argument("role", nargs="?")
    t.add_argument("permission", nargs="?")
    t.add_argument("--check", action="append", help="detailed permission check (repeatable)")
    t.add_argument("--output", help="export destination")

    rp = sub.add_parser("replay", parents=[common], help="re-run a recorded case from its transcript")
    rp.add_argument("sources", nargs="*", help="override the sources named in the transcript")
    rp.add_argument("--function", dest="function")
    rp.add_argument("--yes", action="store_true")

    b = sub.add_parser("bench", parents=[common], help="score a benchmark manifest")
    b.add_argument("manifest")
    return p


def config_from_args(args: argparse.Namespace, interactive: bool) -> RunConfig:
    inputs = {
        "repair": lambda: list(args.sources),
        "mine": lambda: [args.corpus],
        "taxonomy": lambda: [],
        "replay": lambda: list(args.sources),
        "bench": lambda: [args.manifest],
    }[args.command]()
    provider = args.provider
    if args.command == "replay":
        provider = "replay"
    return RunConfig(
        command=args.command,
        input_paths=inputs,
        f_vul_name=getattr(args, "function", None),
        description=getattr(args, "description", ""),
        provider_name=provider,
        mode=COPILOT if getattr(args, "copilot", False) else CONFIRMED_INPUT,
        taxonomy_path=args.taxonomy,
        transcript_path=args.transcript,
        token_budget=args.token_budget,
        interactive=interactive,
        assume_yes=getattr(args, "yes", False),
        jobs=args.jobs,
        out_dir=args.out,
    )


def main(argv: Optional[Sequence[str]] = None, stdin: TextIO = sys.stdin, stdout: TextIO = sys.stdout) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    interactive = stdin.isatty() if hasattr(stdin, "isatty") else False
    try:
        cfg = config_from_args(args, interactive)
        if cfg.command == "repair":
            return cmd_repair(cfg, stdin, stdout)
        if cfg.command == "replay":
            return cmd_replay(cfg, stdin, stdout)
        if cfg.command == "mine":
            return cmd_mine(cfg, args.top_k, stdout)
        if cfg.command == "taxonomy":
            if args.action == "add" and (not args.role or not args.permission):
                raise UsageError("taxonomy add needs ROLE and PERMISSION")
            return cmd_taxonomy(cfg, args.action, args, stdout)
        return cmd_bench(cfg, stdout)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (MissingInput, CorpusUnreadable, FileNotFoundError) as exc:
        print(f"missing input: {exc}", file=sys.stderr)
        return EXIT_MISSING_INPUT
    except AcRepairError as exc:
        code = EXIT_PROVIDER if exit_code(_error_report(exc)) == EXIT_PROVIDER else EXIT_FAILURE
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return code


def _error_report(exc: Exception) -> CaseReport:
    return CaseReport("", "", "", error=str(exc), error_type=type(exc).__name__)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
