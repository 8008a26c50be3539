"""The curated role-permission taxonomy and its runtime extension."""
from __future__ import annotations

import copy
import json
import os
import re
import threading
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence, Union

from ..fsutil import atomic_write
from .normalize import default_synonyms, normalize_pair, validate_synonyms

SCHEMA_VERSION = 1
SHIPPED = "shipped"
RUNTIME = "runtimeAdded"
ROLE_GROUPS = (
    "Admin",
    "Owner of the contract",
    "Owner of funds/stakes/tokens",
    "Minter",
    "Loaner",
    "Borrower",
    "Vault/Bank",
    "Logger",
)
_MAX_NAME = 80
_BAD_CHARS = re.compile(r"[;{}<>`\\]|\n")


@dataclass
class TaxonomyEntry:
    role_category: str
    permission_category: str
    detailed_checks: list[str]
    provenance: str = SHIPPED
    added_at: Optional[str] = None

    @property
    def label(self) -> str:
        return f"{self.role_category}–{self.permission_category}"


@dataclass
class Taxonomy:
    entries: list[TaxonomyEntry]
    synonyms: dict[str, str] = field(default_factory=dict)
    version: int = 1
    schema_version: int = SCHEMA_VERSION

    # -- persistence -----------------------------------------------------------

    @classmethod
    def shipped(cls) -> "Taxonomy":
        text = resources.files("acrepair.rbac").joinpath("data/taxonomy.json").read_text(encoding="utf-8")
        return cls.from_json(text)

    @classmethod
    def load(cls, path: Union[str, os.PathLike, None] = None) -> "Taxonomy":
        if path is None:
            return cls.shipped()
        return cls.from_json(Path(path).read_text(encoding="utf-8"))

    @classmethod
    def from_json(cls, text: str) -> "Taxonomy":
        data = json.loads(text)
        if data.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported taxonomy schema {data.get('schema_version')!r}")
        synonyms = data.get("synonyms") or default_synonyms()
        validate_synonyms(synonyms)
        entries = [TaxonomyEntry(**e) for e in data["entries"]]
        return cls(entries, dict(synonyms), int(data.get("version", 1)), SCHEMA_VERSION)

    def to_json(self) -> str:
        data = {
            "schema_version": self.schema_version,
            "version": self.version,
            "synonyms": dict(sorted(self.synonyms.items())),
            "entries": [asdict(e) for e in self.sorted_entries()],
        }
        return json.dumps(data, indent=2, ensure_ascii=False) + "\n"

    def save(self, path: Union[str, os.PathLike]) -> None:
        atomic_write(Path(path), self.to_json())

    # -- queries ---------------------------------------------------------------

    def sorted_entries(self) -> list[TaxonomyEntry]:
        return sorted(self.entries, key=lambda e: (e.role_category, e.permission_category))

    def normalized(self, role: str, permission: str) -> tuple[str, str]:
        return normalize_pair(role, permission, self.synonyms)

    def find(self, role: str, permission: str) -> Optional[TaxonomyEntry]:
        key = self.normalized(role, permission)
        for e in self.entries:
            if self.normalized(e.role_category, e.permission_category) == key:
                return e
        return None

    def role_groups(self) -> list[str]:
        seen: list[str] = []
        for e in self.entries:
            if e.role_category not in seen:
                seen.append(e.role_category)
        return seen

    def canonical_role(self, role: str) -> str:
        """Display name of the existing role group matching ``role``, else ``role`` itself."""
        key = self.normalized(role, "x")[0]
        for group in self.role_groups():
            if self.normalized(group, "x")[0] == key:
                return group
        return role.strip()

    def checks_for(self, role: str, permission: str) -> list[str]:
        e = self.find(role, permission)
        return list(e.detailed_checks) if e else []

    def copy(self) -> "Taxonomy":
        return copy.deepcopy(self)

    def __len__(self) -> int:
        return len(self.entries)


# -- mutation ------------------------------------------------------------------

ADDED = "added"
DUPLICATE = "duplicate"
REJECTED = "rejected"


@dataclass(frozen=True)
class ProposalResult:
    status: str  # added | duplicate | rejected
    entry: Optional[TaxonomyEntry] = None  # the new entry, or the one it duplicates
    reason: str = ""

    @property
    def added(self) -> bool:
        return self.status == ADDED


def _reject_reason(role: str, permission: str, checks: Sequence[str], t: Taxonomy) -> Optional[str]:
    if not role.strip() or not permission.strip():
        return "empty"
    for label, text in (("role", role), ("permission", permission)):
        if len(text) > _MAX_NAME:
            return f"{label} longer than {_MAX_NAME} characters"
        if _BAD_CHARS.search(text):
            return f"{label} contains code-like characters"
    nrole, nperm = t.normalized(role, permission)
    if not nrole or not nperm:
        return "empty after normalization"
    if any(not isinstance(c, str) for c in checks):
        return "detailed checks must be text"
    return None


def propose_taxonomy_entry(
    t: Taxonomy,
    candidate: tuple[str, str],
    checks: Iterable[str] = (),
    now: Optional[str] = None,
) -> ProposalResult:
    """Add ``candidate`` unless it is malformed or already present under normalization."""
    role, permission = candidate
    checks = [c.strip() for c in checks if c and c.strip()]
    reason = _reject_reason(role, permission, checks, t)
    if reason:
        return ProposalResult(REJECTED, reason=reason)
    existing = t.find(role, permission)
    if existing is not None:
        return ProposalResult(DUPLICATE, existing)
    entry = TaxonomyEntry(
        role_category=t.canonical_role(role),
        permission_category=" ".join(permission.split()),
        detailed_checks=checks,
        provenance=RUNTIME,
        added_at=now or datetime.now(timezone.utc).replace(microsecond=0).isoformat(),
    )
    t.entries.append(entry)
    t.version += 1
    return ProposalResult(ADDED, entry)


KEEP = "keep"
MERGE = "merge"
DROP = "drop"


@dataclass(frozen=True)
class ReviewVerdict:
    action: str  # keep | merge | drop
    into: Optional[tuple[str, str]] = None  # (role, permission) of the merge target

    @classmethod
    def parse(cls, value) -> "ReviewVerdict":
        if isinstance(value, ReviewVerdict):
            return value
        if isinstance(value, str):
            return cls(value.strip().lower())
        if isinstance(value, dict):
            into = value.get("into")
            return cls(str(value.get("action", KEEP)).lower(), tuple(into) if into else None)
        raise ValueError(f"unrecognized verdict {value!r}")


ReviewCallback = Callable[[list[TaxonomyEntry]], Sequence]


def sanitize_taxonomy(t: Taxonomy, review: ReviewCallback) -> list[tuple[TaxonomyEntry, ReviewVerdict]]:
    """Ask ``review`` for one verdict per entry and apply them to runtime entries only.

    The review sees a snapshot; if it raises or returns malformed verdicts the
    taxonomy is left untouched and the error propagates.
    """
    snapshot = t.copy().entries
    raw = list(review(snapshot))
    if len(raw) != len(snapshot):
        raise ValueError(f"review returned {len(raw)} verdicts for {len(snapshot)} entries")
    verdicts = [ReviewVerdict.parse(v) for v in raw]
    for v in verdicts:
        if v.action not in (KEEP, MERGE, DROP):
            raise ValueError(f"unknown review action {v.action!r}")
        if v.action == MERGE and (v.into is None or t.find(*v.into) is None):
            raise ValueError(f"merge target {v.into!r} not in taxonomy")

    results: list[tuple[TaxonomyEntry, ReviewVerdict]] = []
    survivors: list[TaxonomyEntry] = []
    changed = False
    for entry, verdict in zip(t.entries, verdicts):
        if entry.provenance != RUNTIME:
            results.append((entry, ReviewVerdict(KEEP)))  # shipped entries are immutable
            survivors.append(entry)
            continue
        if verdict.action == MERGE and t.find(*verdict.into) is entry:
            verdict = ReviewVerdict(KEEP)
        results.append((entry, verdict))
        if verdict.action == KEEP:
            survivors.append(entry)
        else:
            changed = True
    if changed:
        t.entries = survivors
        t.version += 1
    return results


class TaxonomyStore:
    """Single-writer access to a taxonomy, optionally persisted after each change."""

    def __init__(self, taxonomy: Taxonomy, path: Union[str, os.PathLike, None] = None):
        self._taxonomy = taxonomy
        self._path = Path(path) if path else None
        self._lock = threading.Lock()

    @classmethod
    def open(cls, path: Union[str, os.PathLike, None]) -> "TaxonomyStore":
        if path is not None and Path(path).exists():
            return cls(Taxonomy.load(path), path)
        return cls(Taxonomy.shipped(), path)

    def snapshot(self) -> Taxonomy:
        with self._lock:
            return self._taxonomy.copy()

    def propose(self, candidate: tuple[str, str], checks: Iterable[str] = (), now: Optional[str] = None) -> ProposalResult:
        with self._lock:
            result = propose_taxonomy_entry(self._taxonomy, candidate, checks, now)
            if result.added and self._path is not None:
                self._taxonomy.save(self._path)
            return result

    def sanitize(self, review: ReviewCallback) -> list[tuple[TaxonomyEntry, ReviewVerdict]]:
        with self._lock:
            before = self._taxonomy.version
            results = sanitize_taxonomy(self._taxonomy, review)
            if self._taxonomy.version != before and self._path is not None:
                self._taxonomy.save(self._path)
            return results
