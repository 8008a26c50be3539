"""Role-permission mining, the curated taxonomy and RBAC candidate extraction."""
from __future__ import annotations

from .candidates import Candidate, candidate_rbac_elements
from .mining import MiningStats, RolePermissionPair, extract_pairs, mine_corpus, mining_stats
from .normalize import normalize_name, normalize_pair
from .taxonomy import (
    ProposalResult,
    ReviewVerdict,
    Taxonomy,
    TaxonomyEntry,
    TaxonomyStore,
    propose_taxonomy_entry,
    sanitize_taxonomy,
)

__all__ = [
    "Candidate", "candidate_rbac_elements", "MiningStats", "RolePermissionPair", "extract_pairs",
    "mine_corpus", "mining_stats", "normalize_name", "normalize_pair", "ProposalResult", "ReviewVerdict",
    "Taxonomy", "TaxonomyEntry", "TaxonomyStore", "propose_taxonomy_entry", "sanitize_taxonomy",
]
