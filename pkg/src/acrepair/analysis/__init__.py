"""Call graph, program dependency graph and def-use analyses."""
from __future__ import annotations

from .callgraph import CallEdge, CallGraph, ExternalSink, build_call_graph, is_call_site
from .defuse import DefUseChain, def_use_chains, direct_state_vars, state_vars_touched
from .pdg import Pdg, PdgNode, build_pdg
from .program import Program

__all__ = [
    "CallEdge", "CallGraph", "ExternalSink", "build_call_graph", "is_call_site", "DefUseChain",
    "def_use_chains", "direct_state_vars", "state_vars_touched", "Pdg", "PdgNode", "build_pdg", "Program",
]
