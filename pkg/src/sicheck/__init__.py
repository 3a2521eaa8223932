"""Static detection and symbolic confirmation of state-inconsistency bugs
(reentrancy, transaction-order dependence, suicidal contracts, unprotected
Ether withdrawal) in a contract-language subset.

Two phases: an over-approximating *explore* pass derives a storage
dependency graph from Datalog-style facts and pattern-matches hazardous
access pairs; a *refine* pass symbolically evaluates each counter-example
subgraph under value-summary (or havoc) boundary constraints to confirm or
refute it.
"""

from .driver import AnalysisConfig, Report, analyze, render
from .facts import (FactBase, derive_base_facts, owner_only_statements,
                    saturate, taint_call_destinations)
from .frontend import lower, parse_source
from .icfg import ICFG, build_icfg
from .queries import (CexGraph, Finding, HazardPair, detect_eth_withdrawal,
                      detect_generic, detect_reentrancy, detect_suicide,
                      detect_tod, extract_cex, hazard_pairs)
from .sdg import SDG, build_sdg, combine_for_delegate_or_create
from .symexec import (MachineState, Verdict, concrete_run, interpret_step,
                      refine, refine_tod)
from .vsa import ValueSummary, compute_summary, mu_merge

__version__ = "0.1.0"

__all__ = [
    "AnalysisConfig", "Report", "analyze", "render",
    "FactBase", "derive_base_facts", "saturate",
    "taint_call_destinations", "owner_only_statements",
    "lower", "parse_source",
    "ICFG", "build_icfg",
    "CexGraph", "Finding", "HazardPair", "hazard_pairs",
    "detect_reentrancy", "detect_tod", "detect_suicide",
    "detect_eth_withdrawal", "detect_generic", "extract_cex",
    "SDG", "build_sdg", "combine_for_delegate_or_create",
    "MachineState", "Verdict", "refine", "refine_tod",
    "interpret_step", "concrete_run",
    "ValueSummary", "compute_summary", "mu_merge",
    "__version__",
]
