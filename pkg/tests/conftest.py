"""Shared fixtures: paths and the standard analysis pipeline."""

from pathlib import Path

import pytest

from sicheck.facts import (derive_base_facts, owner_only_statements,
                           taint_call_destinations)
from sicheck.frontend import lower, parse_source
from sicheck.icfg import build_icfg
from sicheck.sdg import build_sdg

FIXTURES = Path(__file__).parent / "fixtures"


def fixture_path(name: str) -> Path:
    return FIXTURES / name


def fixture_src(name: str) -> str:
    return fixture_path(name).read_text()


def pipeline(src: str, contract: str | None = None):
    """parse -> lower -> flow graph -> base facts (+taint/owner) -> SDG."""
    prog = lower(parse_source(src), contract)
    icfg = build_icfg(prog)
    facts = derive_base_facts(icfg, prog)
    taint_call_destinations(icfg, prog, facts)
    owner_only_statements(icfg, prog, facts)
    sdg = build_sdg(facts)
    return prog, icfg, facts, sdg


def pipeline_file(name: str, contract: str | None = None):
    return pipeline(fixture_src(name), contract)


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


def all_fixture_files() -> list[Path]:
    return sorted(FIXTURES.glob("*.sol"))


def line_pairs(facts, pairs) -> set[tuple[str, tuple[int, int]]]:
    """Hazard pairs projected to (variable, sorted line pair) for comparison
    against hand-derived expectations that live at source-line granularity."""
    return {(p.v, tuple(sorted((facts.line_of(p.s1), facts.line_of(p.s2)))))
            for p in pairs}
