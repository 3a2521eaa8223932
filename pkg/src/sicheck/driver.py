"""Analysis pipeline orchestration and the command-line interface.

Per contract: parse, lower, merge statically-resolvable delegate/create
targets, build the flow graph and fact base, saturate the dependency graph,
run the selected detectors, and — unless running static-only — refine each
potential finding symbolically (havoc or value-summary boundaries).  Each
contract gets a wall-clock budget; overruns are reported as outcome
"timeout" and never abort the batch, nor do per-contract errors.

Report outcomes: "safe" (no confirmed or potential findings), "unsafe",
"timeout", "error".  Refuted findings are pruned from the report — that is
the point of refinement.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

from .errors import AnalyzerError
from .facts import (FactBase, derive_base_facts, owner_only_statements,
                    taint_call_destinations)
from .frontend import lower, parse_source
from .icfg import ICFG, build_icfg
from .ir import ContractIR, ExtCall, NewContract
from .queries import (CexGraph, Finding, detect_eth_withdrawal,
                      detect_reentrancy, detect_suicide, detect_tod,
                      extract_cex)
from .sdg import build_sdg, combine_for_delegate_or_create
from .solver import BuiltinSolver, ExternalSmtSolver, Solver
from .symexec import refine
from .vsa import compute_summary

MODES = ("so", "st-hv", "st-vs")
DETECTOR_GROUPS: dict[str, Callable] = {
    "reentrancy": detect_reentrancy,
    "tod": detect_tod,
    "suicide": detect_suicide,
    "ether-withdrawal": detect_eth_withdrawal,
}
DUMP_KINDS = ("facts", "sdg", "icfg", "summary")


@dataclass
class AnalysisConfig:
    detectors: tuple[str, ...] = tuple(DETECTOR_GROUPS)
    mode: str = "st-vs"
    timeout_secs: float = 60.0
    solver: str = "builtin"
    fmt: str = "text"
    dump: tuple[str, ...] = ()
    depth: int = 1  # loop iterations explored by the refiner
    solver_cmd: str = "z3"

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.timeout_secs <= 0:
            raise ValueError("timeout must be positive")
        for d in self.detectors:
            if d not in DETECTOR_GROUPS:
                raise ValueError(f"unknown detector {d!r}")

    def make_solver(self) -> Solver:
        if self.solver == "external":
            return ExternalSmtSolver(self.solver_cmd,
                                     timeout=self.timeout_secs)
        return BuiltinSolver()


@dataclass
class Report:
    mode: str
    detectors: tuple[str, ...]
    contracts: list[dict] = field(default_factory=list)

    def to_obj(self) -> dict:
        return {"mode": self.mode, "detectors": sorted(self.detectors),
                "contracts": self.contracts}

    @property
    def has_findings(self) -> bool:
        return any(c["findings"] for c in self.contracts)

    @property
    def has_errors(self) -> bool:
        return any(c["outcome"] == "error" for c in self.contracts)


class _Deadline(Exception):
    pass


def _tick(deadline: Optional[float]) -> None:
    if deadline is not None and time.monotonic() > deadline:
        raise _Deadline()


def analyze(paths: list, cfg: AnalysisConfig) -> Report:
    """Run the pipeline over files/directories of contract sources."""
    files: list[Path] = []
    for p in map(Path, paths):
        if p.is_dir():
            files.extend(sorted(p.rglob("*.sol")))
        elif p.exists():
            files.append(p)
        else:
            raise FileNotFoundError(str(p))
    report = Report(cfg.mode, cfg.detectors)
    for path in files:
        report.contracts.extend(_analyze_file(path, cfg))
    return report


def _analyze_file(path: Path, cfg: AnalysisConfig) -> list[dict]:
    try:
        unit = parse_source(path.read_text())
    except AnalyzerError as exc:
        return [_entry(path, "", "error", error=str(exc))]
    out = []
    names = [c.name for c in unit.contracts]
    for name in names:
        deadline = time.monotonic() + cfg.timeout_secs
        out.append(_analyze_contract(unit, name, names, path, cfg, deadline))
    return out


def _entry(path: Path, contract: str, outcome: str, findings=None,
           timings=None, error: Optional[str] = None) -> dict:
    entry = {
        "file": str(path),
        "contract": contract,
        "outcome": outcome,
        "findings": findings or [],
        "timings": timings or {"explore": 0.0, "vsa": 0.0, "refine": 0.0},
    }
    if error is not None:
        entry["error"] = error
    return entry


def _analyze_contract(unit, name: str, all_names: list[str], path: Path,
                      cfg: AnalysisConfig, deadline: float) -> dict:
    timings = {"explore": 0.0, "vsa": 0.0, "refine": 0.0}
    findings: list[Finding] = []
    cexes: dict[int, CexGraph] = {}
    icfg: Optional[ICFG] = None
    try:
        t0 = time.monotonic()
        prog = lower(unit, name)
        prog = _merge_linked(unit, prog, all_names)
        icfg = build_icfg(prog)
        fb = derive_base_facts(icfg, prog)
        taint_call_destinations(icfg, prog, fb)
        owner_only_statements(icfg, prog, fb)
        sdg = build_sdg(fb)
        _tick(deadline)
        for det in cfg.detectors:
            findings.extend(DETECTOR_GROUPS[det](sdg, fb))
        for i, f in enumerate(findings):
            cexes[i] = extract_cex(f, icfg, fb)
        timings["explore"] = time.monotonic() - t0
        _dump(cfg, path, name, facts=fb, sdg=sdg, icfg=icfg)
        _tick(deadline)

        summary = None
        if cfg.mode == "st-vs" or "summary" in cfg.dump:
            t0 = time.monotonic()
            summary = compute_summary(prog)
            timings["vsa"] = time.monotonic() - t0
            _dump(cfg, path, name, summary=summary)
        if cfg.mode != "so":
            t0 = time.monotonic()
            solver = cfg.make_solver()
            mode = "vsa" if cfg.mode == "st-vs" else "havoc"
            for i, f in enumerate(findings):
                if f.verdict != "potential":
                    continue
                verdict = refine(cexes[i], summary, mode, solver=solver,
                                 max_visits=cfg.depth + 1, deadline=deadline)
                if verdict.status in ("confirmed", "refuted"):
                    f.verdict = verdict.status
                    f.trace = verdict.trace
                _tick(deadline)
            timings["refine"] = time.monotonic() - t0
        outcome = None
    except _Deadline:
        outcome = "timeout"
    except AnalyzerError as exc:
        return _entry(path, name, "error", error=str(exc))
    except RecursionError as exc:  # pathological nesting; keep the batch alive
        return _entry(path, name, "error", error=f"RecursionError: {exc}")

    kept = [f for f in findings if f.verdict != "refuted"]
    if outcome is None:
        outcome = "unsafe" if kept else "safe"
    rendered = [_finding_obj(f, cexes[i], icfg)
                for i, f in enumerate(findings) if f.verdict != "refuted"]
    rendered.sort(key=lambda d: (d["kind"], d["var"] or "",
                                 d["lines"]["anchor"], d["cex_lines"]))
    timings = {k: round(v, 6) for k, v in timings.items()}
    return _entry(path, name, outcome, rendered, timings)


def _merge_linked(unit, prog: ContractIR, all_names: list[str]) -> ContractIR:
    """Inline delegatecall/new targets defined alongside this contract."""
    others = [n for n in all_names if n != prog.name]
    if not others:
        return prog
    uses_links = any(
        isinstance(ins, NewContract) or
        (isinstance(ins, ExtCall) and ins.kind == "delegate")
        for fn in prog.all_functions() for ins in fn.instrs)
    if not uses_links:
        return prog
    callees = {}
    for other in others:
        try:
            callees[other] = lower(unit, other)
        except AnalyzerError:
            continue  # a callee we cannot model stays an opaque call
    return combine_for_delegate_or_create(prog, callees=callees)


def _finding_obj(f: Finding, cex: CexGraph, icfg: Optional[ICFG]) -> dict:
    line = (lambda n: icfg.line_of(n) if icfg is not None else 0)
    lines = {"anchor": line(f.anchor),
             "s1": line(f.pair.s1) if f.pair else None,
             "s2": line(f.pair.s2) if f.pair else None}
    return {
        "kind": f.kind,
        "var": f.var,
        "verdict": f.verdict,
        "lines": lines,
        "cex_lines": list(f.trace) if f.trace else _shortest_lines(cex, icfg),
    }


def _shortest_lines(cex: CexGraph, icfg: Optional[ICFG]) -> list[int]:
    """Lines along a shortest cex path from its entry to the anchor."""
    anchor = cex.finding.anchor if cex.finding else None
    if icfg is None or anchor is None:
        return []
    prev: dict = {cex.entry: None}
    queue = [cex.entry]
    fwd: dict = {}
    for a, b in cex.edges:
        fwd.setdefault(a, []).append(b)
    while queue and anchor not in prev:
        nxt = []
        for n in queue:
            for m in sorted(fwd.get(n, [])):
                if m not in prev:
                    prev[m] = n
                    nxt.append(m)
        queue = nxt
    if anchor not in prev:
        return [icfg.line_of(anchor)]
    nodes = []
    at = anchor
    while at is not None:
        nodes.append(at)
        at = prev[at]
    nodes.reverse()
    lines: list[int] = []
    for n in nodes[1:]:  # skip the entry node itself
        ln = icfg.line_of(n)
        if ln > 0 and (not lines or lines[-1] != ln):
            lines.append(ln)
    return lines


def _dump(cfg: AnalysisConfig, path: Path, name: str, facts=None, sdg=None,
          icfg=None, summary=None) -> None:
    sections = {"facts": facts.to_tsv() if facts is not None else None,
                "sdg": sdg.to_text() if sdg is not None else None,
                "icfg": icfg.to_text() if icfg is not None else None,
                "summary": summary.to_text() if summary is not None else None}
    for kind in cfg.dump:
        body = sections.get(kind)
        if body is not None:
            sys.stderr.write(f"== {path} {name} {kind} ==\n{body}")


def render(report: Report, fmt: str) -> str:
    """json: stable, round-trippable schema; text: one line per finding."""
    if fmt == "json":
        return json.dumps(report.to_obj(), indent=2, sort_keys=True) + "\n"
    lines = []
    for c in report.contracts:
        for f in c["findings"]:
            var = f["var"] if f["var"] is not None else "-"
            lines.append(f"{c['file']}:{f['lines']['anchor']} "
                         f"{f['kind']} on {var} [{f['verdict']}]")
    return "\n".join(lines) + ("\n" if lines else "")


# ---------------------------------------------------------------------------
# command line


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="sicheck",
        description="State-inconsistency checker for contract sources.")
    sub = p.add_subparsers(dest="command", required=True)
    a = sub.add_parser("analyze", help="analyze files or directories")
    a.add_argument("paths", nargs="+", metavar="path")
    a.add_argument("--detect", default=",".join(DETECTOR_GROUPS),
                   help="comma-separated detector list "
                        f"(default: all of {','.join(DETECTOR_GROUPS)})")
    a.add_argument("--mode", choices=MODES, default="st-vs")
    a.add_argument("--timeout", type=float, default=60.0, metavar="SECS",
                   help="wall-clock budget per contract")
    a.add_argument("--format", dest="fmt", choices=["json", "text"],
                   default="text")
    a.add_argument("--solver", choices=["builtin", "external"],
                   default="builtin")
    a.add_argument("--solver-cmd", default="z3",
                   help="executable used with --solver external")
    a.add_argument("--dump", action="append", choices=DUMP_KINDS, default=[],
                   help="write intermediate artifacts to stderr (repeatable)")
    a.add_argument("--depth", type=int, default=1,
                   help="refiner loop-unrolling bound")
    return p


def main(argv: Optional[list[str]] = None) -> int:
    parser = _build_parser()
    ns = parser.parse_args(argv)
    detectors = tuple(d.strip() for d in ns.detect.split(",") if d.strip())
    try:
        cfg = AnalysisConfig(detectors=detectors, mode=ns.mode,
                             timeout_secs=ns.timeout, solver=ns.solver,
                             fmt=ns.fmt, dump=tuple(ns.dump), depth=ns.depth,
                             solver_cmd=ns.solver_cmd)
    except ValueError as exc:
        parser.error(str(exc))  # exits 2
    try:
        report = analyze(ns.paths, cfg)
    except OSError as exc:
        sys.stderr.write(f"sicheck: {exc}\n")
        return 2
    sys.stdout.write(render(report, cfg.fmt))
    for c in report.contracts:
        if c["outcome"] in ("error", "timeout"):
            detail = c.get("error", c["outcome"])
            sys.stderr.write(f"sicheck: {c['file']} ({c['contract']}): "
                             f"{detail}\n")
    if report.has_errors:
        return 2
    return 1 if report.has_findings else 0


if __name__ == "__main__":
    sys.exit(main())
