"""Vulnerability queries over the SDG and fact base.

A hazardous access is a pair of statements touching the same storage
variable, at least one writing it.  Each detector filters hazard pairs by a
reachability pattern:

    reentrancy      both statements reachable from a tainted external call,
                    where reachability follows control flow plus the SDG's
                    re-entry/return edges (the attacker may re-enter any
                    public function mid-call);
    tod_*           an Ether-moving call whose amount (tod_amount),
                    destination (tod_receiver) or dominating guard
                    (tod_transfer) depends on a variable some other
                    statement writes — transaction order changes the
                    outcome;
    cond_suicide    a selfdestruct reachable from a statement depending on a
                    variable written elsewhere;
    uncond_suicide  a selfdestruct with no such condition at all;
    eth_withdrawal  an Ether-moving call preceded by a dependency on a
                    writable variable;
    generic         user-supplied target statement instead of a built-in
                    anchor pattern.

Statements gated on an owner check are excluded (an administrator is
trusted).  All detectors return findings with verdict "potential" except
unconditional selfdestructs, which need no path reasoning.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

from .errors import UnknownNodeError
from .facts import FactBase, cv_positive
from .icfg import ICFG, NodeId
from .sdg import SDG

FINDING_KINDS = ("reentrancy", "tod_transfer", "tod_amount", "tod_receiver",
                 "cond_suicide", "uncond_suicide", "eth_withdrawal", "generic")


@dataclass
class HazardPair:
    s1: NodeId
    s2: NodeId
    v: str
    kinds: tuple[str, str]  # access kind of s1, of s2: "read" | "write"


@dataclass
class CexGraph:
    nodes: set[NodeId] = field(default_factory=set)
    edges: set[tuple[NodeId, NodeId]] = field(default_factory=set)
    entry: Optional[NodeId] = None
    targets: set[NodeId] = field(default_factory=set)
    # execution context for the refiner, attached at extraction time
    icfg: Optional[ICFG] = None
    finding: Optional["Finding"] = None

    def to_text(self) -> str:
        lines = [f"entry {self.entry}"]
        for a, b in sorted(self.edges):
            mark = " *" if b in self.targets else ""
            lines.append(f"{a[0]}:{a[1]} -> {b[0]}:{b[1]}{mark}")
        return "\n".join(lines) + "\n"


@dataclass
class Finding:
    kind: str
    var: Optional[str]
    pair: Optional[HazardPair]
    anchors: list[NodeId]
    verdict: str = "potential"
    cex: Optional[CexGraph] = None
    trace: list[int] = field(default_factory=list)  # witness as source lines

    @property
    def anchor(self) -> NodeId:
        return self.anchors[0]

    def members(self) -> list[NodeId]:
        if self.pair is None:
            return [self.anchor]
        return [self.pair.s1, self.pair.s2]


def _same_stmt(facts: FactBase, a: NodeId, b: NodeId) -> bool:
    """Same source statement: the accesses one statement performs (its own
    loads feeding its store, say) never form a hazardous pair."""
    return a[0] == b[0] and facts.line_of(a) == facts.line_of(b)


def hazard_pairs(sdg: SDG, facts: FactBase) -> list[HazardPair]:
    """All ⟨s1,s2,v⟩ with sdg(s1,v,W), sdg(s2,v,W|D), s1 and s2 distinct
    statements."""
    writers: dict[str, set[NodeId]] = {}
    accessors: dict[str, set[NodeId]] = {}
    for s, v in sdg.w_edges:
        writers.setdefault(v, set()).add(s)
        accessors.setdefault(v, set()).add(s)
    for v, s in sdg.d_edges:
        accessors.setdefault(v, set()).add(s)
    out: list[HazardPair] = []
    for v in sorted(writers):
        for s1 in sorted(writers[v]):
            for s2 in sorted(accessors[v]):
                if s1 == s2 or _same_stmt(facts, s1, s2):
                    continue
                k2 = "write" if s2 in writers[v] else "read"
                out.append(HazardPair(s1, s2, v, ("write", k2)))
    return out


# ---------------------------------------------------------------------------
# shared helpers


def _closure_from(start: NodeId, edges: dict[NodeId, set[NodeId]]) -> set[NodeId]:
    seen = {start}
    stack = [start]
    while stack:
        n = stack.pop()
        for m in edges.get(n, ()):
            if m not in seen:
                seen.add(m)
                stack.append(m)
    return seen


def _adjacency(pairs: Iterable[tuple[NodeId, NodeId]]) -> dict[NodeId, set[NodeId]]:
    adj: dict[NodeId, set[NodeId]] = {}
    for a, b in pairs:
        adj.setdefault(a, set()).add(b)
    return adj


def _xflow(sdg: SDG, facts: FactBase) -> dict[NodeId, set[NodeId]]:
    """Control flow extended with the SDG's cross-function O-edges."""
    return _adjacency(set(facts.tuples("succ")) | sdg.o_edges)


def _not_owner(facts: FactBase, *nodes: NodeId) -> bool:
    return all(not facts.has("owner", n) for n in nodes)


def _dedup(findings: Iterable[Finding], facts: FactBase) -> list[Finding]:
    """Collapse by (kind, var, member source lines); anchors accumulate."""
    merged: dict[tuple, Finding] = {}
    for f in findings:
        lines = frozenset(facts.line_of(s) for s in f.members())
        key = (f.kind, f.var, lines)
        if key in merged:
            for a in f.anchors:
                if a not in merged[key].anchors:
                    merged[key].anchors.append(a)
        else:
            merged[key] = f
    out = list(merged.values())
    for f in out:
        f.anchors.sort()
    out.sort(key=lambda f: (f.kind, f.var or "",
                            sorted(facts.line_of(s) for s in f.members())))
    return out


def _writers(sdg: SDG, v: str) -> list[NodeId]:
    return sorted(s for s, vv in sdg.w_edges if vv == v)


# ---------------------------------------------------------------------------
# detectors


def detect_reentrancy(sdg: SDG, facts: FactBase) -> list[Finding]:
    """Hazard pairs an attacker can hit twice through a re-entrant call."""
    pairs = hazard_pairs(sdg, facts)
    flow = _xflow(sdg, facts)
    found: list[Finding] = []
    for e in sorted(facts.tuples("tainted_call")):
        e = e[0]
        if not facts.has("public", e[0]):
            continue  # only calls an outside transaction can trigger
        reachable = _closure_from(e, flow)
        for p in pairs:
            if p.s1 in reachable and p.s2 in reachable \
                    and _not_owner(facts, p.s1, p.s2):
                found.append(Finding("reentrancy", p.v, p, [e]))
    return _dedup(found, facts)


def detect_tod(sdg: SDG, facts: FactBase) -> list[Finding]:
    """Ether-moving calls whose effect changes under transaction reordering.

    For each call e with satisfiable cv>0, classify which ingredient of the
    transfer depends on a storage variable v, then pair that dependent
    statement with every other write to v.
    """
    found: list[Finding] = []
    guards = {s for s, in facts.tuples("guard")}
    for e, cv in sorted(facts.tuples("extcall"), key=repr):
        if not cv_positive(cv) or not facts.has("public", e[0]):
            continue
        variants: list[tuple[str, NodeId, set[str]]] = [
            ("tod_amount", e, {v for s, v in facts.tuples("dep_value") if s == e}),
            ("tod_receiver", e, {v for s, v in facts.tuples("dep_dest") if s == e}),
        ]
        for g in sorted(guards):
            if g != e and g[0] == e[0] and facts.reach(g, e):
                gvars = {v for s, v in facts.tuples("depend") if s == g}
                variants.append(("tod_transfer", g, gvars))
        for kind, member, vars_ in variants:
            for v in sorted(vars_):
                k2 = "write" if facts.has("write", member, v) else "read"
                for s1 in _writers(sdg, v):
                    if s1 == member or _same_stmt(facts, s1, member):
                        continue
                    if not _not_owner(facts, s1, member):
                        continue
                    pair = HazardPair(s1, member, v, ("write", k2))
                    found.append(Finding(kind, v, pair, [e]))
    return _dedup(found, facts)


def detect_suicide(sdg: SDG, facts: FactBase) -> list[Finding]:
    """selfdestruct reachable under a rewritable condition, or under none."""
    found: list[Finding] = []
    dependers = _adjacency((s, v) for s, v in facts.tuples("depend"))
    for sd, in sorted(facts.tuples("selfdestruct")):
        if not facts.has("public", sd[0]):
            continue
        conditioned = False
        for s1 in sorted(dependers):
            if not isinstance(s1, tuple) or s1[0] != sd[0]:
                continue
            if not facts.reach(s1, sd):
                continue
            for v in sorted(dependers[s1]):
                for s2 in _writers(sdg, v):
                    if s2 == s1 or _same_stmt(facts, s2, s1):
                        continue
                    conditioned = True
                    if _not_owner(facts, sd):
                        k1 = "write" if facts.has("write", s1, v) else "read"
                        pair = HazardPair(s1, s2, v, (k1, "write"))
                        found.append(Finding("cond_suicide", v, pair, [sd]))
        if not conditioned and _not_owner(facts, sd):
            found.append(Finding("uncond_suicide", None, None, [sd],
                                 verdict="confirmed"))
    return _dedup(found, facts)


def detect_eth_withdrawal(sdg: SDG, facts: FactBase) -> list[Finding]:
    """Ether-moving calls conditioned on storage anyone can rewrite."""
    found: list[Finding] = []
    dependers = _adjacency((s, v) for s, v in facts.tuples("depend"))
    for e, cv in sorted(facts.tuples("extcall"), key=repr):
        if not cv_positive(cv) or not _not_owner(facts, e) \
                or not facts.has("public", e[0]):
            continue
        for s1 in sorted(dependers):
            if s1[0] != e[0] or not facts.reach(s1, e):
                continue
            for v in sorted(dependers[s1]):
                for s2 in _writers(sdg, v):
                    if s2 == s1 or _same_stmt(facts, s2, s1):
                        continue
                    k1 = "write" if facts.has("write", s1, v) else "read"
                    pair = HazardPair(s2, s1, v, ("write", k1))
                    found.append(Finding("eth_withdrawal", v, pair, [e]))
    return _dedup(found, facts)


def detect_generic(sdg: SDG, facts: FactBase, target: NodeId) -> list[Finding]:
    """Hazard pairs from which a caller-chosen target statement is reachable."""
    if not any(s == target for s, _ in facts.tuples("line")):
        raise UnknownNodeError(f"unknown target statement {target!r}")
    found: list[Finding] = []
    for p in hazard_pairs(sdg, facts):
        if facts.reach(p.s1, target):
            found.append(Finding("generic", p.v, p, [target]))
    return _dedup(found, facts)


# ---------------------------------------------------------------------------
# counter-example extraction


def _cross_edges(facts: FactBase) -> set[tuple[NodeId, NodeId]]:
    """The re-entry and return O-edges, reconstructed from base facts."""
    publics = {m for m, in facts.tuples("public")}
    entries = [n for n, m in facts.tuples("entry") if m in publics]
    exits = [n for n, m in facts.tuples("exit") if m in publics]
    calls = [e for e, _ in facts.tuples("extcall")]
    succ = _adjacency(facts.tuples("succ"))
    edges: set[tuple[NodeId, NodeId]] = set()
    for e in calls:
        for n in entries:
            edges.add((e, n))
        for x in exits:
            for s in succ.get(e, ()):
                edges.add((x, s))
    return edges


def extract_cex(finding: Finding, icfg: ICFG, facts: FactBase) -> CexGraph:
    """Minimal subgraph rooted at public entries covering the finding.

    Keeps exactly the nodes that lie on some entry-to-target path of the
    re-entry-extended flow graph: seed at entry nodes that reach a target,
    grow along successor edges whose head can still reach one.
    """
    all_edges = set(facts.tuples("succ")) | _cross_edges(facts)
    fwd = _adjacency(all_edges)
    rev = _adjacency((b, a) for a, b in all_edges)
    targets = {s for s in ([] if finding.pair is None else
                           [finding.pair.s1, finding.pair.s2]) + finding.anchors}
    keep: set[NodeId] = set()
    stack = list(targets)
    while stack:
        n = stack.pop()
        if n in keep:
            continue
        keep.add(n)
        stack.extend(rev.get(n, ()))
    roots = [n for n, m in facts.tuples("entry")
             if facts.has("public", m) and n in keep]
    g = CexGraph(targets=targets, entry=(finding.anchor[0], -1),
                 icfg=icfg, finding=finding)
    stack = list(roots)
    while stack:
        n = stack.pop()
        if n in g.nodes:
            continue
        g.nodes.add(n)
        for m in fwd.get(n, ()):
            if m in keep:
                g.edges.add((n, m))
                stack.append(m)
    return g
