"""Base relation extraction from the IR: the extensional database.

Relations over graph nodes ``(function, index)``:

    storage(v)          v is a state variable
    write(s, v)         s stores to v
    read(s, v)          s loads v
    depend(s, v)        a value s uses is data-dependent on v (includes reads)
    extcall(s, cv)      s is an external call; cv is its Ether value — an int
                        when constant, the marker "sym" when only known
                        symbolically (possibly positive)
    extcall_kind(s, k)  call flavor: call/send/transfer/delegate/high
    dep_value(s, v)     the call's Ether amount depends on v
    dep_dest(s, v)      the call's destination depends on v
    selfdestruct(s)     s destroys the contract
    guard(s)            s is a require/assert or a branch
    succ(a, b)          intra-procedural control-flow edge
    reach(a, b)         reflexive-transitive closure of succ
    entry(n, f) / exit(n, f) / public(f)
    line(s, l)          source line of s
    tainted_call(s)     external call whose destination an attacker can steer
    owner(s)            s only executes for a contract-owner caller

Dependency tracking is register-level and flow-insensitive within a
function, which over-approximates loops without iteration counts.  Taint
additionally flows through storage: once any store writes an
attacker-influenced value into a variable, every load of that variable is
tainted, deliberately ignoring require guards in between.
"""

from __future__ import annotations

from typing import Optional, Union

from .datalog import Engine as RuleEngine
from .datalog import L, Neq, NotL, Rule, Var
from .icfg import ICFG, NodeId
from .ir import (Atom, BinOp, Branch, ContractIR, ExtCall, FunctionIR, Instr,
                 LoadEnv, LoadStorage, Require, SelfDestruct, StoreStorage)

__all__ = ["FactBase", "derive_base_facts", "taint_call_destinations",
           "owner_only_statements", "owner_variables", "saturate",
           "RuleEngine", "Rule", "L", "NotL", "Neq", "Var",
           "TAINTED_CALL_KINDS", "SYMBOLIC_CV", "instr_depends"]

TAINTED_CALL_KINDS = ("call", "high", "delegate")
SYMBOLIC_CV = "sym"  # call value not a compile-time constant

CallValue = Union[int, str]


class FactBase:
    def __init__(self) -> None:
        self.db: dict[str, set[tuple]] = {}
        # auxiliary, non-relational results kept for the query layer
        self.reg_deps: dict[str, dict[str, set[str]]] = {}
        self.owner_vars: set[str] = set()
        self.tainted_storage: set[str] = set()

    def add(self, rel: str, *tup) -> None:
        self.db.setdefault(rel, set()).add(tuple(tup))

    def tuples(self, rel: str) -> set[tuple]:
        return self.db.get(rel, set())

    def has(self, rel: str, *tup) -> bool:
        return tuple(tup) in self.db.get(rel, ())

    def reach(self, a: NodeId, b: NodeId) -> bool:
        return self.has("reach", a, b)

    def intermediate(self, a: NodeId, x: NodeId, b: NodeId) -> bool:
        return self.reach(a, x) and self.reach(x, b)

    def line_of(self, node: NodeId) -> int:
        for s, ln in self.tuples("line"):
            if s == node:
                return ln
        return 0

    @staticmethod
    def _fmt(value) -> str:
        if isinstance(value, tuple):
            return ":".join(str(x) for x in value)
        return str(value)

    def relation_tsv(self, rel: str) -> str:
        rows = sorted(self.tuples(rel), key=repr)
        return "\n".join("\t".join(self._fmt(v) for v in tup) for tup in rows)

    def to_tsv(self, skip: tuple[str, ...] = ("reach",)) -> str:
        """All relations, one block per relation (reach omitted: derivable)."""
        parts = []
        for rel in sorted(self.db):
            if rel in skip:
                continue
            body = self.relation_tsv(rel)
            parts.append(f"# {rel}\n{body}" if body else f"# {rel}")
        return "\n".join(parts) + "\n"


def _cv_of(ins: ExtCall) -> CallValue:
    if ins.value is None:
        return 0
    if isinstance(ins.value, bool):
        return int(ins.value)
    if isinstance(ins.value, int):
        return ins.value
    return SYMBOLIC_CV


def cv_positive(cv: CallValue) -> bool:
    """Is `call value > 0` satisfiable?"""
    return cv == SYMBOLIC_CV or (isinstance(cv, int) and cv > 0)


def _reg_dependencies(fn: FunctionIR) -> dict[str, set[str]]:
    """reg -> state variables its value may derive from (fixpoint over loops)."""
    deps: dict[str, set[str]] = {}
    changed = True
    while changed:
        changed = False
        for ins in fn.instrs:
            d: set[str] = set()
            for reg in ins.used_regs():
                d |= deps.get(reg, set())
            if isinstance(ins, LoadStorage):
                d.add(ins.var)
            dst = ins.defined_reg()
            if dst is not None and not d <= deps.get(dst, set()):
                deps.setdefault(dst, set()).update(d)
                changed = True
    return deps


def instr_depends(ins: Instr, deps: dict[str, set[str]]) -> set[str]:
    """State variables the values used by ``ins`` derive from."""
    out: set[str] = set()
    for reg in ins.used_regs():
        out |= deps.get(reg, set())
    if isinstance(ins, LoadStorage):
        out.add(ins.var)
    return out


def _atom_deps(atom: Optional[Atom], deps: dict[str, set[str]]) -> set[str]:
    if isinstance(atom, str):
        return deps.get(atom, set())
    return set()


def derive_base_facts(g: ICFG, prog: ContractIR) -> FactBase:
    fb = FactBase()
    for v in prog.storage_sorts:
        fb.add("storage", v)
    for fn in prog.all_functions():
        deps = _reg_dependencies(fn)
        fb.reg_deps[fn.name] = deps
        fb.add("entry", (fn.name, -1), fn.name)
        fb.add("exit", (fn.name, len(fn.instrs)), fn.name)
        fb.add("line", (fn.name, -1), fn.line)
        if fn.is_public:
            fb.add("public", fn.name)
        for i, ins in enumerate(fn.instrs):
            node: NodeId = (fn.name, i)
            fb.add("line", node, ins.line)
            for v in ins.storage_writes():
                fb.add("write", node, v)
            for v in ins.storage_reads():
                fb.add("read", node, v)
            for v in instr_depends(ins, deps):
                fb.add("depend", node, v)
            if isinstance(ins, ExtCall):
                fb.add("extcall", node, _cv_of(ins))
                fb.add("extcall_kind", node, ins.kind)
                for v in _atom_deps(ins.value, deps):
                    fb.add("dep_value", node, v)
                for v in _atom_deps(ins.dest, deps):
                    fb.add("dep_dest", node, v)
            if isinstance(ins, SelfDestruct):
                fb.add("selfdestruct", node)
            if isinstance(ins, (Require, Branch)):
                fb.add("guard", node)
    for a, outs in g.succ.items():
        for b in outs:
            fb.add("succ", a, b)
    for a in g.nodes():
        for b in g.reach_set(a):
            fb.add("reach", a, b)
    return fb


def saturate(rules: list[Rule], base: FactBase) -> FactBase:
    """Least fixpoint of the Horn rules over the base facts (new FactBase)."""
    out = FactBase()
    out.db = RuleEngine(rules).saturate(base.db)
    out.reg_deps = base.reg_deps
    out.owner_vars = base.owner_vars
    out.tainted_storage = base.tainted_storage
    return out


# ---------------------------------------------------------------------------
# Taint


def taint_call_destinations(g: ICFG, prog: ContractIR,
                            fb: Optional[FactBase] = None) -> set[NodeId]:
    """External calls whose destination an attacker can influence.

    Sources are the parameters of public functions and msg.sender; the
    constructor's arguments are chosen by the deployer and are trusted.
    send/transfer destinations are excluded: their gas stipend cannot run
    attacker code.  When ``fb`` is given, tainted_call facts are recorded.
    """
    tainted_vars: set[str] = set()
    while True:
        grew = False
        for fn in prog.all_functions():
            tainted = _tainted_regs(fn, tainted_vars)
            for ins in fn.instrs:
                if isinstance(ins, StoreStorage) and \
                        _atom_tainted(ins.value, tainted) and \
                        ins.var not in tainted_vars:
                    tainted_vars.add(ins.var)
                    grew = True
        if not grew:
            break
    result: set[NodeId] = set()
    for fn in prog.all_functions():
        tainted = _tainted_regs(fn, tainted_vars)
        for i, ins in enumerate(fn.instrs):
            if isinstance(ins, ExtCall) and ins.kind in TAINTED_CALL_KINDS \
                    and _atom_tainted(ins.dest, tainted):
                result.add((fn.name, i))
    if fb is not None:
        fb.tainted_storage = tainted_vars
        for node in result:
            fb.add("tainted_call", node)
    return result


def _atom_tainted(atom: Optional[Atom], tainted: set[str]) -> bool:
    return isinstance(atom, str) and atom in tainted


def _tainted_regs(fn: FunctionIR, tainted_vars: set[str]) -> set[str]:
    tainted: set[str] = set(fn.params) if fn.is_public else set()
    changed = True
    while changed:
        changed = False
        for ins in fn.instrs:
            dst = ins.defined_reg()
            if dst is None or dst in tainted:
                continue
            hit = isinstance(ins, LoadEnv) and ins.what == "msg.sender"
            hit = hit or (isinstance(ins, LoadStorage) and ins.var in tainted_vars)
            hit = hit or any(r in tainted for r in ins.used_regs())
            if hit:
                tainted.add(dst)
                changed = True
    return tainted


# ---------------------------------------------------------------------------
# Owner-only statements


def owner_variables(g: ICFG, prog: ContractIR) -> set[str]:
    """The owner-variable set O: start from constructor-written variables,
    keep those whose every public write is gated on msg.sender being compared
    with a current member of O, and iterate to a fixed point."""
    current, _ = _owner_closure(g, prog)
    return current


def owner_only_statements(g: ICFG, prog: ContractIR,
                          fb: Optional[FactBase] = None) -> set[NodeId]:
    """Statements only reachable when msg.sender passes an owner check.

    When ``fb`` is given, owner(s) facts and fb.owner_vars are recorded.
    """
    current, gated = _owner_closure(g, prog)
    if fb is not None:
        fb.owner_vars = current
        for node in gated:
            fb.add("owner", node)
    return gated


def _owner_closure(g: ICFG, prog: ContractIR) -> tuple[set[str], set[NodeId]]:
    reg_deps = {fn.name: _reg_dependencies(fn) for fn in prog.all_functions()}
    ctor_written: set[str] = set()
    if prog.constructor is not None:
        for ins in prog.constructor.instrs:
            ctor_written.update(ins.storage_writes())
    written: set[str] = set(ctor_written)
    pub_writes: dict[str, list[NodeId]] = {}
    for fn in prog.public_functions:
        for i, ins in enumerate(fn.instrs):
            for v in ins.storage_writes():
                written.add(v)
                pub_writes.setdefault(v, []).append((fn.name, i))

    def gated_nodes(owner_vars: set[str]) -> set[NodeId]:
        gated: set[NodeId] = set()
        for fn in prog.public_functions:
            eq_carry, neq_carry = _owner_comparisons(fn, reg_deps[fn.name],
                                                     owner_vars)
            n = len(fn.instrs)
            for i, ins in enumerate(fn.instrs):
                if isinstance(ins, Require) and isinstance(ins.cond, str) \
                        and (ins.cond in eq_carry or ins.cond in neq_carry):
                    gated |= g.reach_set((fn.name, i))
                elif isinstance(ins, Branch) and isinstance(ins.cond, str):
                    t = (fn.name, min(ins.on_true, n))
                    f = (fn.name, min(ins.on_false, n))
                    if ins.cond in eq_carry:
                        gated |= g.reach_set(t) - g.reach_set(f)
                    if ins.cond in neq_carry:
                        gated |= g.reach_set(f) - g.reach_set(t)
        return gated

    def step(owner_vars: set[str]) -> set[str]:
        gated = gated_nodes(owner_vars)
        out: set[str] = set()
        for v in written:
            if v not in ctor_written and v not in pub_writes:
                continue
            if all(w in gated for w in pub_writes.get(v, [])):
                out.add(v)
        return out

    current = set(ctor_written)
    seen = [current]
    for _ in range(len(prog.storage_sorts) + 2):
        nxt = step(current)
        if nxt == current:
            break
        if nxt in seen:  # oscillation: settle on the over-approximate union
            current = nxt | current
            break
        seen.append(nxt)
        current = nxt
    return current, gated_nodes(current)


def _owner_comparisons(fn: FunctionIR, deps: dict[str, set[str]],
                       owner_vars: set[str]) -> tuple[set[str], set[str]]:
    """Registers carrying msg.sender ==/!= <owner var> comparison results."""
    sender: set[str] = set()
    changed = True
    while changed:
        changed = False
        for ins in fn.instrs:
            dst = ins.defined_reg()
            if dst is None or dst in sender:
                continue
            hit = isinstance(ins, LoadEnv) and ins.what == "msg.sender"
            hit = hit or any(r in sender for r in ins.used_regs())
            if hit:
                sender.add(dst)
                changed = True
    eq_carry: set[str] = set()
    neq_carry: set[str] = set()
    for ins in fn.instrs:
        if isinstance(ins, BinOp) and ins.op in ("==", "!="):
            sides = [ins.a, ins.b]
            for x, y in (sides, sides[::-1]):
                if isinstance(x, str) and x in sender and isinstance(y, str) \
                        and deps.get(y, set()) & owner_vars:
                    (eq_carry if ins.op == "==" else neq_carry).add(ins.dst)
    # a guard condition derived from a comparison result carries it onward
    for carry in (eq_carry, neq_carry):
        changed = True
        while changed:
            changed = False
            for ins in fn.instrs:
                dst = ins.defined_reg()
                if dst is None or dst in carry:
                    continue
                if any(r in carry for r in ins.used_regs()):
                    carry.add(dst)
                    changed = True
    return eq_carry, neq_carry
