"""Symbolic evaluation of counter-example graphs, plus a concrete oracle.

The refiner answers one question per finding: does the counter-example
subgraph admit a feasible path that realizes the hazard?  For reentrancy the
path has two legs — entry to the attacker-controlled call, then (after the
adversary re-enters) entry of the pair's function to the hazardous
statement.  At the re-entry boundary the storage either stays as it is, is
havocked (havoc mode), or takes values the contract's value summary allows
(vsa mode), each guarded by that summary pair's condition instantiated
against the storage at the call site.  Order-dependence findings evaluate
the same leg twice — once from an untouched pre-state and once after an
interfering summarized write — and ask whether the transferred quantity can
differ.  Conditional-suicide and withdrawal findings need a single feasible
leg to their anchor.

Everything is bounded (loop bodies explored at most ``max_visits - 1``
times, a global expansion budget per leg), so a full exploration with every
path condition unsatisfiable is a genuine refutation at that bound, while
exhausting the budget or a solver timeout degrades to "unknown" and the
warning is kept.

`concrete_run` is the ground-truth interpreter used by the property tests:
it executes schedules of transactions with optional re-entrant calls
injected at external call sites, with full revert semantics.
"""

from __future__ import annotations

import time
from copy import deepcopy
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .errors import (AnalyzerError, RequireFailedError, SolverTimeoutError,
                     UnknownOpcodeError)
from .icfg import ICFG, NodeId
from .ir import (Atom, Branch, ContractIR, Copy, ExtCall, Havoc, Jump,
                 LoadEnv, LoadStorage, NewContract, Require, Return,
                 SelfDestruct, StoreStorage)
from .ir import BinOp as IRBinOp
from .ir import UnOp as IRUnOp
from .queries import CexGraph
from .solver import BuiltinSolver, CheckResult, Solver
from .terms import (FALSE, MASK, TRUE, Binop, Cases, Const, Sym, Term, Unop,
                    _fold_binop, free_syms, mk_and, mk_eq, mk_not, mk_or,
                    simplify, subst)
from .vsa import ValueSummary, is_boundary_sym, pre_sym

__all__ = ["MachineState", "Verdict", "refine", "refine_tod",
           "interpret_step", "concrete_run"]


@dataclass
class Verdict:
    status: str  # "confirmed" | "refuted" | "unknown"
    model: dict = field(default_factory=dict)
    reason: str = ""
    trace: list[int] = field(default_factory=list)  # witness source lines


class _Frame:
    """Deterministic fresh-symbol factory for one transaction.

    Symbols are keyed so that two evaluations of the same leg sharing a
    frame see identical unknowns — required when comparing two runs of the
    same transaction under different interleavings.
    """

    def __init__(self, prefix: str) -> None:
        self.prefix = prefix
        self.cache: dict[str, Sym] = {}

    def sym(self, key: str, sort: str = "uint") -> Sym:
        if key not in self.cache:
            self.cache[key] = Sym(f"{self.prefix}${key}", sort)
        return self.cache[key]


@dataclass
class MachineState:
    pc: NodeId
    regs: dict[str, Term]
    storage: dict[str, Term]
    path: Term = TRUE
    summary_assumptions: list[Term] = field(default_factory=list)
    trace: list[int] = field(default_factory=list)
    visits: dict[NodeId, int] = field(default_factory=dict)
    frame: Optional[_Frame] = None
    boundary: Optional[NodeId] = None  # the call site just stepped over

    def fork(self, pc: NodeId) -> "MachineState":
        return MachineState(pc, dict(self.regs), dict(self.storage),
                            self.path, list(self.summary_assumptions),
                            list(self.trace), dict(self.visits),
                            self.frame, self.boundary)

    def note_line(self, line: int) -> None:
        if line > 0 and (not self.trace or self.trace[-1] != line):
            self.trace.append(line)

    def assertions(self) -> list[Term]:
        return [self.path, *self.summary_assumptions]


def _atom_term(a: Optional[Atom], regs: dict[str, Term]) -> Term:
    if isinstance(a, bool):
        return Const(a)
    if isinstance(a, int):
        return Const(a & MASK)
    if a is None:
        return Const(0)
    return regs.get(a, Const(0))


def interpret_step(state: MachineState, g: ICFG) -> list[MachineState]:
    """Execute the instruction at ``state.pc``; return successor states.

    Branches fork (dropping decidably-unsat sides), require conjoins its
    condition, external calls havoc their return value and mark the boundary,
    return/selfdestruct terminate the path.  Mapping stores are weak — the
    collapsed cell may keep its old value, mirroring the summary's collapse.
    """
    fn_name, idx = state.pc
    fn = g.functions[fn_name]
    ins = g.instr_at(state.pc)
    if ins is None:  # synthetic entry or exit node
        if idx == -1 and fn.instrs:
            return [state.fork((fn_name, 0))]
        if idx == -1:
            return [state.fork(g.exit(fn_name))]
        return []
    visit = state.visits.get(state.pc, 0)

    def step(pc_next: NodeId) -> MachineState:
        nxt = state.fork(pc_next)
        nxt.visits[state.pc] = visit + 1
        nxt.note_line(ins.line)
        nxt.boundary = None
        return nxt

    nxt_pc = (fn_name, min(idx + 1, len(fn.instrs)))
    regs = state.regs
    if isinstance(ins, Copy):
        s = step(nxt_pc)
        s.regs[ins.dst] = _atom_term(ins.src, regs)
        return [s]
    if isinstance(ins, IRUnOp):
        s = step(nxt_pc)
        s.regs[ins.dst] = simplify(Unop(ins.op, _atom_term(ins.a, regs)))
        return [s]
    if isinstance(ins, IRBinOp):
        s = step(nxt_pc)
        s.regs[ins.dst] = simplify(
            Binop(ins.op, _atom_term(ins.a, regs), _atom_term(ins.b, regs)))
        return [s]
    if isinstance(ins, LoadEnv):
        s = step(nxt_pc)
        if ins.what == "msg.sender":
            val: Term = state.frame.sym("env$msg.sender", "addr")
        elif ins.what == "this":
            val = state.frame.sym("env$this", "addr")
        elif ins.what == "msg.value":
            val = state.frame.sym("env$msg.value")
        else:  # this.balance changes as Ether moves; fresh at every read
            val = state.frame.sym(f"bal${fn_name}.{idx}v{visit}")
        s.regs[ins.dst] = val
        return [s]
    if isinstance(ins, Havoc):
        s = step(nxt_pc)
        if ins.dst is not None:
            s.regs[ins.dst] = state.frame.sym(f"hv${fn_name}.{idx}v{visit}")
        return [s]
    if isinstance(ins, NewContract):
        s = step(nxt_pc)
        if ins.dst is not None:
            s.regs[ins.dst] = state.frame.sym(
                f"new${fn_name}.{idx}v{visit}", "addr")
        return [s]
    if isinstance(ins, LoadStorage):
        s = step(nxt_pc)
        s.regs[ins.dst] = state.storage[ins.var]
        return [s]
    if isinstance(ins, StoreStorage):
        s = step(nxt_pc)
        value = _atom_term(ins.value, regs)
        if ins.var in g.contract.mappings:
            keep = state.frame.sym(f"keep${fn_name}.{idx}v{visit}", "bool")
            s.storage[ins.var] = simplify(
                Cases(((keep, state.storage[ins.var]),), value))
        else:
            s.storage[ins.var] = simplify(value)
        return [s]
    if isinstance(ins, Require):
        cond = simplify(_atom_term(ins.cond, regs))
        s = step(nxt_pc)
        s.path = mk_and(state.path, cond)
        return [] if s.path == FALSE else [s]
    if isinstance(ins, Branch):
        cond = simplify(_atom_term(ins.cond, regs))
        out = []
        for taken, target in ((cond, ins.on_true), (mk_not(cond), ins.on_false)):
            s = step((fn_name, min(target, len(fn.instrs))))
            s.path = mk_and(state.path, taken)
            if s.path != FALSE:
                out.append(s)
        return out
    if isinstance(ins, Jump):
        return [step((fn_name, min(ins.target, len(fn.instrs))))]
    if isinstance(ins, ExtCall):
        s = step(nxt_pc)
        if ins.dst is not None:
            s.regs[ins.dst] = state.frame.sym(f"ret${fn_name}.{idx}v{visit}")
        s.boundary = state.pc
        return [s]
    if isinstance(ins, (Return, SelfDestruct)):
        return []  # path terminates
    raise UnknownOpcodeError(f"cannot interpret {type(ins).__name__}")


# ---------------------------------------------------------------------------
# bounded path enumeration


class _Exhausted(Exception):
    pass


def _tx_state(g: ICFG, fn_name: str, storage: dict[str, Term], frame: _Frame,
              path: Term = TRUE, assumptions: Sequence[Term] = (),
              trace: Sequence[int] = ()) -> MachineState:
    fn = g.functions[fn_name]
    regs = {p: frame.sym(f"arg${fn_name}${p}", fn.param_sorts.get(p, "uint"))
            for p in fn.params}
    return MachineState((fn_name, -1), regs, dict(storage), path,
                        list(assumptions), list(trace), {}, frame)


def _paths_to(g: ICFG, start: MachineState, target: NodeId,
              allowed: Optional[set[NodeId]], max_visits: int, budget: int,
              deadline: Optional[float]) -> tuple[list[MachineState], bool]:
    """All bounded states that reach ``target`` (about to execute it).

    Returns (states, complete) where complete is False when the expansion
    budget ran out before the graph slice was fully explored.
    """
    reached: list[MachineState] = []
    stack = [start]
    complete = True
    while stack:
        if deadline is not None and time.monotonic() > deadline:
            raise SolverTimeoutError("refinement deadline exceeded")
        st = stack.pop()
        if st.pc == target:
            reached.append(st)
            continue
        budget -= 1
        if budget < 0:
            complete = False
            break
        for nxt in reversed(interpret_step(st, g)):
            if nxt.visits.get(st.pc, 0) > max_visits:
                complete = False  # cut a loop: exploration no longer exact
                continue
            if allowed is not None and nxt.pc != target \
                    and nxt.pc not in allowed:
                continue
            stack.append(nxt)
    return reached, complete


def _commit(start: MachineState, g: ICFG, max_visits: int, budget: int,
            deadline: Optional[float]) -> tuple[list[MachineState], bool]:
    """All bounded completions of the transaction from ``start``: states
    sitting at a terminator with a live path.  A transaction that cannot
    complete reverts, and a reverted transaction realizes no hazard, so a
    hazardous access only counts once some completion is feasible.  The
    walk deliberately ignores the counter-example slice — completion may
    run through statements irrelevant to the hazard."""
    done: list[MachineState] = []
    stack = [start]
    complete = True
    while stack:
        if deadline is not None and time.monotonic() > deadline:
            raise SolverTimeoutError("refinement deadline exceeded")
        st = stack.pop()
        ins = g.instr_at(st.pc)
        if isinstance(ins, (Return, SelfDestruct)) \
                or (ins is None and st.pc[1] != -1):
            done.append(st)
            continue
        budget -= 1
        if budget < 0:
            complete = False
            break
        for nxt in reversed(interpret_step(st, g)):
            if nxt.visits.get(st.pc, 0) > max_visits:
                complete = False
                continue
            stack.append(nxt)
    return done, complete


def _pre_storage(prog: ContractIR) -> dict[str, Term]:
    return {v: pre_sym(v, sort) for v, sort in prog.storage_sorts.items()}


def _rename_private(t: Term, tag: str) -> Term:
    env = {s.name: Sym(f"{tag}${s.name}", s.sort)
           for s in free_syms(t) if is_boundary_sym(s.name)}
    return subst(t, env) if env else t


def _apply_boundary(st: MachineState, summary: Optional[ValueSummary],
                    mode: str, prog: ContractIR, tag: str) -> MachineState:
    """Constrain storage across the re-entry point per refinement mode."""
    out = st.fork(st.pc)
    if mode == "havoc":
        out.storage = {v: Sym(f"{tag}$hv${v}", prog.storage_sorts.get(v, "uint"))
                       for v in st.storage}
        return out
    pre_env = {pre_sym(v).name: st.storage[v] for v in st.storage}
    for v in sorted(st.storage):
        cur = st.storage[v]
        branches: list[tuple[Term, Term]] = []
        for i, pair in enumerate(summary.for_var(v) if summary else ()):
            ptag = f"{tag}.{i}"
            cond = simplify(subst(_rename_private(pair.cond, ptag), pre_env))
            if cond == FALSE:
                continue
            val = simplify(subst(_rename_private(pair.value, ptag), pre_env))
            if val == cur:
                continue
            choice = Sym(f"{tag}$take${v}.{i}", "bool")
            branches.append((choice, val))
            out.summary_assumptions.append(mk_or(mk_not(choice), cond))
        if branches:
            out.storage[v] = simplify(Cases(tuple(branches), cur))
    return out


# ---------------------------------------------------------------------------
# refinement entry points


def refine(cex: CexGraph, summary: Optional[ValueSummary], mode: str,
           solver: Optional[Solver] = None, max_visits: int = 2,
           budget: int = 6000, deadline: Optional[float] = None) -> Verdict:
    """Confirm or refute a finding by bounded symbolic evaluation of its cex.

    mode is "havoc" or "vsa" and governs the storage constraint at re-entry
    boundaries; order-dependence findings are delegated to `refine_tod`.
    """
    finding, g = cex.finding, cex.icfg
    if finding.kind.startswith("tod_"):
        return refine_tod(cex, summary, mode=mode, solver=solver,
                          max_visits=max_visits, budget=budget,
                          deadline=deadline)
    if finding.kind == "uncond_suicide":
        return Verdict("confirmed", reason="no guarding condition to break")
    solver = solver or BuiltinSolver()
    try:
        if finding.kind == "reentrancy":
            return _refine_reentrancy(cex, summary, mode, solver,
                                      max_visits, budget, deadline)
        return _refine_single_leg(cex, solver, max_visits, budget, deadline)
    except SolverTimeoutError as exc:
        return Verdict("unknown", reason=str(exc))


def _check(solver: Solver, st: MachineState) -> CheckResult:
    return solver.check(st.assertions())


def _refine_single_leg(cex: CexGraph, solver: Solver, max_visits: int,
                       budget: int, deadline: Optional[float]) -> Verdict:
    """One feasible path from a public entry to the anchor confirms."""
    g = cex.icfg
    prog = g.contract
    sure = True
    for anchor in cex.finding.anchors:
        if not g.functions[anchor[0]].is_public:
            continue
        frame = _Frame("t1")
        init = _tx_state(g, anchor[0], _pre_storage(prog), frame)
        reached, complete = _paths_to(g, init, anchor, cex.nodes,
                                      max_visits, budget, deadline)
        sure = sure and complete
        for st in reached:
            st.note_line(g.line_of(anchor))
            ends, finished = _commit(st, g, max_visits, budget, deadline)
            sure = sure and finished
            for end in ends:
                res = _check(solver, end)
                if res.is_sat:
                    return Verdict("confirmed", res.model, "feasible path",
                                   st.trace)
                if res.status == "unknown":
                    sure = False
    if sure:
        return Verdict("refuted", reason="all paths to anchor unsatisfiable")
    return Verdict("unknown", reason="exploration or solver inconclusive")


def _refine_reentrancy(cex: CexGraph, summary: Optional[ValueSummary],
                       mode: str, solver: Solver, max_visits: int,
                       budget: int, deadline: Optional[float]) -> Verdict:
    finding, g = cex.finding, cex.icfg
    prog = g.contract
    pair = finding.pair
    stars = [pair.s1] if pair.s1 == pair.s2 else [pair.s1, pair.s2]
    sure = True
    for n, anchor in enumerate(finding.anchors):
        if not g.functions[anchor[0]].is_public:
            continue
        frame1 = _Frame("t1")
        init = _tx_state(g, anchor[0], _pre_storage(prog), frame1)
        leg1, complete = _paths_to(g, init, anchor, cex.nodes,
                                   max_visits, budget, deadline)
        sure = sure and complete
        for k, st in enumerate(leg1):
            st.note_line(g.line_of(anchor))
            if simplify(st.path) == FALSE:
                continue
            boundary = _apply_boundary(st, summary, mode, prog, f"b{n}.{k}")
            for star in stars:
                fn2 = star[0]
                if not g.functions[fn2].is_public or (fn2, -1) not in cex.nodes:
                    continue
                start2 = _tx_state(g, fn2, boundary.storage, _Frame(f"t2.{k}"),
                                   path=boundary.path,
                                   assumptions=boundary.summary_assumptions,
                                   trace=boundary.trace)
                start2.note_line(g.functions[fn2].line)
                leg2, complete2 = _paths_to(g, start2, star, cex.nodes,
                                            max_visits, budget, deadline)
                sure = sure and complete2
                for st2 in leg2:
                    st2.note_line(g.line_of(star))
                    ends, finished = _commit(st2, g, max_visits, budget,
                                             deadline)
                    sure = sure and finished
                    for end in ends:
                        res = _check(solver, end)
                        if res.is_sat:
                            return Verdict("confirmed", res.model,
                                           "re-entrant path feasible",
                                           st2.trace)
                        if res.status == "unknown":
                            sure = False
    if sure:
        return Verdict("refuted", reason="no satisfiable re-entrant path")
    return Verdict("unknown", reason="exploration or solver inconclusive")


def refine_tod(cex: CexGraph, summary: Optional[ValueSummary],
               mode: str = "vsa", solver: Optional[Solver] = None,
               max_visits: int = 2, budget: int = 6000,
               deadline: Optional[float] = None) -> Verdict:
    """Double evaluation: can an interfering write change what is sent?

    Run A evaluates the anchor's function from an untouched pre-state and
    extracts the compared quantity: the Ether amount or destination at the
    call, or — for the guard variant — the guard condition's truth at the
    guard statement itself (a flipped guard means one ordering performs the
    transfer and the other does not).  Run B shares every unknown with run A
    but first applies one summarized write to the hazard variable; the
    finding is confirmed when some pair of runs admits different quantities.
    """
    finding, g = cex.finding, cex.icfg
    prog = g.contract
    solver = solver or BuiltinSolver()
    variant = finding.kind
    var = finding.pair.v
    sure = True
    try:
        for n, anchor in enumerate(finding.anchors):
            if not g.functions[anchor[0]].is_public:
                continue
            # The quantity is compared where the runs can first diverge: at
            # the guard for tod_transfer, at the call itself otherwise.
            at = finding.pair.s2 if variant == "tod_transfer" else anchor
            frame = _Frame("tx")  # shared: both runs replay the same inputs
            sigma = _pre_storage(prog)
            run_a, complete_a = _paths_to(
                g, _tx_state(g, anchor[0], sigma, frame), at,
                cex.nodes, max_visits, budget, deadline)
            sure = sure and complete_a
            interferences = _interfering_writes(summary, var, mode, prog, n)
            if not interferences:
                continue  # nothing an attacker runs can move this variable
            for storage_b, assume in interferences:
                run_b, complete_b = _paths_to(
                    g, _tx_state(g, anchor[0], storage_b, frame), at,
                    cex.nodes, max_visits, budget, deadline)
                sure = sure and complete_b
                for sa in run_a:
                    qa = _quantity(g, sa, at, variant)
                    for sb in run_b:
                        qb = _quantity(g, sb, at, variant)
                        goal = [sa.path, sb.path, *sa.summary_assumptions,
                                *sb.summary_assumptions, *assume,
                                mk_not(mk_eq(qa, qb))]
                        res = solver.check(goal)
                        if res.is_sat:
                            sa.note_line(g.line_of(at))
                            return Verdict("confirmed", res.model,
                                           "order changes the transfer",
                                           sa.trace)
                        if res.status == "unknown":
                            sure = False
    except SolverTimeoutError as exc:
        return Verdict("unknown", reason=str(exc))
    if sure:
        return Verdict("refuted", reason="transfer independent of ordering")
    return Verdict("unknown", reason="exploration or solver inconclusive")


def _interfering_writes(summary: Optional[ValueSummary], var: str, mode: str,
                        prog: ContractIR, n: int) -> list[tuple[dict, list]]:
    """Pre-states with one adversarial write to ``var`` applied, plus the
    conditions under which that write is possible."""
    sigma = _pre_storage(prog)
    if mode == "havoc":
        hv = Sym(f"w{n}$hv${var}", prog.storage_sorts.get(var, "uint"))
        return [(dict(sigma, **{var: hv}), [])]
    out = []
    for i, pair in enumerate(summary.for_var(var) if summary else ()):
        val = _rename_private(pair.value, f"w{n}.{i}")
        cond = simplify(_rename_private(pair.cond, f"w{n}.{i}"))
        if cond == FALSE or simplify(val) == sigma[var]:
            continue
        out.append((dict(sigma, **{var: simplify(val)}), [cond]))
    return out


def _quantity(g: ICFG, st: MachineState, node: NodeId, variant: str) -> Term:
    """What the two runs compare, read off the pre-execution state at node."""
    ins = g.instr_at(node)
    if variant == "tod_transfer":
        return _atom_term(ins.cond, st.regs)
    if variant == "tod_receiver":
        return _atom_term(ins.dest, st.regs)
    return _atom_term(ins.value, st.regs)


# ---------------------------------------------------------------------------
# concrete oracle


def concrete_run(prog: ContractIR, schedule: list, init: dict) -> dict:
    """Execute a transaction schedule concretely; return final storage.

    Each schedule item is ``(function, args, reentries)`` with an optional
    fourth element of environment overrides ({"sender", "msg.value",
    "balance"}).  ``reentries`` lists ``(call_line, function, args)`` triples:
    when an external call on that source line executes, the listed public
    function runs re-entrantly (once per triple, in order).  A failed require
    rolls back exactly the transaction or re-entrant call that raised it.
    """
    machine = _Concrete(prog, init)
    for i, item in enumerate(schedule):
        fn_name, args, reentries = item[0], item[1], list(item[2])
        extras = dict(item[3]) if len(item) > 3 else {}
        machine.run_tx(fn_name, args, reentries, extras, tx_index=i)
    return machine.storage


class _Concrete:
    MAX_STEPS = 100_000

    def __init__(self, prog: ContractIR, init: dict) -> None:
        self.prog = prog
        self.storage: dict = {}
        for v, sort in prog.storage_sorts.items():
            if v in prog.mappings:
                self.storage[v] = dict(init.get(v, {}))
            else:
                default: int | bool = False if sort == "bool" else 0
                self.storage[v] = init.get(v, default)
        self.balance = int(init.get("this.balance", 0))
        self.steps = self.MAX_STEPS

    def run_tx(self, fn_name: str, args: list, reentries: list,
               extras: dict, tx_index: int) -> None:
        snapshot = deepcopy(self.storage)
        balance0 = self.balance
        self.balance += int(extras.get("msg.value", 0))
        sender = extras.get("sender", 1000 + tx_index)
        self._reentries = reentries
        self._attacker = extras.get("attacker", 999)
        try:
            self.call(fn_name, args, sender,
                      int(extras.get("msg.value", 0)), depth=0)
        except RequireFailedError:
            self.storage = snapshot
            self.balance = balance0

    def call(self, fn_name: str, args: list, sender: int, value: int,
             depth: int) -> int | bool:
        fn = self.prog.function(fn_name)
        regs: dict = {p: (args[i] if i < len(args) else 0)
                      for i, p in enumerate(fn.params)}
        pc = 0
        ret: int | bool = 0
        while pc < len(fn.instrs):
            self.steps -= 1
            if self.steps < 0:
                raise AnalyzerError("concrete execution step budget exceeded")
            ins = fn.instrs[pc]
            pc += 1
            if isinstance(ins, Copy):
                regs[ins.dst] = self._atom(ins.src, regs)
            elif isinstance(ins, IRUnOp):
                a = self._atom(ins.a, regs)
                regs[ins.dst] = (not _truthy(a)) if ins.op == "!" \
                    else (-_word(a)) & MASK
            elif isinstance(ins, IRBinOp):
                regs[ins.dst] = _fold_binop(ins.op, self._atom(ins.a, regs),
                                            self._atom(ins.b, regs))
            elif isinstance(ins, LoadEnv):
                regs[ins.dst] = {"msg.sender": sender, "msg.value": value,
                                 "this": 7777, "this.balance": self.balance,
                                 }[ins.what]
            elif isinstance(ins, Havoc):
                if ins.dst is not None:
                    regs[ins.dst] = 0
            elif isinstance(ins, NewContract):
                if ins.dst is not None:
                    regs[ins.dst] = 0
            elif isinstance(ins, LoadStorage):
                regs[ins.dst] = self._load(ins.var, ins.index, regs)
            elif isinstance(ins, StoreStorage):
                self._store(ins.var, ins.index, self._atom(ins.value, regs),
                            regs)
            elif isinstance(ins, Require):
                if not _truthy(self._atom(ins.cond, regs)):
                    raise RequireFailedError(
                        f"{ins.kind} failed at line {ins.line}")
            elif isinstance(ins, Branch):
                pc = ins.on_true if _truthy(self._atom(ins.cond, regs)) \
                    else ins.on_false
            elif isinstance(ins, Jump):
                pc = ins.target
            elif isinstance(ins, Return):
                if ins.value is not None:
                    ret = self._atom(ins.value, regs)
                return ret
            elif isinstance(ins, ExtCall):
                result = self._extcall(ins, regs, depth)
                if ins.dst is not None:
                    regs[ins.dst] = result
            elif isinstance(ins, SelfDestruct):
                self.balance = 0
                return ret
            else:
                raise UnknownOpcodeError(type(ins).__name__)
        return ret

    def _extcall(self, ins: ExtCall, regs: dict, depth: int) -> int | bool:
        amount = _word(self._atom(ins.value, regs)) if ins.value is not None \
            else 0
        if amount > self.balance:
            if ins.kind == "transfer":
                raise RequireFailedError("transfer exceeds balance")
            return False  # send/call report failure, execution continues
        self.balance -= amount
        if ins.kind == "call" and depth == 0:
            self._maybe_reenter(ins.line)
        return True if ins.kind in ("call", "send", "transfer") else 0

    def _maybe_reenter(self, line: int) -> None:
        for i, (at_line, fn2, args2) in enumerate(self._reentries):
            if at_line == line:
                del self._reentries[i]
                snapshot = deepcopy(self.storage)
                balance0 = self.balance
                try:
                    self.call(fn2, args2, self._attacker, 0, depth=1)
                except RequireFailedError:
                    self.storage = snapshot  # inner revert only
                    self.balance = balance0
                return

    def _atom(self, a: Optional[Atom], regs: dict) -> int | bool:
        if isinstance(a, bool) or isinstance(a, int):
            return a
        if a is None:
            return 0
        return regs[a]

    def _load(self, var: str, index: Optional[Atom], regs: dict) -> int | bool:
        cell = self.storage[var]
        if var in self.prog.mappings:
            default: int | bool = False \
                if self.prog.storage_sorts.get(var) == "bool" else 0
            return cell.get(_word(self._atom(index, regs)), default)
        return cell

    def _store(self, var: str, index: Optional[Atom], value,
               regs: dict) -> None:
        if var in self.prog.mappings:
            self.storage[var][_word(self._atom(index, regs))] = value
        else:
            self.storage[var] = value


def _truthy(v: int | bool) -> bool:
    return bool(v)


def _word(v: int | bool) -> int:
    if isinstance(v, bool):
        return int(v)
    return v & MASK
