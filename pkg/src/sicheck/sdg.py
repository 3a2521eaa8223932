"""Storage dependency graph construction.

The SDG has one node per storage variable and one per statement that touches
storage, with labeled edges:

    W  statement -> variable   (statement writes the variable)
    D  variable  -> statement  (statement's data depends on the variable)
    O  statement -> statement  (ordering)

O-edges come in three kinds, all derived by the Datalog engine:

    consecutive   within a function, s1 precedes s2 with no other SDG
                  statement strictly between them (transitive reduction of
                  reach restricted to SDG statements);
    re-entry      every external call may transfer control to every public
                  function's entry (attacker-controlled callee);
    return        every public function's exit returns to the statement
                  after any external call.

The original call->successor flow edge stays in the control-flow relation,
preserving the interleaving where the callee does nothing.

This module also implements cross-contract composition: a delegatecall whose
target contract is statically known (declared contract type, untainted
destination) is merged into the caller — callee code operates on the
caller's storage, matching the EVM's delegate semantics — and a ``new C()``
site inlines the child constructor over a prefixed copy of the child's
storage.  Unresolvable delegatecalls simply stay external-call facts.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Callable, Optional

from .datalog import L, Neq, NotL, Rule, Var
from .errors import UnsupportedFeatureError
from .facts import FactBase, RuleEngine, taint_call_destinations
from .icfg import ICFG, NodeId
from .ir import (ContractIR, Copy, ExtCall, FunctionIR, Havoc, IfNode, Instr,
                 LoadStorage, NewContract, StoreStorage, Straight, TreeNode,
                 WhileNode)
from .lower import _flatten

_S, _S1, _S2, _X, _V, _M, _N, _E, _CV = (
    Var("S"), Var("S1"), Var("S2"), Var("X"), Var("V"), Var("M"), Var("N"),
    Var("E"), Var("CV"))

SDG_RULES = [
    Rule(L("sdg_w", _S, _V), [L("write", _S, _V), L("storage", _V)]),
    Rule(L("sdg_d", _V, _S), [L("depend", _S, _V), L("storage", _V)]),
    Rule(L("sdg_stmt", _S), [L("sdg_w", _S, _V)]),
    Rule(L("sdg_stmt", _S), [L("sdg_d", _V, _S)]),
    # sreach is reach restricted to distinct same-function SDG statements,
    # so the in-between witness X is automatically another SDG statement.
    Rule(L("between", _S1, _S2), [L("sreach", _S1, _X), L("sreach", _X, _S2)]),
    Rule(L("o_consec", _S1, _S2),
         [L("sreach", _S1, _S2), NotL("between", _S1, _S2)]),
    Rule(L("o_reentry", _E, _N),
         [L("extcall", _E, _CV), L("entry", _N, _M), L("public", _M)]),
    Rule(L("o_return", _X, _S2),
         [L("exit", _X, _M), L("public", _M), L("extcall", _E, _CV),
          L("succ", _E, _S2)]),
]


@dataclass
class SDG:
    var_nodes: set[str] = field(default_factory=set)
    stmt_nodes: set[NodeId] = field(default_factory=set)
    w_edges: set[tuple[NodeId, str]] = field(default_factory=set)
    d_edges: set[tuple[str, NodeId]] = field(default_factory=set)
    o_edges: set[tuple[NodeId, NodeId]] = field(default_factory=set)
    # the two cross-function O-edge families, kept apart for reach queries
    reentry_edges: set[tuple[NodeId, NodeId]] = field(default_factory=set)
    return_edges: set[tuple[NodeId, NodeId]] = field(default_factory=set)
    entry_nodes: set[NodeId] = field(default_factory=set)
    exit_nodes: set[NodeId] = field(default_factory=set)

    def _node(self, n: NodeId) -> str:
        if n in self.entry_nodes:
            return f"{n[0]}:entry"
        if n in self.exit_nodes:
            return f"{n[0]}:exit"
        return f"{n[0]}:{n[1]}"

    def to_text(self) -> str:
        lines = [f"var {v}" for v in sorted(self.var_nodes)]
        lines += [f"stmt {self._node(s)}" for s in sorted(self.stmt_nodes)]
        lines += sorted(f"W {self._node(s)} -> {v}" for s, v in self.w_edges)
        lines += sorted(f"D {v} -> {self._node(s)}" for v, s in self.d_edges)
        lines += sorted(f"O {self._node(a)} -> {self._node(b)}"
                        for a, b in self.o_edges)
        return "\n".join(lines) + "\n"


def build_sdg(facts: FactBase) -> SDG:
    """Evaluate the SDG construction rules over a saturated fact base."""
    stmts = {s for s, _ in facts.tuples("write")} | \
            {s for s, _ in facts.tuples("depend")}
    edb: dict[str, set[tuple]] = {
        rel: set(facts.tuples(rel))
        for rel in ("write", "depend", "storage", "extcall", "entry", "exit",
                    "public", "succ")
    }
    edb["sreach"] = {
        (a, b) for (a, b) in facts.tuples("reach")
        if a != b and a in stmts and b in stmts and a[0] == b[0]
    }
    db = RuleEngine(SDG_RULES).saturate(edb)
    g = SDG()
    g.w_edges = set(db.get("sdg_w", ()))
    g.d_edges = set(db.get("sdg_d", ()))
    g.stmt_nodes = {s for s, in db.get("sdg_stmt", ())}
    g.var_nodes = {v for _, v in g.w_edges} | {v for v, _ in g.d_edges}
    g.reentry_edges = set(db.get("o_reentry", ()))
    g.return_edges = set(db.get("o_return", ()))
    g.o_edges = set(db.get("o_consec", ())) | g.reentry_edges | g.return_edges
    g.entry_nodes = {n for n, _ in facts.tuples("entry")}
    g.exit_nodes = {n for n, _ in facts.tuples("exit")}
    return g


# ---------------------------------------------------------------------------
# Cross-contract composition


def combine_for_delegate_or_create(prog: ContractIR,
                                   callee: Optional[ContractIR] = None,
                                   callees: Optional[dict[str, ContractIR]] = None,
                                   max_rounds: int = 8) -> ContractIR:
    """Merge statically-resolvable delegatecall/new targets into ``prog``.

    Returns a new IRProgram; ``prog`` itself is never mutated.  A
    delegatecall with a tainted or undeclared destination is left alone (it
    already contributes an external-call fact).
    """
    available: dict[str, ContractIR] = dict(callees or {})
    if callee is not None:
        available[callee.name] = callee
    available.pop(prog.name, None)
    if not available:
        return prog
    prog = copy.deepcopy(prog)
    for _ in range(max_rounds):
        site = _find_site(prog, available)
        if site is None:
            break
        fn, ins = site
        if isinstance(ins, ExtCall):
            _merge_delegate(prog, fn, ins, available[ins.dest_decl])
        else:
            _inline_child_constructor(prog, fn, ins, available[ins.contract])
        _reflatten(fn)
    return prog


def _find_site(prog: ContractIR, available: dict[str, ContractIR]) \
        -> Optional[tuple[FunctionIR, Instr]]:
    graph = ICFG(prog)
    tainted = taint_call_destinations(graph, prog)
    for fn in prog.all_functions():
        for i, ins in enumerate(fn.instrs):
            if isinstance(ins, ExtCall) and ins.kind == "delegate" \
                    and ins.dest_decl in available \
                    and (fn.name, i) not in tainted:
                return fn, ins
            if isinstance(ins, NewContract) and ins.contract in available:
                return fn, ins
    return None


def _merge_delegate(prog: ContractIR, fn: FunctionIR, ins: ExtCall,
                    callee: ContractIR) -> None:
    # callee code runs against the caller's storage: unify variables by name
    for var, sort in callee.storage_sorts.items():
        if var not in prog.storage_sorts:
            prog.storage_sorts[var] = sort
            if var in callee.mappings:
                prog.mappings.add(var)
            if var in callee.contract_types:
                prog.contract_types[var] = callee.contract_types[var]
    have = {f.name for f in prog.functions}
    for f in callee.public_functions:
        if f.name not in have:
            prog.functions.append(copy.deepcopy(f))
    done = Havoc(dst=ins.dst, note=f"delegate to {callee.name}", line=ins.line)
    if not _replace_instr(fn.tree, ins, [done]):
        raise UnsupportedFeatureError(
            f"cannot rewrite delegatecall site in {fn.name}", ins.line, 1)


def _inline_child_constructor(prog: ContractIR, fn: FunctionIR,
                              ins: NewContract, child: ContractIR) -> None:
    prefix = f"{child.name}$"
    for var, sort in child.storage_sorts.items():
        prog.storage_sorts.setdefault(prefix + var, sort)
        if var in child.mappings:
            prog.mappings.add(prefix + var)
    replacement: list[Instr] = []
    if child.constructor is not None:
        ctor = copy.deepcopy(child.constructor)
        for cins in _all_tree_instrs(ctor.tree):
            _rename_instr(cins, lambda r: prefix + r,
                          lambda v: prefix + v)
            if not cins.line:
                cins.line = ins.line
        binds = [Copy(dst=prefix + p, src=a, line=ins.line)
                 for p, a in zip(ctor.params, ins.args)]
        replacement = binds + list(_straight_instrs_or_raise(ctor.tree, ins))
    replacement.append(Havoc(dst=ins.dst, note=f"new {child.name}",
                             line=ins.line))
    if not _replace_instr(fn.tree, ins, replacement):
        raise UnsupportedFeatureError(
            f"cannot rewrite contract-creation site in {fn.name}", ins.line, 1)


def _straight_instrs_or_raise(nodes: list[TreeNode], site: Instr) -> list[Instr]:
    out: list[Instr] = []
    for node in nodes:
        if not isinstance(node, Straight):
            raise UnsupportedFeatureError(
                "child constructors with control flow cannot be inlined",
                site.line, 1)
        out.extend(node.instrs)
    return out


def _all_tree_instrs(nodes: list[TreeNode]):
    for node in nodes:
        if isinstance(node, Straight):
            yield from node.instrs
        elif isinstance(node, IfNode):
            yield from node.cond_instrs
            yield node.branch
            yield from _all_tree_instrs(node.then)
            yield from _all_tree_instrs(node.orelse)
        elif isinstance(node, WhileNode):
            yield from node.cond_instrs
            yield node.branch
            yield from _all_tree_instrs(node.body)


_ATOM_FIELDS = ("dst", "src", "a", "b", "cond", "value", "dest", "index")


def _rename_instr(ins: Instr, reg: Callable[[str], str],
                  var: Callable[[str], str]) -> None:
    for name in _ATOM_FIELDS:
        v = getattr(ins, name, None)
        if isinstance(v, str):
            setattr(ins, name, reg(v))
    if isinstance(ins, ExtCall) or isinstance(ins, NewContract):
        ins.args = [reg(a) if isinstance(a, str) else a for a in ins.args]
    if isinstance(ins, (LoadStorage, StoreStorage)):
        ins.var = var(ins.var)


def _replace_instr(nodes: list[TreeNode], target: Instr,
                   replacement: list[Instr]) -> bool:
    for node in nodes:
        if isinstance(node, Straight):
            for i, ins in enumerate(node.instrs):
                if ins is target:
                    node.instrs[i:i + 1] = replacement
                    return True
        elif isinstance(node, IfNode):
            for i, ins in enumerate(node.cond_instrs):
                if ins is target:
                    node.cond_instrs[i:i + 1] = replacement
                    return True
            if _replace_instr(node.then, target, replacement) or \
                    _replace_instr(node.orelse, target, replacement):
                return True
        elif isinstance(node, WhileNode):
            for i, ins in enumerate(node.cond_instrs):
                if ins is target:
                    node.cond_instrs[i:i + 1] = replacement
                    return True
            if _replace_instr(node.body, target, replacement):
                return True
    return False


def _reflatten(fn: FunctionIR) -> None:
    flat: list[Instr] = []
    _flatten(fn.tree, flat)
    for i, ins in enumerate(flat):
        ins.idx = i
    fn.instrs = flat
