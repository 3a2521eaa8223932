"""Value summaries: what values each storage variable can take, and when.

For every public function the walker symbolically executes the structured
instruction tree starting from an uninterpreted pre-state (each variable v
bound to the symbol ``pre$v``) with parameters bound to ``arg$fn$p`` symbols
and everything else environmental bound to ``hv$fn$n`` havoc symbols.  Every
store of expression e under path condition π contributes one summary pair
⟨e, π⟩.  The union over all public functions is the contract's summary: an
over-approximation of the single-transaction state transitions an arbitrary
caller can trigger.  Keeping the current value is always possible (calling
nothing), so the identity pair is left implicit.

The refinement layer instantiates these pairs at re-entrancy boundaries: the
adversary may run any public function between an external call and the
statements after it, so the storage seen on return is either unchanged or
one of the summarized values whose condition held.

Loops are summarized by havocking the variables their bodies write — any
value, whenever the loop is reachable — trading precision for soundness
without iteration bounds.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .ir import (Atom, ContractIR, Copy, ExtCall, FunctionIR, Havoc, IfNode,
                 LoadEnv, LoadStorage, NewContract, Require, Return,
                 SelfDestruct, StoreStorage, Straight, TreeNode, WhileNode,
                 tree_instrs, written_storage_vars)
from .ir import BinOp as IRBinOp
from .ir import UnOp as IRUnOp
from .terms import (FALSE, MASK, TRUE, Binop, Cases, Const, Sym, Term, Unop,
                    conjoin, mk_not, mk_or, simplify, to_sexpr)

PRE_PREFIX = "pre$"
ARG_PREFIX = "arg$"
HAVOC_PREFIX = "hv$"


def pre_sym(var: str, sort: str = "uint") -> Sym:
    """The symbol standing for a variable's value before the transaction."""
    return Sym(PRE_PREFIX + var, sort)


def arg_sym(fn: str, param: str, sort: str = "uint") -> Sym:
    return Sym(f"{ARG_PREFIX}{fn}${param}", sort)


def is_boundary_sym(name: str) -> bool:
    """Symbols private to a summary pair (renamed apart at each application)."""
    return name.startswith(ARG_PREFIX) or name.startswith(HAVOC_PREFIX)


@dataclass(frozen=True)
class SummaryPair:
    value: Term
    cond: Term

    def __str__(self) -> str:
        return f"<{to_sexpr(self.value)}, {to_sexpr(self.cond)}>"


@dataclass
class ValueSummary:
    pairs: dict[str, list[SummaryPair]] = field(default_factory=dict)

    def for_var(self, var: str) -> list[SummaryPair]:
        return self.pairs.get(var, [])

    def vars(self) -> set[str]:
        return set(self.pairs)

    def add(self, var: str, value: Term, cond: Term) -> None:
        value, cond = simplify(value), simplify(cond)
        if cond == FALSE:
            return
        pair = SummaryPair(value, cond)
        bucket = self.pairs.setdefault(var, [])
        if pair not in bucket:
            bucket.append(pair)

    def to_text(self) -> str:
        lines = []
        for var in sorted(self.pairs):
            lines.append(f"{var}:")
            for p in self.pairs[var]:
                lines.append(f"  {p}")
        return "\n".join(lines) + ("\n" if lines else "")


def mu_merge(b: Term, v1: Term, v2: Term) -> Term:
    """Join of two branch values under branch condition b."""
    v1, v2 = simplify(v1), simplify(v2)
    if v1 == v2:
        return v1
    return simplify(Cases(((b, v1),), v2))


# ---------------------------------------------------------------------------
# per-function walk


@dataclass
class _Env:
    regs: dict[str, Term]
    delta: dict[str, Term]
    pi: tuple[Term, ...]

    def fork(self) -> "_Env":
        return _Env(dict(self.regs), dict(self.delta), self.pi)

    def cond(self) -> Term:
        return conjoin(list(self.pi))


class _FunctionWalker:
    def __init__(self, prog: ContractIR, fn: FunctionIR,
                 out: ValueSummary) -> None:
        self.prog = prog
        self.fn = fn
        self.out = out
        self._fresh = itertools.count()
        self._env_cache: dict[str, Term] = {}

    def run(self) -> None:
        regs = {p: arg_sym(self.fn.name, p, self.fn.param_sorts.get(p, "uint"))
                for p in self.fn.params}
        delta = {v: pre_sym(v, sort)
                 for v, sort in self.prog.storage_sorts.items()}
        env = _Env(regs, delta, ())
        self._nodes(env, self.fn.tree)

    # -- helpers ---------------------------------------------------------

    def _havoc(self, sort: str = "uint") -> Sym:
        return Sym(f"{HAVOC_PREFIX}{self.fn.name}${next(self._fresh)}", sort)

    def _atom(self, a: Optional[Atom], regs: dict[str, Term]) -> Term:
        if isinstance(a, bool):
            return Const(a)
        if isinstance(a, int):
            return Const(a & MASK)
        if a is None:
            return Const(0)
        return regs.get(a, Const(0))

    def _var_sort(self, var: str) -> str:
        return self.prog.storage_sorts.get(var, "uint")

    # -- tree traversal ---------------------------------------------------

    def _nodes(self, env: _Env, nodes: Iterable[TreeNode]) -> None:
        for node in nodes:
            if isinstance(node, Straight):
                self._straight(env, node.instrs)
            elif isinstance(node, IfNode):
                self._if(env, node)
            elif isinstance(node, WhileNode):
                self._while(env, node)

    def _if(self, env: _Env, node: IfNode) -> None:
        self._straight(env, node.cond_instrs)
        b = simplify(self._atom(node.cond, env.regs))
        base = len(env.pi)
        then_env = env.fork()
        then_env.pi += (b,)
        self._nodes(then_env, node.then)
        else_env = env.fork()
        else_env.pi += (mk_not(b),)
        self._nodes(else_env, node.orelse)
        for v in env.delta:
            env.delta[v] = mu_merge(b, then_env.delta[v], else_env.delta[v])
        for r in set(then_env.regs) | set(else_env.regs):
            t, e = then_env.regs.get(r), else_env.regs.get(r)
            env.regs[r] = mu_merge(b, t, e) if t is not None and e is not None \
                else (t if t is not None else e)
        tail = mk_or(conjoin(list(then_env.pi[base:])),
                     conjoin(list(else_env.pi[base:])))
        if tail != TRUE:
            env.pi += (tail,)

    def _while(self, env: _Env, node: WhileNode) -> None:
        self._straight(env, node.cond_instrs)
        cond = env.cond()
        for v in sorted(written_storage_vars(node.body)):
            hv = self._havoc(self._var_sort(v))
            self.out.add(v, hv, cond)
            env.delta[v] = hv
        body_instrs = list(node.cond_instrs) + list(tree_instrs(node.body))
        for ins in body_instrs:
            dst = ins.defined_reg()
            if dst is not None:
                env.regs[dst] = self._havoc()

    def _straight(self, env: _Env, instrs: Iterable) -> None:
        for ins in instrs:
            if isinstance(ins, Copy):
                env.regs[ins.dst] = self._atom(ins.src, env.regs)
            elif isinstance(ins, IRUnOp):
                env.regs[ins.dst] = simplify(
                    Unop(ins.op, self._atom(ins.a, env.regs)))
            elif isinstance(ins, IRBinOp):
                env.regs[ins.dst] = simplify(
                    Binop(ins.op, self._atom(ins.a, env.regs),
                          self._atom(ins.b, env.regs)))
            elif isinstance(ins, LoadEnv):
                env.regs[ins.dst] = self._load_env(ins.what)
            elif isinstance(ins, Havoc):
                if ins.dst is not None:
                    env.regs[ins.dst] = self._havoc()
            elif isinstance(ins, LoadStorage):
                env.regs[ins.dst] = env.delta.get(
                    ins.var, pre_sym(ins.var, self._var_sort(ins.var)))
            elif isinstance(ins, StoreStorage):
                self._store(env, ins)
            elif isinstance(ins, Require):
                env.pi += (simplify(self._atom(ins.cond, env.regs)),)
            elif isinstance(ins, Return):
                env.pi += (FALSE,)  # nothing below this point executes
            elif isinstance(ins, ExtCall):
                if ins.dst is not None:
                    env.regs[ins.dst] = self._havoc()
            elif isinstance(ins, SelfDestruct):
                env.pi += (FALSE,)
            elif isinstance(ins, NewContract):
                if ins.dst is not None:
                    env.regs[ins.dst] = self._havoc("addr")
            # Branch/Jump never occur inside Straight blocks

    def _load_env(self, what: str) -> Term:
        if what == "this.balance":  # changes as Ether moves; never stable
            return self._havoc()
        if what not in self._env_cache:
            sort = "addr" if what in ("msg.sender", "this") else "uint"
            self._env_cache[what] = self._havoc(sort)
        return self._env_cache[what]

    def _store(self, env: _Env, ins: StoreStorage) -> None:
        value = simplify(self._atom(ins.value, env.regs))
        self.out.add(ins.var, value, env.cond())
        if ins.var in self.prog.mappings:
            # one cell among many changed: old and new value both possible
            keep = self._havoc("bool")
            env.delta[ins.var] = simplify(
                Cases(((keep, env.delta[ins.var]),), value))
        else:
            env.delta[ins.var] = value


def compute_summary(prog: ContractIR) -> ValueSummary:
    """Union of per-public-function store summaries (identity left implicit)."""
    out = ValueSummary()
    for fn in prog.public_functions:
        _FunctionWalker(prog, fn, out).run()
    return out
