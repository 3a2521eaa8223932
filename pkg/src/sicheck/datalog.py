"""A small bottom-up Datalog engine.

Rules are Horn clauses over named relations whose tuples may hold arbitrary
hashable values (here: graph node ids, variable names, lines).  The engine
supports negated body literals under stratified negation — a negation inside
a recursive cycle raises StratificationError — plus comparison constraints
between bound values.  Evaluation is semi-naive: each iteration joins against
only the facts newly derived in the previous one.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Iterable, Optional, Union

from .errors import StratificationError

Value = Hashable


@dataclass(frozen=True)
class Var:
    name: str

    def __repr__(self) -> str:
        return self.name


Arg = Union[Var, Value]


@dataclass(frozen=True)
class Literal:
    rel: str
    args: tuple
    negated: bool = False

    def __repr__(self) -> str:
        inner = f"{self.rel}({', '.join(map(repr, self.args))})"
        return f"!{inner}" if self.negated else inner


@dataclass(frozen=True)
class Constraint:
    op: str  # "==", "!=", "<", "<="
    a: Arg
    b: Arg

    def __repr__(self) -> str:
        return f"{self.a!r} {self.op} {self.b!r}"


BodyItem = Union[Literal, Constraint]

_OPS = {
    "==": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
}


def L(rel: str, *args: Arg) -> Literal:
    return Literal(rel, tuple(args))


def NotL(rel: str, *args: Arg) -> Literal:
    return Literal(rel, tuple(args), negated=True)


def Neq(a: Arg, b: Arg) -> Constraint:
    return Constraint("!=", a, b)


def _vars_of(args: Iterable[Arg]) -> set[Var]:
    return {a for a in args if isinstance(a, Var)}


class Rule:
    def __init__(self, head: Literal, body: list[BodyItem]):
        if head.negated:
            raise ValueError("rule head must be a positive literal")
        bound: set[Var] = set()
        for item in body:
            if isinstance(item, Literal) and not item.negated:
                bound |= _vars_of(item.args)
        demanded = _vars_of(head.args)
        for item in body:
            if isinstance(item, Literal) and item.negated:
                demanded |= _vars_of(item.args)
            elif isinstance(item, Constraint):
                demanded |= _vars_of((item.a, item.b))
        unsafe = demanded - bound
        if unsafe:
            names = ", ".join(sorted(v.name for v in unsafe))
            raise ValueError(f"unsafe rule: {names} not bound by a positive literal")
        self.head = head
        self.body = list(body)

    def __repr__(self) -> str:
        return f"{self.head!r} :- {', '.join(map(repr, self.body))}"


def _subst(args: tuple, env: dict[Var, Value]) -> tuple:
    return tuple(env[a] if isinstance(a, Var) and a in env else a for a in args)


def _unify(args: tuple, tup: tuple, env: dict[Var, Value]) \
        -> Optional[dict[Var, Value]]:
    if len(args) != len(tup):
        return None
    out = env
    for a, v in zip(args, tup):
        if isinstance(a, Var):
            if a in out:
                if out[a] != v:
                    return None
            else:
                if out is env:
                    out = dict(env)
                out[a] = v
        elif a != v:
            return None
    return out if out is not env else dict(env)


Database = dict[str, set[tuple]]


class Engine:
    """Evaluates a fixed rule set over extensional fact bases."""

    def __init__(self, rules: list[Rule]):
        self.rules = list(rules)
        self.idb = {r.head.rel for r in rules}
        self.strata = self._stratify()

    # -- stratification ---------------------------------------------------

    def _stratify(self) -> list[list[Rule]]:
        deps: dict[str, set[str]] = {rel: set() for rel in self.idb}
        neg_deps: set[tuple[str, str]] = set()
        for rule in self.rules:
            for item in rule.body:
                if isinstance(item, Literal) and item.rel in self.idb:
                    deps[rule.head.rel].add(item.rel)
                    if item.negated:
                        neg_deps.add((rule.head.rel, item.rel))
        sccs = _tarjan(deps)
        comp: dict[str, int] = {}
        for i, scc in enumerate(sccs):
            for rel in scc:
                comp[rel] = i
        for head, dep in neg_deps:
            if comp[head] == comp[dep]:
                raise StratificationError(
                    f"negation cycle between {head!r} and {dep!r}")
        # _tarjan emits SCCs in reverse topological order: dependencies first
        order = {rel: i for i, scc in enumerate(sccs) for rel in scc}
        strata: dict[int, list[Rule]] = {}
        for rule in self.rules:
            strata.setdefault(order[rule.head.rel], []).append(rule)
        return [strata[i] for i in sorted(strata)]

    # -- evaluation -------------------------------------------------------

    def saturate(self, edb: Database) -> Database:
        """Return the EDB extended with every derivable IDB fact."""
        db: Database = {rel: set(tups) for rel, tups in edb.items()}
        for rules in self.strata:
            self._eval_stratum(rules, db)
        return db

    def _eval_stratum(self, rules: list[Rule], db: Database) -> None:
        stratum_rels = {r.head.rel for r in rules}
        delta: Database = {}
        for rule in rules:
            for tup in self._eval_rule(rule, db, None, None):
                if tup not in db.get(rule.head.rel, ()):
                    db.setdefault(rule.head.rel, set()).add(tup)
                    delta.setdefault(rule.head.rel, set()).add(tup)
        while delta:
            new: Database = {}
            for rule in rules:
                for pivot, item in enumerate(rule.body):
                    if not (isinstance(item, Literal) and not item.negated
                            and item.rel in stratum_rels):
                        continue
                    if item.rel not in delta:
                        continue
                    for tup in self._eval_rule(rule, db, pivot, delta):
                        if tup not in db.get(rule.head.rel, ()):
                            db.setdefault(rule.head.rel, set()).add(tup)
                            new.setdefault(rule.head.rel, set()).add(tup)
            delta = new

    def _eval_rule(self, rule: Rule, db: Database, pivot: Optional[int],
                   delta: Optional[Database]) -> set[tuple]:
        results: set[tuple] = set()

        def rec(i: int, env: dict[Var, Value]) -> None:
            if i == len(rule.body):
                results.add(_subst(rule.head.args, env))
                return
            item = rule.body[i]
            if isinstance(item, Constraint):
                a = item.a if not isinstance(item.a, Var) else env[item.a]
                b = item.b if not isinstance(item.b, Var) else env[item.b]
                if _OPS[item.op](a, b):
                    rec(i + 1, env)
                return
            if item.negated:
                tup = _subst(item.args, env)
                if tup not in db.get(item.rel, ()):
                    rec(i + 1, env)
                return
            source = delta[item.rel] if i == pivot else db.get(item.rel, set())
            bound = _subst(item.args, env)
            if not any(isinstance(a, Var) for a in bound):
                if bound in source:
                    rec(i + 1, env)
                return
            for tup in source:
                env2 = _unify(item.args, tup, env)
                if env2 is not None:
                    rec(i + 1, env2)

        rec(0, {})
        return results


def _tarjan(graph: dict[str, set[str]]) -> list[list[str]]:
    """Tarjan's SCC algorithm; components come out dependencies-first."""
    index: dict[str, int] = {}
    low: dict[str, int] = {}
    on_stack: set[str] = set()
    stack: list[str] = []
    out: list[list[str]] = []
    counter = [0]

    def strongconnect(v: str) -> None:
        index[v] = low[v] = counter[0]
        counter[0] += 1
        stack.append(v)
        on_stack.add(v)
        for w in graph.get(v, ()):
            if w not in graph:
                continue
            if w not in index:
                strongconnect(w)
                low[v] = min(low[v], low[w])
            elif w in on_stack:
                low[v] = min(low[v], index[w])
        if low[v] == index[v]:
            scc = []
            while True:
                w = stack.pop()
                on_stack.discard(w)
                scc.append(w)
                if w == v:
                    break
            out.append(scc)

    for v in sorted(graph):
        if v not in index:
            strongconnect(v)
    return out
