"""Symbolic expression language shared by the summary, refinement and solver layers.

Terms model 256-bit unsigned machine words plus booleans.  Arithmetic wraps
modulo 2**256 and division by zero yields zero, matching the concrete
interpreter, so symbolic and concrete evaluation never disagree.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Mapping

WIDTH = 256
MODULUS = 1 << WIDTH
MASK = MODULUS - 1

ARITH_OPS = ("+", "-", "*", "/", "%")
CMP_OPS = ("==", "!=", "<", "<=", ">", ">=")
BOOL_OPS = ("&&", "||")


class Term:
    """Base class for immutable symbolic values."""

    __slots__ = ()


@dataclass(frozen=True, slots=True)
class Const(Term):
    value: int | bool

    def __repr__(self) -> str:
        return f"Const({self.value!r})"


@dataclass(frozen=True, slots=True)
class Sym(Term):
    """A free symbol. sort is 'uint', 'bool' or 'addr' (addresses are words)."""

    name: str
    sort: str = "uint"

    def __repr__(self) -> str:
        return f"Sym({self.name!r})"


@dataclass(frozen=True, slots=True)
class Unop(Term):
    op: str  # "!" logical not, "-" arithmetic negation
    a: Term


@dataclass(frozen=True, slots=True)
class Binop(Term):
    op: str
    a: Term
    b: Term


@dataclass(frozen=True, slots=True)
class Cases(Term):
    """Guarded union with first-match-wins semantics.

    branches is a tuple of (guard, value); if no guard holds the value is
    default.  Used for branch joins and for summary application choices.
    """

    branches: tuple[tuple[Term, Term], ...]
    default: Term


TRUE = Const(True)
FALSE = Const(False)
ZERO = Const(0)


def _as_word(v: int | bool) -> int:
    if isinstance(v, bool):
        return 1 if v else 0
    return v & MASK


def _as_bool(v: int | bool) -> bool:
    if isinstance(v, bool):
        return v
    return v != 0


def mk_not(a: Term) -> Term:
    return simplify(Unop("!", a))


def mk_and(a: Term, b: Term) -> Term:
    return simplify(Binop("&&", a, b))


def mk_or(a: Term, b: Term) -> Term:
    return simplify(Binop("||", a, b))


def mk_eq(a: Term, b: Term) -> Term:
    return simplify(Binop("==", a, b))


def conjoin(parts: list[Term]) -> Term:
    out: Term = TRUE
    for p in parts:
        out = mk_and(out, p)
    return out


def _fold_binop(op: str, a: int | bool, b: int | bool) -> int | bool:
    if op in ARITH_OPS:
        x, y = _as_word(a), _as_word(b)
        if op == "+":
            return (x + y) & MASK
        if op == "-":
            return (x - y) & MASK
        if op == "*":
            return (x * y) & MASK
        if op == "/":
            return 0 if y == 0 else x // y
        return 0 if y == 0 else x % y
    if op in CMP_OPS:
        x, y = _as_word(a), _as_word(b)
        return {
            "==": x == y, "!=": x != y,
            "<": x < y, "<=": x <= y, ">": x > y, ">=": x >= y,
        }[op]
    if op == "&&":
        return _as_bool(a) and _as_bool(b)
    if op == "||":
        return _as_bool(a) or _as_bool(b)
    raise ValueError(f"unknown operator {op!r}")


def _negates(a: Term, b: Term) -> bool:
    """True when one side is syntactically the negation of the other."""
    return (isinstance(b, Unop) and b.op == "!" and b.a == a) or \
           (isinstance(a, Unop) and a.op == "!" and a.a == b)


def simplify(t: Term) -> Term:
    """Bottom-up constant folding plus a few boolean identities.

    The result is equivalent to the input on every assignment; callers rely
    on this when they prune decidably-false paths early.
    """
    if isinstance(t, (Const, Sym)):
        return t
    if isinstance(t, Unop):
        a = simplify(t.a)
        if t.op == "!":
            if isinstance(a, Const):
                return Const(not _as_bool(a.value))
            if isinstance(a, Unop) and a.op == "!":
                return a.a
            return Unop("!", a)
        if isinstance(a, Const):
            return Const((-_as_word(a.value)) & MASK)
        return Unop("-", a)
    if isinstance(t, Binop):
        a = simplify(t.a)
        b = simplify(t.b)
        if isinstance(a, Const) and isinstance(b, Const):
            return Const(_fold_binop(t.op, a.value, b.value))
        if t.op == "&&":
            if a == FALSE or b == FALSE:
                return FALSE
            if isinstance(a, Const) and _as_bool(a.value):
                return b
            if isinstance(b, Const) and _as_bool(b.value):
                return a
            if _negates(a, b):
                return FALSE
        elif t.op == "||":
            if isinstance(a, Const):
                return TRUE if _as_bool(a.value) else b
            if isinstance(b, Const):
                return TRUE if _as_bool(b.value) else a
            if _negates(a, b):
                return TRUE
        elif t.op == "==":
            if a == b:
                return TRUE
            # normalize comparisons against boolean literals
            if isinstance(b, Const) and isinstance(b.value, bool):
                return a if b.value else simplify(Unop("!", a))
            if isinstance(a, Const) and isinstance(a.value, bool):
                return b if a.value else simplify(Unop("!", b))
        elif t.op == "!=" and a == b:
            return FALSE
        return Binop(t.op, a, b)
    if isinstance(t, Cases):
        branches: list[tuple[Term, Term]] = []
        default = simplify(t.default)
        for guard, value in t.branches:
            g = simplify(guard)
            if g == FALSE:
                continue
            v = simplify(value)
            if g == TRUE:
                default = v
                break
            branches.append((g, v))
        if not branches:
            return default
        if all(v == default for _, v in branches):
            return default
        return Cases(tuple(branches), default)
    raise ValueError(f"not a term: {t!r}")


def free_syms(t: Term) -> set[Sym]:
    out: set[Sym] = set()
    stack = [t]
    while stack:
        cur = stack.pop()
        if isinstance(cur, Sym):
            out.add(cur)
        elif isinstance(cur, Unop):
            stack.append(cur.a)
        elif isinstance(cur, Binop):
            stack.append(cur.a)
            stack.append(cur.b)
        elif isinstance(cur, Cases):
            stack.append(cur.default)
            for g, v in cur.branches:
                stack.append(g)
                stack.append(v)
    return out


def subst(t: Term, env: Mapping[str, Term]) -> Term:
    """Replace symbols by terms, by symbol name."""
    if isinstance(t, Const):
        return t
    if isinstance(t, Sym):
        return env.get(t.name, t)
    if isinstance(t, Unop):
        return Unop(t.op, subst(t.a, env))
    if isinstance(t, Binop):
        return Binop(t.op, subst(t.a, env), subst(t.b, env))
    if isinstance(t, Cases):
        return Cases(
            tuple((subst(g, env), subst(v, env)) for g, v in t.branches),
            subst(t.default, env),
        )
    raise ValueError(f"not a term: {t!r}")


def evaluate(t: Term, env: Mapping[str, int | bool]) -> int | bool:
    """Total concrete evaluation under an assignment of all free symbols."""
    if isinstance(t, Const):
        return t.value
    if isinstance(t, Sym):
        return env[t.name]
    if isinstance(t, Unop):
        a = evaluate(t.a, env)
        if t.op == "!":
            return not _as_bool(a)
        return (-_as_word(a)) & MASK
    if isinstance(t, Binop):
        # short-circuit so partial assignments of dead branches still work
        if t.op == "&&":
            return _as_bool(evaluate(t.a, env)) and _as_bool(evaluate(t.b, env))
        if t.op == "||":
            return _as_bool(evaluate(t.a, env)) or _as_bool(evaluate(t.b, env))
        return _fold_binop(t.op, evaluate(t.a, env), evaluate(t.b, env))
    if isinstance(t, Cases):
        for g, v in t.branches:
            if _as_bool(evaluate(g, env)):
                return evaluate(v, env)
        return evaluate(t.default, env)
    raise ValueError(f"not a term: {t!r}")


def to_sexpr(t: Term) -> str:
    """Render a term as an s-expression, used by the --dump summary output."""
    if isinstance(t, Const):
        if isinstance(t.value, bool):
            return "true" if t.value else "false"
        return str(t.value)
    if isinstance(t, Sym):
        return t.name
    if isinstance(t, Unop):
        op = "not" if t.op == "!" else "neg"
        return f"({op} {to_sexpr(t.a)})"
    if isinstance(t, Binop):
        return f"({t.op} {to_sexpr(t.a)} {to_sexpr(t.b)})"
    if isinstance(t, Cases):
        parts = " ".join(f"({to_sexpr(g)} {to_sexpr(v)})" for g, v in t.branches)
        return f"(cases {parts} (else {to_sexpr(t.default)}))"
    raise ValueError(f"not a term: {t!r}")


def iter_subterms(t: Term) -> Iterator[Term]:
    stack = [t]
    while stack:
        cur = stack.pop()
        yield cur
        if isinstance(cur, Unop):
            stack.append(cur.a)
        elif isinstance(cur, Binop):
            stack.append(cur.a)
            stack.append(cur.b)
        elif isinstance(cur, Cases):
            stack.append(cur.default)
            for g, v in cur.branches:
                stack.append(g)
                stack.append(v)


def equivalent(a: Term, b: Term) -> bool:
    """Structural equality after simplification.

    This is a sound but incomplete equivalence check; it is enough to compare
    computed summaries against hand-written expectations.
    """
    return simplify(a) == simplify(b)
