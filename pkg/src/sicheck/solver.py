"""Satisfiability backends for path conditions.

Two interchangeable engines sit behind one `check` interface:

* BuiltinSolver — dependency-free search.  It substitutes candidate values
  symbol by symbol, simplifying after each choice so contradictory branches
  prune early.  Boolean symbols range over {false, true}, so a fully boolean
  formula is decided exactly.  Word symbols range over a finite candidate set
  (small values, constants mined from the formula and their neighbours), so
  for formulas with word symbols a failed search means "unknown", never
  "unsat": the search is sound for sat answers and conservative otherwise.

* ExternalSmtSolver — hands the formula to an SMT-LIB2 process (e.g. z3,
  cvc5) over a pipe, modeling words as 256-bit bitvectors with the same
  division-by-zero convention as the rest of the analyzer.

Both report a model on sat so callers can replay witnesses concretely.
"""

from __future__ import annotations

import re
import subprocess
from dataclasses import dataclass, field
from typing import Optional, Protocol

from .errors import SolverTimeoutError, SolverUnavailableError
from .terms import (BOOL_OPS, CMP_OPS, MASK, MODULUS, FALSE, TRUE, Binop,
                    Cases, Const, Sym, Term, Unop, conjoin, free_syms,
                    simplify, subst)

Model = dict[str, "int | bool"]


@dataclass
class CheckResult:
    status: str  # "sat" | "unsat" | "unknown"
    model: Model = field(default_factory=dict)
    reason: str = ""

    @property
    def is_sat(self) -> bool:
        return self.status == "sat"


class Solver(Protocol):
    def check(self, assertions: list[Term]) -> CheckResult: ...


# ---------------------------------------------------------------------------
# built-in search


class BuiltinSolver:
    """Backtracking assignment search with eager simplification.

    ``max_steps`` bounds the number of substitute-and-simplify operations;
    when exhausted the result is "unknown".
    """

    def __init__(self, max_steps: int = 60_000) -> None:
        self.max_steps = max_steps

    def check(self, assertions: list[Term]) -> CheckResult:
        phi = simplify(conjoin([simplify(a) for a in assertions]))
        if phi == FALSE:
            return CheckResult("unsat")
        syms = sorted(free_syms(phi), key=lambda s: (s.sort != "bool", s.name))
        if phi == TRUE:
            return CheckResult("sat", {s.name: _default(s) for s in syms})
        exact = all(s.sort == "bool" for s in syms)
        words = _word_candidates(phi)
        domains = [(s.name, [False, True] if s.sort == "bool" else words)
                   for s in syms]
        self._steps = self.max_steps
        try:
            model = self._search(phi, domains, 0, {})
        except _Budget:
            return CheckResult("unknown", reason="search budget exhausted")
        if model is not None:
            return CheckResult("sat", model)
        if exact:
            return CheckResult("unsat")
        return CheckResult("unknown", reason="no model among candidate words")

    def _search(self, phi: Term, domains: list, i: int,
                picked: Model) -> Optional[Model]:
        if phi == TRUE:
            model = dict(picked)
            for name, dom in domains[i:]:
                model[name] = dom[0]
            return model
        if i == len(domains):
            return None
        name, dom = domains[i]
        for value in dom:
            self._steps -= 1
            if self._steps < 0:
                raise _Budget()
            nxt = simplify(subst(phi, {name: Const(value)}))
            if nxt == FALSE:
                continue
            picked[name] = value
            found = self._search(nxt, domains, i + 1, picked)
            if found is not None:
                return found
            del picked[name]
        return None


class _Budget(Exception):
    pass


def _default(s: Sym) -> int | bool:
    return False if s.sort == "bool" else 0


def _word_candidates(phi: Term) -> list[int]:
    """Small values, formula constants, and their off-by-one neighbours."""
    mined: set[int] = {0, 1, 2}
    stack = [phi]
    while stack:
        t = stack.pop()
        if isinstance(t, Const) and isinstance(t.value, int) \
                and not isinstance(t.value, bool):
            c = t.value & MASK
            mined.update({c, (c + 1) & MASK, (c - 1) & MASK, (MODULUS - c) & MASK})
        elif isinstance(t, Unop):
            stack.append(t.a)
        elif isinstance(t, Binop):
            stack.extend((t.a, t.b))
        elif isinstance(t, Cases):
            stack.append(t.default)
            for g, v in t.branches:
                stack.extend((g, v))
    return sorted(mined)


# ---------------------------------------------------------------------------
# external SMT process


class ExternalSmtSolver:
    """One-shot SMT-LIB2 session with a solver executable."""

    def __init__(self, command: str = "z3", args: tuple[str, ...] = ("-in",),
                 timeout: Optional[float] = None) -> None:
        self.command = command
        self.args = args
        self.timeout = timeout

    def check(self, assertions: list[Term]) -> CheckResult:
        phi = simplify(conjoin([simplify(a) for a in assertions]))
        script = render_script(phi)
        try:
            proc = subprocess.run(
                [self.command, *self.args], input=script, text=True,
                capture_output=True, timeout=self.timeout)
        except FileNotFoundError as exc:
            raise SolverUnavailableError(
                f"solver executable {self.command!r} not found") from exc
        except subprocess.TimeoutExpired as exc:
            raise SolverTimeoutError(
                f"solver exceeded {self.timeout}s") from exc
        out = proc.stdout
        if out.startswith("unsat"):
            return CheckResult("unsat")
        if out.startswith("sat"):
            return CheckResult("sat", _parse_model(out, free_syms(phi)))
        return CheckResult("unknown", reason=out.strip()[:200] or "no output")


def term_sort(t: Term) -> str:
    """'bool' or 'word' — the natural sort of a term."""
    if isinstance(t, Const):
        return "bool" if isinstance(t.value, bool) else "word"
    if isinstance(t, Sym):
        return "bool" if t.sort == "bool" else "word"
    if isinstance(t, Unop):
        return "bool" if t.op == "!" else "word"
    if isinstance(t, Binop):
        return "bool" if t.op in CMP_OPS or t.op in BOOL_OPS else "word"
    if isinstance(t, Cases):
        return term_sort(t.default)
    raise ValueError(f"not a term: {t!r}")


_BV_OPS = {"+": "bvadd", "-": "bvsub", "*": "bvmul",
           "<": "bvult", "<=": "bvule", ">": "bvugt", ">=": "bvuge"}


def to_smt2(t: Term, want: str) -> str:
    """Render ``t`` as an SMT-LIB2 expression of sort ``want``."""
    have = term_sort(t)
    s = _smt_natural(t)
    if have == want:
        return s
    if want == "word":  # bool -> 0/1 word
        return f"(ite {s} (_ bv1 256) (_ bv0 256))"
    return f"(not (= {s} (_ bv0 256)))"  # word -> nonzero test


def _smt_natural(t: Term) -> str:
    if isinstance(t, Const):
        if isinstance(t.value, bool):
            return "true" if t.value else "false"
        return f"(_ bv{t.value & MASK} 256)"
    if isinstance(t, Sym):
        return f"|{t.name}|"
    if isinstance(t, Unop):
        if t.op == "!":
            return f"(not {to_smt2(t.a, 'bool')})"
        return f"(bvneg {to_smt2(t.a, 'word')})"
    if isinstance(t, Binop):
        a_sort = term_sort(t.a)
        if t.op in ("==", "!="):
            # compare in whichever sort both sides agree on; default to words
            sort = "bool" if a_sort == "bool" and term_sort(t.b) == "bool" \
                else "word"
            eq = f"(= {to_smt2(t.a, sort)} {to_smt2(t.b, sort)})"
            return eq if t.op == "==" else f"(not {eq})"
        if t.op in ("&&", "||"):
            op = "and" if t.op == "&&" else "or"
            return f"({op} {to_smt2(t.a, 'bool')} {to_smt2(t.b, 'bool')})"
        a = to_smt2(t.a, "word")
        b = to_smt2(t.b, "word")
        if t.op == "/":  # match the analyzer's x/0 = 0 convention
            return f"(ite (= {b} (_ bv0 256)) (_ bv0 256) (bvudiv {a} {b}))"
        if t.op == "%":
            return f"(ite (= {b} (_ bv0 256)) (_ bv0 256) (bvurem {a} {b}))"
        return f"({_BV_OPS[t.op]} {a} {b})"
    if isinstance(t, Cases):
        sort = term_sort(t)
        out = to_smt2(t.default, sort)
        for g, v in reversed(t.branches):
            out = f"(ite {to_smt2(g, 'bool')} {to_smt2(v, sort)} {out})"
        return out
    raise ValueError(f"not a term: {t!r}")


def render_script(phi: Term) -> str:
    lines = ["(set-logic QF_BV)", "(set-option :produce-models true)"]
    for s in sorted(free_syms(phi), key=lambda s: s.name):
        sort = "Bool" if s.sort == "bool" else "(_ BitVec 256)"
        lines.append(f"(declare-const |{s.name}| {sort})")
    lines.append(f"(assert {to_smt2(phi, 'bool')})")
    lines.append("(check-sat)")
    lines.append("(get-model)")
    return "\n".join(lines) + "\n"


_DEF_RE = re.compile(
    r"\(define-fun\s+\|?([^|\s()]+)\|?\s*\(\)\s*"
    r"(?:Bool|\(_\s*BitVec\s*\d+\s*\))\s+([^)]+)\)")


def _parse_model(out: str, syms: set[Sym]) -> Model:
    model: Model = {s.name: _default(s) for s in syms}
    bools = {s.name for s in syms if s.sort == "bool"}
    for name, raw in _DEF_RE.findall(out):
        if name not in model:
            continue
        raw = raw.strip()
        if raw in ("true", "false"):
            model[name] = raw == "true"
        else:
            value = _parse_value(raw)
            model[name] = bool(value) if name in bools else value
    return model


def _parse_value(raw: str) -> int:
    if raw.startswith("#x"):
        return int(raw[2:], 16)
    if raw.startswith("#b"):
        return int(raw[2:], 2)
    m = re.match(r"\(?_?\s*bv(\d+)", raw)
    if m:
        return int(m.group(1))
    return int(raw)
