"""Lexer, AST and recursive-descent parser for the supported contract subset.

The grammar (documented in docs/grammar.md) covers contracts with single
inheritance, state variables of elementary/mapping/array/struct/contract
types, functions with modifiers, and the statement and expression forms the
analysis understands.  Anything else raises ParseError or
UnsupportedFeatureError with a source location.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .errors import ParseError, UnsupportedFeatureError

KEYWORDS = {
    "contract", "is", "struct", "mapping", "function", "modifier",
    "constructor", "returns", "return", "if", "else", "while", "for",
    "require", "assert", "new", "public", "private", "internal", "external",
    "payable", "view", "pure", "constant", "memory", "storage", "calldata",
    "true", "false", "pragma", "import", "emit", "event", "delete", "var",
    "throw", "revert",
}

ELEMENTARY_TYPES = {"bool", "address", "string", "bytes"}
for _w in range(8, 257, 8):
    ELEMENTARY_TYPES.add(f"uint{_w}")
    ELEMENTARY_TYPES.add(f"int{_w}")
ELEMENTARY_TYPES.add("uint")
ELEMENTARY_TYPES.add("int")
for _n in range(1, 33):
    ELEMENTARY_TYPES.add(f"bytes{_n}")

PUNCT = [
    "+=", "-=", "*=", "/=", "%=", "==", "!=", "<=", ">=", "&&", "||", "=>",
    "++", "--",
    "{", "}", "(", ")", "[", "]", ";", ",", ".", "=", "+", "-", "*", "/",
    "%", "<", ">", "!",
]


@dataclass(frozen=True)
class Token:
    kind: str  # "ident", "keyword", "number", "string", "punct", "eof"
    text: str
    line: int
    col: int


def tokenize(src: str) -> list[Token]:
    toks: list[Token] = []
    i, line, col = 0, 1, 1
    n = len(src)
    while i < n:
        c = src[i]
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if src.startswith("//", i):
            while i < n and src[i] != "\n":
                i += 1
            continue
        if src.startswith("/*", i):
            end = src.find("*/", i + 2)
            if end < 0:
                raise ParseError("unterminated block comment", line, col)
            skipped = src[i:end + 2]
            line += skipped.count("\n")
            col = 1 if "\n" in skipped else col + len(skipped)
            i = end + 2
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (src[j].isalnum() or src[j] == "_"):
                j += 1
            word = src[i:j]
            if word == "pragma":
                # version constraints use characters (^, .) that appear
                # nowhere else in the language; swallow the whole directive
                while j < n and src[j] not in ";\n":
                    j += 1
                if j >= n or src[j] != ";":
                    raise ParseError("unterminated pragma", line, col)
                col += j + 1 - i
                i = j + 1
                continue
            kind = "keyword" if word in KEYWORDS or word in ELEMENTARY_TYPES else "ident"
            toks.append(Token(kind, word, line, col))
            col += j - i
            i = j
            continue
        if c.isdigit():
            j = i
            if src.startswith("0x", i) or src.startswith("0X", i):
                j = i + 2
                while j < n and src[j] in "0123456789abcdefABCDEF":
                    j += 1
            else:
                while j < n and src[j].isdigit():
                    j += 1
            toks.append(Token("number", src[i:j], line, col))
            col += j - i
            i = j
            continue
        if c in "\"'":
            j = i + 1
            while j < n and src[j] != c:
                if src[j] == "\n":
                    raise ParseError("unterminated string", line, col)
                j += 1
            if j >= n:
                raise ParseError("unterminated string", line, col)
            toks.append(Token("string", src[i + 1:j], line, col))
            col += j + 1 - i
            i = j + 1
            continue
        for p in PUNCT:
            if src.startswith(p, i):
                toks.append(Token("punct", p, line, col))
                i += len(p)
                col += len(p)
                break
        else:
            raise ParseError(f"unexpected character {c!r}", line, col)
    toks.append(Token("eof", "", line, col))
    return toks


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class TypeName:
    pass


@dataclass(frozen=True)
class Elementary(TypeName):
    name: str  # canonicalized: uint256 -> uint, int256 -> int


@dataclass(frozen=True)
class MappingType(TypeName):
    key: TypeName
    value: TypeName


@dataclass(frozen=True)
class ArrayType(TypeName):
    base: TypeName
    size: int


@dataclass(frozen=True)
class NamedType(TypeName):
    """Reference to a struct or contract by name."""

    name: str


@dataclass
class Expr:
    line: int = field(default=0, compare=False)


@dataclass
class Ident(Expr):
    name: str = ""


@dataclass
class NumberLit(Expr):
    value: int = 0


@dataclass
class BoolLit(Expr):
    value: bool = False


@dataclass
class StringLit(Expr):
    value: str = ""


@dataclass
class MemberAccess(Expr):
    obj: Expr = None
    member: str = ""


@dataclass
class IndexAccess(Expr):
    obj: Expr = None
    index: Expr = None


@dataclass
class CallExpr(Expr):
    func: Expr = None
    args: list[Expr] = field(default_factory=list)


@dataclass
class NewExpr(Expr):
    contract: str = ""
    args: list[Expr] = field(default_factory=list)


@dataclass
class UnaryExpr(Expr):
    op: str = ""
    operand: Expr = None


@dataclass
class BinaryExpr(Expr):
    op: str = ""
    left: Expr = None
    right: Expr = None


@dataclass
class Stmt:
    line: int = field(default=0, compare=False)


@dataclass
class Block(Stmt):
    stmts: list[Stmt] = field(default_factory=list)


@dataclass
class VarDeclStmt(Stmt):
    name: str = ""
    ty: TypeName = None
    init: Optional[Expr] = None


@dataclass
class AssignStmt(Stmt):
    target: Expr = None
    op: str = "="  # "=", "+=", "-=", "*=", "/=", "%="
    value: Expr = None


@dataclass
class ExprStmt(Stmt):
    expr: Expr = None


@dataclass
class IfStmt(Stmt):
    cond: Expr = None
    then: Block = None
    orelse: Optional[Block] = None


@dataclass
class WhileStmt(Stmt):
    cond: Expr = None
    body: Block = None


@dataclass
class ForStmt(Stmt):
    init: Optional[Stmt] = None
    cond: Optional[Expr] = None
    post: Optional[Stmt] = None
    body: Block = None


@dataclass
class ReturnStmt(Stmt):
    value: Optional[Expr] = None


@dataclass
class RequireStmt(Stmt):
    cond: Expr = None
    kind: str = "require"  # or "assert"


@dataclass
class PlaceholderStmt(Stmt):
    """The '_' statement inside a modifier body."""


@dataclass
class ThrowStmt(Stmt):
    """throw / revert(): unconditional abort."""


@dataclass
class FunctionDef:
    name: str
    params: list[tuple[str, TypeName]]
    body: Block
    visibility: str = "public"
    payable: bool = False
    modifiers: list[tuple[str, list[Expr]]] = field(default_factory=list)
    returns: Optional[tuple[Optional[str], TypeName]] = None
    is_constructor: bool = False
    line: int = 0


@dataclass
class ModifierDef:
    name: str
    params: list[tuple[str, TypeName]]
    body: Block
    line: int = 0


@dataclass
class StructDef:
    name: str
    fields: list[tuple[str, TypeName]]
    line: int = 0


@dataclass
class StateVarDecl:
    name: str
    ty: TypeName
    init: Optional[Expr] = None
    line: int = 0


@dataclass
class ContractDef:
    name: str
    base: Optional[str] = None
    state_vars: list[StateVarDecl] = field(default_factory=list)
    structs: list[StructDef] = field(default_factory=list)
    functions: list[FunctionDef] = field(default_factory=list)
    modifiers: list[ModifierDef] = field(default_factory=list)
    constructor: Optional[FunctionDef] = None
    line: int = 0


@dataclass
class SourceUnit:
    contracts: list[ContractDef] = field(default_factory=list)
    path: str = "<memory>"

    def contract(self, name: str) -> ContractDef:
        for c in self.contracts:
            if c.name == name:
                return c
        raise KeyError(name)


# ---------------------------------------------------------------------------
# Parser


class _Parser:
    def __init__(self, toks: list[Token]):
        self.toks = toks
        self.pos = 0

    def peek(self, offset: int = 0) -> Token:
        return self.toks[min(self.pos + offset, len(self.toks) - 1)]

    def next(self) -> Token:
        t = self.toks[self.pos]
        if t.kind != "eof":
            self.pos += 1
        return t

    def at(self, text: str) -> bool:
        return self.peek().text == text and self.peek().kind in ("punct", "keyword")

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.next()
            return True
        return False

    def expect(self, text: str) -> Token:
        t = self.peek()
        if not self.at(text):
            raise ParseError(f"expected {text!r}, found {t.text!r}", t.line, t.col)
        return self.next()

    def expect_ident(self) -> Token:
        t = self.peek()
        if t.kind != "ident":
            raise ParseError(f"expected identifier, found {t.text!r}", t.line, t.col)
        return self.next()

    # -- top level ----------------------------------------------------------

    def parse_unit(self, path: str) -> SourceUnit:
        unit = SourceUnit(path=path)
        while self.peek().kind != "eof":
            t = self.peek()
            if t.text == "import":
                raise UnsupportedFeatureError("import is not supported", t.line, t.col)
            if self.at("contract"):
                unit.contracts.append(self.parse_contract())
                continue
            raise ParseError(f"expected contract, found {t.text!r}", t.line, t.col)
        return unit

    def parse_contract(self) -> ContractDef:
        kw = self.expect("contract")
        name = self.expect_ident().text
        base = None
        if self.accept("is"):
            base = self.expect_ident().text
            if self.at(","):
                t = self.peek()
                raise UnsupportedFeatureError(
                    "multiple inheritance is not supported", t.line, t.col)
        self.expect("{")
        contract = ContractDef(name=name, base=base, line=kw.line)
        while not self.accept("}"):
            self.parse_member(contract)
        return contract

    def parse_member(self, contract: ContractDef) -> None:
        t = self.peek()
        if self.at("function"):
            fn = self.parse_function(contract.name)
            if fn.is_constructor:
                contract.constructor = fn
            else:
                contract.functions.append(fn)
        elif self.at("constructor"):
            fn = self.parse_function(contract.name)
            contract.constructor = fn
        elif self.at("modifier"):
            contract.modifiers.append(self.parse_modifier())
        elif self.at("struct"):
            contract.structs.append(self.parse_struct())
        elif t.text == "event":
            raise UnsupportedFeatureError("event declarations are not supported",
                                          t.line, t.col)
        else:
            contract.state_vars.append(self.parse_state_var())

    def parse_struct(self) -> StructDef:
        kw = self.expect("struct")
        name = self.expect_ident().text
        self.expect("{")
        fields: list[tuple[str, TypeName]] = []
        while not self.accept("}"):
            ty = self.parse_type()
            fname = self.expect_ident().text
            self.expect(";")
            fields.append((fname, ty))
        return StructDef(name, fields, line=kw.line)

    def parse_state_var(self) -> StateVarDecl:
        start = self.peek()
        ty = self.parse_type()
        while self.peek().text in ("public", "private", "internal", "constant"):
            self.next()
        name = self.expect_ident().text
        init = None
        if self.accept("="):
            init = self.parse_expr()
        self.expect(";")
        return StateVarDecl(name, ty, init, line=start.line)

    def parse_type(self) -> TypeName:
        t = self.peek()
        if t.text == "mapping":
            self.next()
            self.expect("(")
            key = self.parse_type()
            self.expect("=>")
            value = self.parse_type()
            self.expect(")")
            base: TypeName = MappingType(key, value)
        elif t.text in ELEMENTARY_TYPES:
            self.next()
            name = t.text
            if name == "uint256":
                name = "uint"
            elif name == "int256":
                name = "int"
            base = Elementary(name)
            self.accept("payable")
        elif t.kind == "ident":
            self.next()
            base = NamedType(t.text)
        else:
            raise ParseError(f"expected type, found {t.text!r}", t.line, t.col)
        while self.at("["):
            self.next()
            size_tok = self.peek()
            if size_tok.kind != "number":
                raise UnsupportedFeatureError(
                    "dynamic arrays are not supported", size_tok.line, size_tok.col)
            self.next()
            self.expect("]")
            base = ArrayType(base, int(size_tok.text, 0))
        return base

    def parse_params(self) -> list[tuple[str, TypeName]]:
        self.expect("(")
        params: list[tuple[str, TypeName]] = []
        while not self.accept(")"):
            if params:
                self.expect(",")
            ty = self.parse_type()
            while self.peek().text in ("memory", "storage", "calldata"):
                self.next()
            params.append((self.expect_ident().text, ty))
        return params

    def parse_function(self, contract_name: str) -> FunctionDef:
        kw = self.next()  # "function" or "constructor"
        is_ctor = kw.text == "constructor"
        if is_ctor:
            name = "constructor"
        else:
            name = self.expect_ident().text
            if name == contract_name:
                is_ctor = True
        params = self.parse_params()
        visibility = "public"
        payable = False
        modifiers: list[tuple[str, list[Expr]]] = []
        returns: Optional[tuple[Optional[str], TypeName]] = None
        while True:
            t = self.peek()
            if t.text in ("public", "private", "internal", "external"):
                visibility = self.next().text
            elif t.text == "payable":
                payable = True
                self.next()
            elif t.text in ("view", "pure", "constant"):
                self.next()
            elif t.text == "returns":
                self.next()
                self.expect("(")
                rty = self.parse_type()
                while self.peek().text in ("memory", "storage", "calldata"):
                    self.next()
                rname = self.expect_ident().text if self.peek().kind == "ident" else None
                if self.at(","):
                    raise UnsupportedFeatureError(
                        "multiple return values are not supported", t.line, t.col)
                self.expect(")")
                returns = (rname, rty)
            elif t.kind == "ident":
                mname = self.next().text
                margs: list[Expr] = []
                if self.accept("("):
                    while not self.accept(")"):
                        if margs:
                            self.expect(",")
                        margs.append(self.parse_expr())
                modifiers.append((mname, margs))
            else:
                break
        body = self.parse_block()
        return FunctionDef(name, params, body, visibility, payable, modifiers,
                           returns, is_ctor, line=kw.line)

    def parse_modifier(self) -> ModifierDef:
        kw = self.expect("modifier")
        name = self.expect_ident().text
        params: list[tuple[str, TypeName]] = []
        if self.at("("):
            params = self.parse_params()
        body = self.parse_block()
        return ModifierDef(name, params, body, line=kw.line)

    # -- statements ---------------------------------------------------------

    def parse_block(self) -> Block:
        brace = self.expect("{")
        stmts: list[Stmt] = []
        while not self.accept("}"):
            stmts.append(self.parse_stmt())
        return Block(stmts=stmts, line=brace.line)

    def parse_stmt(self) -> Stmt:
        t = self.peek()
        if self.at("{"):
            return self.parse_block()
        if self.accept("if"):
            self.expect("(")
            cond = self.parse_expr()
            self.expect(")")
            then = self._stmt_as_block()
            orelse = None
            if self.accept("else"):
                orelse = self._stmt_as_block()
            return IfStmt(cond=cond, then=then, orelse=orelse, line=t.line)
        if self.accept("while"):
            self.expect("(")
            cond = self.parse_expr()
            self.expect(")")
            return WhileStmt(cond=cond, body=self._stmt_as_block(), line=t.line)
        if self.accept("for"):
            self.expect("(")
            init = None if self.at(";") else self._parse_simple_stmt_no_semi()
            self.expect(";")
            cond = None if self.at(";") else self.parse_expr()
            self.expect(";")
            post = None if self.at(")") else self._parse_simple_stmt_no_semi()
            self.expect(")")
            return ForStmt(init=init, cond=cond, post=post,
                           body=self._stmt_as_block(), line=t.line)
        if self.accept("return"):
            value = None if self.at(";") else self.parse_expr()
            self.expect(";")
            return ReturnStmt(value=value, line=t.line)
        if t.text in ("require", "assert"):
            self.next()
            self.expect("(")
            cond = self.parse_expr()
            if self.accept(","):
                msg = self.peek()
                if msg.kind != "string":
                    raise ParseError("expected message string", msg.line, msg.col)
                self.next()
            self.expect(")")
            self.expect(";")
            return RequireStmt(cond=cond, kind=t.text, line=t.line)
        if t.text == "throw":
            self.next()
            self.expect(";")
            return ThrowStmt(line=t.line)
        if t.text == "revert":
            self.next()
            if self.accept("("):
                self.expect(")")
            self.expect(";")
            return ThrowStmt(line=t.line)
        if t.text == "_" and self.peek(1).text == ";":
            self.next()
            self.next()
            return PlaceholderStmt(line=t.line)
        if t.text == "emit":
            raise UnsupportedFeatureError("events are not supported", t.line, t.col)
        if t.text in ("delete", "var"):
            raise UnsupportedFeatureError(f"{t.text!r} is not supported", t.line, t.col)
        stmt = self._parse_simple_stmt_no_semi()
        self.expect(";")
        return stmt

    def _stmt_as_block(self) -> Block:
        stmt = self.parse_stmt()
        if isinstance(stmt, Block):
            return stmt
        return Block(stmts=[stmt], line=stmt.line)

    def _parse_simple_stmt_no_semi(self) -> Stmt:
        t = self.peek()
        if t.text in ELEMENTARY_TYPES and t.text != "mapping":
            ty = self.parse_type()
            if not isinstance(ty, Elementary):
                raise UnsupportedFeatureError(
                    "only elementary-typed locals are supported", t.line, t.col)
            name = self.expect_ident().text
            init = self.parse_expr() if self.accept("=") else None
            return VarDeclStmt(name=name, ty=ty, init=init, line=t.line)
        expr = self.parse_expr()
        for op in ("=", "+=", "-=", "*=", "/=", "%="):
            if self.at(op):
                self.next()
                value = self.parse_expr()
                if not isinstance(expr, (Ident, IndexAccess, MemberAccess)):
                    raise ParseError("invalid assignment target", t.line, t.col)
                return AssignStmt(target=expr, op=op, value=value, line=t.line)
        if self.at("++") or self.at("--"):
            op = self.next().text
            one = NumberLit(value=1, line=t.line)
            return AssignStmt(target=expr, op=op[0] + "=", value=one, line=t.line)
        return ExprStmt(expr=expr, line=t.line)

    # -- expressions --------------------------------------------------------

    _PRECEDENCE = [("||",), ("&&",), ("==", "!="), ("<", "<=", ">", ">="),
                   ("+", "-"), ("*", "/", "%")]

    def parse_expr(self, level: int = 0) -> Expr:
        if level == len(self._PRECEDENCE):
            return self.parse_unary()
        left = self.parse_expr(level + 1)
        while self.peek().text in self._PRECEDENCE[level] and self.peek().kind == "punct":
            op = self.next()
            right = self.parse_expr(level + 1)
            left = BinaryExpr(op=op.text, left=left, right=right, line=op.line)
        return left

    def parse_unary(self) -> Expr:
        t = self.peek()
        if t.text in ("!", "-") and t.kind == "punct":
            self.next()
            return UnaryExpr(op=t.text, operand=self.parse_unary(), line=t.line)
        return self.parse_postfix()

    def parse_postfix(self) -> Expr:
        expr = self.parse_primary()
        while True:
            t = self.peek()
            if self.accept("."):
                member = self.next()
                if member.kind not in ("ident", "keyword"):
                    raise ParseError("expected member name", member.line, member.col)
                expr = MemberAccess(obj=expr, member=member.text, line=t.line)
            elif self.accept("["):
                index = self.parse_expr()
                self.expect("]")
                expr = IndexAccess(obj=expr, index=index, line=t.line)
            elif self.at("("):
                self.next()
                args: list[Expr] = []
                while not self.accept(")"):
                    if args:
                        self.expect(",")
                    args.append(self.parse_expr())
                expr = CallExpr(func=expr, args=args, line=t.line)
            else:
                return expr

    def parse_primary(self) -> Expr:
        t = self.peek()
        if t.kind == "number":
            self.next()
            return NumberLit(value=int(t.text, 0), line=t.line)
        if t.kind == "string":
            self.next()
            return StringLit(value=t.text, line=t.line)
        if t.text in ("true", "false"):
            self.next()
            return BoolLit(value=t.text == "true", line=t.line)
        if self.accept("new"):
            name = self.expect_ident().text
            self.expect("(")
            args: list[Expr] = []
            while not self.accept(")"):
                if args:
                    self.expect(",")
                args.append(self.parse_expr())
            return NewExpr(contract=name, args=args, line=t.line)
        if self.accept("("):
            inner = self.parse_expr()
            self.expect(")")
            return inner
        if t.kind == "ident" or t.text in ELEMENTARY_TYPES or t.text == "this":
            self.next()
            return Ident(name=t.text, line=t.line)
        raise ParseError(f"unexpected token {t.text!r}", t.line, t.col)


def parse_source(src: str, path: str = "<memory>") -> SourceUnit:
    """Parse source text into a SourceUnit AST.

    Raises ParseError or UnsupportedFeatureError with line/column diagnostics.
    """
    return _Parser(tokenize(src)).parse_unit(path)


# ---------------------------------------------------------------------------
# Pretty printer (canonical form; used by the round-trip property test)


def type_to_str(ty: TypeName) -> str:
    if isinstance(ty, Elementary):
        return ty.name
    if isinstance(ty, MappingType):
        return f"mapping ({type_to_str(ty.key)} => {type_to_str(ty.value)})"
    if isinstance(ty, ArrayType):
        return f"{type_to_str(ty.base)}[{ty.size}]"
    if isinstance(ty, NamedType):
        return ty.name
    raise ValueError(f"not a type: {ty!r}")


def expr_to_str(e: Expr) -> str:
    if isinstance(e, Ident):
        return e.name
    if isinstance(e, NumberLit):
        return str(e.value)
    if isinstance(e, BoolLit):
        return "true" if e.value else "false"
    if isinstance(e, StringLit):
        return f'"{e.value}"'
    if isinstance(e, MemberAccess):
        return f"{expr_to_str(e.obj)}.{e.member}"
    if isinstance(e, IndexAccess):
        return f"{expr_to_str(e.obj)}[{expr_to_str(e.index)}]"
    if isinstance(e, CallExpr):
        args = ", ".join(expr_to_str(a) for a in e.args)
        return f"{expr_to_str(e.func)}({args})"
    if isinstance(e, NewExpr):
        args = ", ".join(expr_to_str(a) for a in e.args)
        return f"new {e.contract}({args})"
    if isinstance(e, UnaryExpr):
        return f"{e.op}({expr_to_str(e.operand)})"
    if isinstance(e, BinaryExpr):
        return f"({expr_to_str(e.left)} {e.op} {expr_to_str(e.right)})"
    raise ValueError(f"not an expression: {e!r}")


def _stmt_lines(s: Stmt, indent: int) -> list[str]:
    pad = "    " * indent
    if isinstance(s, Block):
        out = [pad + "{"]
        for sub in s.stmts:
            out.extend(_stmt_lines(sub, indent + 1))
        out.append(pad + "}")
        return out
    if isinstance(s, VarDeclStmt):
        init = f" = {expr_to_str(s.init)}" if s.init is not None else ""
        return [f"{pad}{type_to_str(s.ty)} {s.name}{init};"]
    if isinstance(s, AssignStmt):
        return [f"{pad}{expr_to_str(s.target)} {s.op} {expr_to_str(s.value)};"]
    if isinstance(s, ExprStmt):
        return [f"{pad}{expr_to_str(s.expr)};"]
    if isinstance(s, IfStmt):
        out = [f"{pad}if ({expr_to_str(s.cond)})"]
        out.extend(_stmt_lines(s.then, indent))
        if s.orelse is not None:
            out.append(pad + "else")
            out.extend(_stmt_lines(s.orelse, indent))
        return out
    if isinstance(s, WhileStmt):
        return [f"{pad}while ({expr_to_str(s.cond)})"] + _stmt_lines(s.body, indent)
    if isinstance(s, ForStmt):
        init = _stmt_lines(s.init, 0)[0][:-1] if s.init else ""
        cond = expr_to_str(s.cond) if s.cond else ""
        post = _stmt_lines(s.post, 0)[0][:-1] if s.post else ""
        return [f"{pad}for ({init}; {cond}; {post})"] + _stmt_lines(s.body, indent)
    if isinstance(s, ReturnStmt):
        if s.value is None:
            return [pad + "return;"]
        return [f"{pad}return {expr_to_str(s.value)};"]
    if isinstance(s, RequireStmt):
        return [f"{pad}{s.kind}({expr_to_str(s.cond)});"]
    if isinstance(s, PlaceholderStmt):
        return [pad + "_;"]
    if isinstance(s, ThrowStmt):
        return [pad + "throw;"]
    raise ValueError(f"not a statement: {s!r}")


def unit_to_str(unit: SourceUnit) -> str:
    """Canonical pretty-print; reparsing yields a structurally equal AST."""
    out: list[str] = []
    for c in unit.contracts:
        head = f"contract {c.name}"
        if c.base:
            head += f" is {c.base}"
        out.append(head + " {")
        for sd in c.structs:
            out.append(f"    struct {sd.name} {{")
            for fname, fty in sd.fields:
                out.append(f"        {type_to_str(fty)} {fname};")
            out.append("    }")
        for sv in c.state_vars:
            init = f" = {expr_to_str(sv.init)}" if sv.init is not None else ""
            out.append(f"    {type_to_str(sv.ty)} {sv.name}{init};")
        for m in c.modifiers:
            params = ", ".join(f"{type_to_str(t)} {n}" for n, t in m.params)
            out.append(f"    modifier {m.name}({params})")
            out.extend(_stmt_lines(m.body, 1))
        defs = list(c.functions)
        if c.constructor is not None:
            defs = [c.constructor] + defs
        for f in defs:
            params = ", ".join(f"{type_to_str(t)} {n}" for n, t in f.params)
            if f.is_constructor:
                head = f"    constructor({params})"
            else:
                head = f"    function {f.name}({params})"
            head += f" {f.visibility}"
            if f.payable:
                head += " payable"
            for mname, margs in f.modifiers:
                head += f" {mname}"
                if margs:
                    head += "(" + ", ".join(expr_to_str(a) for a in margs) + ")"
            if f.returns is not None:
                rname, rty = f.returns
                head += f" returns ({type_to_str(rty)}{' ' + rname if rname else ''})"
            out.append(head)
            out.extend(_stmt_lines(f.body, 1))
        out.append("}")
    return "\n".join(out) + "\n"
