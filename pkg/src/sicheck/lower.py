"""Lowering from AST to IR.

Responsibilities beyond plain three-address translation:

* single-inheritance flattening (base members merged, derived overrides win);
* modifier splicing (the ``_`` placeholder is replaced by the wrapped body);
* inlining of same-contract (internal) calls, rejecting recursion;
* ``for`` desugaring into ``while``;
* struct flattening: field ``s.f`` becomes its own storage variable, and a
  mapping-to-struct contributes one collapsed mapping per field;
* constructor synthesis for state-variable initializers.

Every emitted instruction carries the source line of the statement it came
from; downstream reports are line-based.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Optional

from . import syntax as ast
from .errors import (RecursionUnsupportedError, UnknownIdentifierError,
                     UnsupportedFeatureError)
from .ir import (Atom, BinOp, Branch, ContractIR, Copy, ExtCall, FunctionIR,
                 Havoc, IfNode, Instr, Jump, LoadEnv, LoadStorage,
                 NewContract, Require, Return, SelfDestruct, StoreStorage,
                 Straight, TreeNode, UnOp, WhileNode)

_ENV_READS = {"sender": "msg.sender", "value": "msg.value"}
_HASH_BUILTINS = {"keccak256", "sha3", "sha256", "ripemd160", "ecrecover",
                  "blockhash", "addmod", "mulmod"}


def _elementary_sort(name: str) -> str:
    if name == "bool":
        return "bool"
    if name == "address":
        return "addr"
    return "uint"


@dataclass
class _StorageSlot:
    sort: str
    mapping: bool
    contract_type: Optional[str] = None


def _merge_contract(unit: ast.SourceUnit, c: ast.ContractDef,
                    _seen: Optional[set[str]] = None) -> ast.ContractDef:
    """Flatten single inheritance into one self-contained contract."""
    if c.base is None:
        return c
    seen = _seen or {c.name}
    if c.base in seen:
        raise UnsupportedFeatureError(
            f"inheritance cycle through {c.base!r}", c.line, 1)
    try:
        base = unit.contract(c.base)
    except KeyError:
        raise UnknownIdentifierError(
            f"unknown base contract {c.base!r}", c.line, 1) from None
    base = _merge_contract(unit, base, seen | {c.base})
    own_fn = {f.name for f in c.functions}
    own_mod = {m.name for m in c.modifiers}
    own_var = {v.name for v in c.state_vars}
    for v in base.state_vars:
        if v.name in own_var:
            raise UnsupportedFeatureError(
                f"state variable {v.name!r} shadows an inherited one", v.line, 1)
    merged = ast.ContractDef(
        name=c.name,
        base=None,
        state_vars=base.state_vars + c.state_vars,
        structs=base.structs + c.structs,
        functions=[f for f in base.functions if f.name not in own_fn] + c.functions,
        modifiers=[m for m in base.modifiers if m.name not in own_mod] + c.modifiers,
        constructor=c.constructor or base.constructor,
        line=c.line,
    )
    return merged


def _splice_modifiers(c: ast.ContractDef, fn: ast.FunctionDef) -> ast.Block:
    """Wrap fn.body in its modifier bodies, innermost-first."""
    body = fn.body
    mods = {m.name: m for m in c.modifiers}
    for mname, margs in reversed(fn.modifiers):
        if mname not in mods:
            raise UnknownIdentifierError(f"unknown modifier {mname!r}", fn.line, 1)
        mod = mods[mname]
        if len(margs) != len(mod.params):
            raise UnsupportedFeatureError(
                f"modifier {mname!r} expects {len(mod.params)} argument(s)",
                fn.line, 1)
        rename = {pname: f"{mname}${pname}" for pname, _ in mod.params}
        binds: list[ast.Stmt] = [
            ast.VarDeclStmt(name=rename[pname], ty=pty, init=arg, line=mod.line)
            for (pname, pty), arg in zip(mod.params, margs)
        ]
        spliced = _subst_block(mod.body, rename, body)
        body = ast.Block(stmts=binds + spliced.stmts, line=mod.line)
    return body


def _subst_block(b: ast.Block, rename: dict[str, str],
                 placeholder: ast.Block) -> ast.Block:
    def sub_expr(e: ast.Expr) -> ast.Expr:
        if isinstance(e, ast.Ident) and e.name in rename:
            return ast.Ident(name=rename[e.name], line=e.line)
        e = copy.copy(e)
        for attr in ("obj", "index", "func", "operand", "left", "right"):
            v = getattr(e, attr, None)
            if isinstance(v, ast.Expr):
                setattr(e, attr, sub_expr(v))
        if isinstance(e, (ast.CallExpr, ast.NewExpr)):
            e.args = [sub_expr(a) for a in e.args]
        return e

    def sub_stmt(s: ast.Stmt) -> ast.Stmt:
        if isinstance(s, ast.PlaceholderStmt):
            return placeholder
        s = copy.copy(s)
        for attr in ("init", "cond", "post", "value", "target", "expr"):
            v = getattr(s, attr, None)
            if isinstance(v, ast.Expr):
                setattr(s, attr, sub_expr(v))
            elif isinstance(v, ast.Stmt):
                setattr(s, attr, sub_stmt(v))
        for attr in ("then", "orelse", "body"):
            v = getattr(s, attr, None)
            if isinstance(v, ast.Block):
                setattr(s, attr, sub_stmt(v))
        if isinstance(s, ast.Block):
            s.stmts = [sub_stmt(x) for x in s.stmts]
        return s

    return sub_stmt(b)


class _FunctionLowerer:
    def __init__(self, unit: ast.SourceUnit, contract: ast.ContractDef,
                 slots: dict[str, _StorageSlot], structs: dict[str, ast.StructDef]):
        self.unit = unit
        self.contract = contract
        self.slots = slots
        self.structs = structs
        self.tmp = 0
        self.locals: set[str] = set()
        self.rename: dict[str, str] = {}
        self.inline_stack: list[str] = []
        self.nodes: list[TreeNode] = []
        self.cur: list[Instr] = []
        self.line = 0

    # -- emission ---------------------------------------------------------

    def fresh(self, hint: str = "t") -> str:
        self.tmp += 1
        name = f"{hint}${self.tmp}"
        self.locals.add(name)
        return name

    def emit(self, ins: Instr) -> Instr:
        if not ins.line:
            ins.line = self.line
        self.cur.append(ins)
        return ins

    def _flush(self) -> None:
        if self.cur:
            self.nodes.append(Straight(instrs=self.cur))
            self.cur = []

    def _capture(self) -> tuple[list[TreeNode], list[Instr]]:
        """Swap out the builder state; restore with _restore."""
        state = (self.nodes, self.cur)
        self.nodes, self.cur = [], []
        return state

    def _restore(self, state: tuple[list[TreeNode], list[Instr]]) -> list[TreeNode]:
        self._flush()
        captured = self.nodes
        self.nodes, self.cur = state
        return captured

    # -- name resolution ----------------------------------------------------

    def _local(self, name: str) -> Optional[str]:
        name = self.rename.get(name, name)
        return name if name in self.locals else None

    def _storage_path(self, e: ast.Expr) -> Optional[tuple[str, Optional[Atom]]]:
        """Resolve an lvalue-ish expression to (storage var, optional index)."""
        if isinstance(e, ast.Ident):
            if self._local(e.name) is not None:
                return None
            if e.name in self.slots and not self.slots[e.name].mapping:
                return (e.name, None)
            return None
        if isinstance(e, ast.IndexAccess) and isinstance(e.obj, ast.Ident):
            base = e.obj.name
            if self._local(base) is None and base in self.slots \
                    and self.slots[base].mapping:
                return (base, self.lower_expr(e.index))
            return None
        if isinstance(e, ast.MemberAccess):
            # struct field: s.f (scalar) or m[k].f (mapping to struct)
            if isinstance(e.obj, ast.Ident):
                flat = f"{e.obj.name}.{e.member}"
                if self._local(e.obj.name) is None and flat in self.slots:
                    return (flat, None)
            if isinstance(e.obj, ast.IndexAccess) and isinstance(e.obj.obj, ast.Ident):
                flat = f"{e.obj.obj.name}.{e.member}"
                if flat in self.slots and self.slots[flat].mapping:
                    return (flat, self.lower_expr(e.obj.index))
        return None

    # -- expressions --------------------------------------------------------

    def lower_expr(self, e: ast.Expr) -> Atom:
        self.line = e.line or self.line
        if isinstance(e, ast.NumberLit):
            return e.value
        if isinstance(e, ast.BoolLit):
            return e.value
        if isinstance(e, ast.StringLit):
            return 0  # opaque payload; only ever passed to calls
        if isinstance(e, ast.Ident):
            return self._lower_ident(e)
        if isinstance(e, ast.MemberAccess):
            return self._lower_member(e)
        if isinstance(e, ast.IndexAccess):
            path = self._storage_path(e)
            if path is None:
                raise UnsupportedFeatureError(
                    "indexing is only supported on storage mappings/arrays",
                    e.line, 1)
            var, index = path
            dst = self.fresh()
            self.emit(LoadStorage(dst=dst, var=var, index=index, line=e.line))
            return dst
        if isinstance(e, ast.CallExpr):
            return self._lower_call(e)
        if isinstance(e, ast.NewExpr):
            dst = self.fresh("new")
            args = [self.lower_expr(a) for a in e.args]
            self.emit(NewContract(dst=dst, contract=e.contract, args=args,
                                  line=e.line))
            return dst
        if isinstance(e, ast.UnaryExpr):
            a = self.lower_expr(e.operand)
            dst = self.fresh()
            self.emit(UnOp(dst=dst, op=e.op, a=a, line=e.line))
            return dst
        if isinstance(e, ast.BinaryExpr):
            a = self.lower_expr(e.left)
            b = self.lower_expr(e.right)
            dst = self.fresh()
            self.emit(BinOp(dst=dst, op=e.op, a=a, b=b, line=e.line))
            return dst
        raise UnsupportedFeatureError(f"unsupported expression {e!r}", e.line, 1)

    def _lower_ident(self, e: ast.Ident) -> Atom:
        reg = self._local(e.name)
        if reg is not None:
            return reg
        if e.name in self.slots:
            slot = self.slots[e.name]
            if slot.mapping:
                raise UnsupportedFeatureError(
                    f"mapping {e.name!r} used without an index", e.line, 1)
            dst = self.fresh()
            self.emit(LoadStorage(dst=dst, var=e.name, index=None, line=e.line))
            return dst
        if e.name == "this":
            dst = self.fresh("this")
            self.emit(LoadEnv(dst=dst, what="this", line=e.line))
            return dst
        if e.name == "now":
            dst = self.fresh("env")
            self.emit(Havoc(dst=dst, note="now", line=e.line))
            return dst
        raise UnknownIdentifierError(f"unknown identifier {e.name!r}", e.line, 1)

    def _lower_member(self, e: ast.MemberAccess) -> Atom:
        if isinstance(e.obj, ast.Ident) and e.obj.name == "msg":
            if e.member in _ENV_READS:
                dst = self.fresh("msg")
                self.emit(LoadEnv(dst=dst, what=_ENV_READS[e.member], line=e.line))
                return dst
            dst = self.fresh("msg")
            self.emit(Havoc(dst=dst, note=f"msg.{e.member}", line=e.line))
            return dst
        if isinstance(e.obj, ast.Ident) and e.obj.name in ("block", "tx"):
            dst = self.fresh("env")
            self.emit(Havoc(dst=dst, note=f"{e.obj.name}.{e.member}", line=e.line))
            return dst
        if e.member == "balance":
            if isinstance(e.obj, ast.Ident) and e.obj.name == "this":
                dst = self.fresh("bal")
                self.emit(LoadEnv(dst=dst, what="this.balance", line=e.line))
                return dst
            self.lower_expr(e.obj)
            dst = self.fresh("bal")
            self.emit(Havoc(dst=dst, note="balance", line=e.line))
            return dst
        path = self._storage_path(e)
        if path is not None:
            var, index = path
            dst = self.fresh()
            self.emit(LoadStorage(dst=dst, var=var, index=index, line=e.line))
            return dst
        raise UnsupportedFeatureError(
            f"unsupported member access .{e.member}", e.line, 1)

    def _declared_contract(self, e: ast.Expr) -> Optional[str]:
        if isinstance(e, ast.Ident) and self._local(e.name) is None \
                and e.name in self.slots:
            return self.slots[e.name].contract_type
        return None

    def _lower_call(self, e: ast.CallExpr) -> Atom:
        func = e.func
        # walk option chains: dest.call.value(v)(args), dest.call.gas(g)(args)
        value_expr: Optional[ast.Expr] = None
        inner = func
        while isinstance(inner, ast.CallExpr) and isinstance(inner.func, ast.MemberAccess) \
                and inner.func.member in ("value", "gas"):
            if inner.func.member == "value":
                value_expr = inner.args[0] if inner.args else None
            inner = inner.func.obj
        if isinstance(inner, ast.MemberAccess) and inner.member == "call":
            dest = self.lower_expr(inner.obj)
            value = self.lower_expr(value_expr) if value_expr is not None else None
            args = [self.lower_expr(a) for a in e.args]
            dst = self.fresh("ok")
            self.emit(ExtCall(dst=dst, kind="call", dest=dest, value=value,
                              args=args, line=e.line))
            return dst

        if isinstance(func, ast.MemberAccess):
            member = func.member
            decl = self._declared_contract(func.obj)
            if member == "send" and len(e.args) == 1 and decl is None:
                dest = self.lower_expr(func.obj)
                value = self.lower_expr(e.args[0])
                dst = self.fresh("ok")
                self.emit(ExtCall(dst=dst, kind="send", dest=dest, value=value,
                                  line=e.line))
                return dst
            if member == "transfer" and len(e.args) == 1 and decl is None:
                dest = self.lower_expr(func.obj)
                value = self.lower_expr(e.args[0])
                dst = self.fresh("ok")
                self.emit(ExtCall(dst=dst, kind="transfer", dest=dest,
                                  value=value, line=e.line))
                return dst
            if member == "delegatecall":
                dest = self.lower_expr(func.obj)
                args = [self.lower_expr(a) for a in e.args]
                dst = self.fresh("ok")
                self.emit(ExtCall(dst=dst, kind="delegate", dest=dest, args=args,
                                  dest_decl=decl, line=e.line))
                return dst
            # high-level call on a contract-typed or unknown target
            dest = self.lower_expr(func.obj)
            args = [self.lower_expr(a) for a in e.args]
            dst = self.fresh("ret")
            self.emit(ExtCall(dst=dst, kind="high", dest=dest, args=args,
                              method=member, dest_decl=decl, line=e.line))
            return dst

        if isinstance(func, ast.Ident):
            name = func.name
            if name in ("selfdestruct", "suicide"):
                dest = self.lower_expr(e.args[0])
                self.emit(SelfDestruct(dest=dest, line=e.line))
                return 0
            if name in ("require", "assert"):
                cond = self.lower_expr(e.args[0])
                self.emit(Require(cond=cond, kind=name, line=e.line))
                return 0
            if name in _HASH_BUILTINS:
                for a in e.args:
                    self.lower_expr(a)
                dst = self.fresh("h")
                self.emit(Havoc(dst=dst, note=name, line=e.line))
                return dst
            if name in ast.ELEMENTARY_TYPES:
                if len(e.args) != 1:
                    raise UnsupportedFeatureError(
                        f"cast to {name} takes one argument", e.line, 1)
                return self.lower_expr(e.args[0])
            for fn in self.contract.functions:
                if fn.name == name:
                    return self._inline_call(fn, e)
            if any(c.name == name for c in self.unit.contracts):
                if len(e.args) != 1:
                    raise UnsupportedFeatureError(
                        f"cast to {name} takes one argument", e.line, 1)
                return self.lower_expr(e.args[0])
            raise UnknownIdentifierError(f"unknown function {name!r}", e.line, 1)

        raise UnsupportedFeatureError("unsupported call form", e.line, 1)

    def _inline_call(self, callee: ast.FunctionDef, site: ast.CallExpr) -> Atom:
        if callee.name in self.inline_stack:
            raise RecursionUnsupportedError(
                f"recursive call to {callee.name!r}", site.line, 1)
        if len(site.args) != len(callee.params):
            raise UnsupportedFeatureError(
                f"{callee.name!r} expects {len(callee.params)} argument(s)",
                site.line, 1)
        args = [self.lower_expr(a) for a in site.args]
        outer_rename = self.rename
        rename: dict[str, str] = {}
        for (pname, _), atom in zip(callee.params, args):
            reg = self.fresh(f"{callee.name}${pname}")
            self.emit(Copy(dst=reg, src=atom, line=site.line))
            rename[pname] = reg
        ret_reg: Optional[str] = None
        if callee.returns is not None:
            rname, _ = callee.returns
            ret_reg = self.fresh(f"{callee.name}$ret")
            self.emit(Copy(dst=ret_reg, src=0, line=site.line))
            if rname is not None:
                rename[rname] = ret_reg
        self.rename = rename
        self.inline_stack.append(callee.name)
        try:
            body = _splice_modifiers(self.contract, callee)
            self._lower_stmts(body.stmts, inline_ret=ret_reg or "",
                              inline_depth=True)
        finally:
            self.inline_stack.pop()
            self.rename = outer_rename
        return ret_reg if ret_reg is not None else 0

    # -- statements ---------------------------------------------------------

    def _lower_stmts(self, stmts: list[ast.Stmt], inline_ret: Optional[str] = None,
                     inline_depth: bool = False) -> None:
        for i, s in enumerate(stmts):
            if isinstance(s, ast.ReturnStmt) and inline_depth:
                if i != len(stmts) - 1:
                    raise UnsupportedFeatureError(
                        "early return in an inlined function", s.line, 1)
                if s.value is not None:
                    if not inline_ret:
                        raise UnsupportedFeatureError(
                            "value returned from a void function", s.line, 1)
                    atom = self.lower_expr(s.value)
                    self.line = s.line
                    self.emit(Copy(dst=inline_ret, src=atom, line=s.line))
                return
            self.lower_stmt(s, inline_ret, inline_depth)

    def lower_stmt(self, s: ast.Stmt, inline_ret: Optional[str] = None,
                   inline_depth: bool = False) -> None:
        self.line = s.line or self.line
        if isinstance(s, ast.Block):
            self._lower_stmts(s.stmts, inline_ret, inline_depth)
            return
        if isinstance(s, ast.VarDeclStmt):
            atom = self.lower_expr(s.init) if s.init is not None else 0
            reg = self.fresh(s.name) if inline_depth else s.name
            if inline_depth:
                self.rename[s.name] = reg
            self.locals.add(reg)
            self.line = s.line
            self.emit(Copy(dst=reg, src=atom, line=s.line))
            return
        if isinstance(s, ast.AssignStmt):
            self._lower_assign(s)
            return
        if isinstance(s, ast.ExprStmt):
            self.lower_expr(s.expr)
            return
        if isinstance(s, ast.RequireStmt):
            cond = self.lower_expr(s.cond)
            self.line = s.line
            self.emit(Require(cond=cond, kind=s.kind, line=s.line))
            return
        if isinstance(s, ast.ThrowStmt):
            self.emit(Require(cond=False, kind="throw", line=s.line))
            return
        if isinstance(s, ast.ReturnStmt):
            atom = self.lower_expr(s.value) if s.value is not None else None
            self.line = s.line
            self.emit(Return(value=atom, line=s.line))
            return
        if isinstance(s, ast.IfStmt):
            state = self._capture()
            cond = self.lower_expr(s.cond)
            cond_nodes = self._restore(state)
            cond_instrs = _straight_only(cond_nodes, s.line)
            state = self._capture()
            self._lower_stmts(s.then.stmts, inline_ret, inline_depth)
            then_nodes = self._restore(state)
            orelse_nodes: list[TreeNode] = []
            if s.orelse is not None:
                state = self._capture()
                self._lower_stmts(s.orelse.stmts, inline_ret, inline_depth)
                orelse_nodes = self._restore(state)
            br = Branch(cond=cond, line=s.line)
            self._flush()
            self.nodes.append(IfNode(cond_instrs=cond_instrs, cond=cond,
                                     branch=br, then=then_nodes,
                                     orelse=orelse_nodes))
            return
        if isinstance(s, ast.WhileStmt):
            self._lower_while(s.cond, s.body.stmts, None, s.line,
                              inline_ret, inline_depth)
            return
        if isinstance(s, ast.ForStmt):
            if s.init is not None:
                self.lower_stmt(s.init, inline_ret, inline_depth)
            cond = s.cond if s.cond is not None else ast.BoolLit(value=True,
                                                                 line=s.line)
            self._lower_while(cond, s.body.stmts, s.post, s.line,
                              inline_ret, inline_depth)
            return
        if isinstance(s, ast.PlaceholderStmt):
            raise UnsupportedFeatureError(
                "'_' is only meaningful inside a modifier", s.line, 1)
        raise UnsupportedFeatureError(f"unsupported statement {s!r}", s.line, 1)

    def _lower_while(self, cond: ast.Expr, body: list[ast.Stmt],
                     post: Optional[ast.Stmt], line: int,
                     inline_ret: Optional[str], inline_depth: bool) -> None:
        state = self._capture()
        catom = self.lower_expr(cond)
        cond_nodes = self._restore(state)
        cond_instrs = _straight_only(cond_nodes, line)
        state = self._capture()
        self._lower_stmts(body, inline_ret, inline_depth)
        if post is not None:
            self.lower_stmt(post, inline_ret, inline_depth)
        body_nodes = self._restore(state)
        br = Branch(cond=catom, line=line)
        self._flush()
        self.nodes.append(WhileNode(cond_instrs=cond_instrs, cond=catom,
                                    branch=br, body=body_nodes))

    def _lower_assign(self, s: ast.AssignStmt) -> None:
        value = self.lower_expr(s.value)
        self.line = s.line
        target = s.target
        if isinstance(target, ast.Ident):
            reg = self._local(target.name)
            if reg is not None:
                if s.op == "=":
                    self.emit(Copy(dst=reg, src=value, line=s.line))
                else:
                    self.emit(BinOp(dst=reg, op=s.op[0], a=reg, b=value,
                                    line=s.line))
                return
        path = self._storage_path(target)
        if path is None:
            raise UnknownIdentifierError(
                f"cannot assign to {ast.expr_to_str(target)!r}", s.line, 1)
        var, index = path
        if s.op == "=":
            self.emit(StoreStorage(var=var, index=index, value=value, line=s.line))
            return
        tmp = self.fresh()
        self.emit(LoadStorage(dst=tmp, var=var, index=index, line=s.line))
        res = self.fresh()
        self.emit(BinOp(dst=res, op=s.op[0], a=tmp, b=value, line=s.line))
        self.emit(StoreStorage(var=var, index=index, value=res, line=s.line))


def _straight_only(nodes: list[TreeNode], line: int) -> list[Instr]:
    out: list[Instr] = []
    for node in nodes:
        if not isinstance(node, Straight):
            raise UnsupportedFeatureError(
                "control flow inside a condition expression", line, 1)
        out.extend(node.instrs)
    return out


def _flatten(nodes: list[TreeNode], out: list[Instr]) -> None:
    for node in nodes:
        if isinstance(node, Straight):
            out.extend(node.instrs)
        elif isinstance(node, IfNode):
            out.extend(node.cond_instrs)
            out.append(node.branch)
            t0 = len(out)
            _flatten(node.then, out)
            if node.orelse:
                skip = Jump(line=node.branch.line)
                out.append(skip)
                e0 = len(out)
                _flatten(node.orelse, out)
                after = len(out)
                skip.target = after
                node.branch.on_true = t0
                node.branch.on_false = e0
            else:
                after = len(out)
                node.branch.on_true = t0
                node.branch.on_false = after
        elif isinstance(node, WhileNode):
            head = len(out)
            out.extend(node.cond_instrs)
            out.append(node.branch)
            b0 = len(out)
            _flatten(node.body, out)
            out.append(Jump(target=head, line=node.branch.line))
            node.branch.on_true = b0
            node.branch.on_false = len(out)
        else:
            raise ValueError(f"unknown tree node {node!r}")


def _lower_function(unit: ast.SourceUnit, c: ast.ContractDef,
                    slots: dict[str, _StorageSlot], structs: dict[str, ast.StructDef],
                    fn: ast.FunctionDef,
                    preamble: Optional[list[ast.Stmt]] = None) -> FunctionIR:
    low = _FunctionLowerer(unit, c, slots, structs)
    params: list[str] = []
    sorts: dict[str, str] = {}
    for pname, pty in fn.params:
        if isinstance(pty, ast.MappingType):
            raise UnsupportedFeatureError(
                f"mapping-typed parameter {pname!r}", fn.line, 1)
        params.append(pname)
        low.locals.add(pname)
        if isinstance(pty, ast.Elementary):
            sorts[pname] = _elementary_sort(pty.name)
        else:
            sorts[pname] = "addr"
    if fn.returns is not None and fn.returns[0] is not None:
        rname = fn.returns[0]
        low.locals.add(rname)
        low.line = fn.line
        low.emit(Copy(dst=rname, src=0, line=fn.line))
    body = _splice_modifiers(c, fn)
    if preamble:
        low._lower_stmts(preamble)
    low._lower_stmts(body.stmts)
    low._flush()
    tree = low.nodes
    flat: list[Instr] = []
    _flatten(tree, flat)
    for i, ins in enumerate(flat):
        ins.idx = i
    return FunctionIR(name=fn.name, params=params, param_sorts=sorts,
                      visibility=fn.visibility, payable=fn.payable,
                      instrs=flat, tree=tree, line=fn.line)


def _storage_layout(unit: ast.SourceUnit, c: ast.ContractDef) \
        -> tuple[dict[str, _StorageSlot], list[ast.Stmt]]:
    structs = {sd.name: sd for sd in c.structs}
    unit_contracts = {u.name for u in unit.contracts}
    slots: dict[str, _StorageSlot] = {}
    init_stmts: list[ast.Stmt] = []

    def leaf(ty: ast.TypeName) -> tuple[str, Optional[str]]:
        """(sort, contract_type) of a non-aggregate type."""
        if isinstance(ty, ast.Elementary):
            return _elementary_sort(ty.name), None
        if isinstance(ty, ast.NamedType):
            return "addr", ty.name if ty.name in unit_contracts else None
        raise UnsupportedFeatureError("unsupported storage type", c.line, 1)

    def add(name: str, ty: ast.TypeName, mapping: bool, line: int) -> None:
        if isinstance(ty, ast.MappingType):
            add(name, ty.value, True, line)
            return
        if isinstance(ty, ast.ArrayType):
            add(name, ty.base, True, line)
            return
        if isinstance(ty, ast.NamedType) and ty.name in structs:
            for fname, fty in structs[ty.name].fields:
                add(f"{name}.{fname}", fty, mapping, line)
            return
        sort, ctype = leaf(ty)
        slots[name] = _StorageSlot(sort=sort, mapping=mapping,
                                   contract_type=ctype)

    for sv in c.state_vars:
        add(sv.name, sv.ty, False, sv.line)
        if sv.init is not None:
            target = ast.Ident(name=sv.name, line=sv.line)
            init_stmts.append(ast.AssignStmt(target=target, op="=",
                                             value=sv.init, line=sv.line))
    return slots, init_stmts


def lower_contract(unit: ast.SourceUnit, c: ast.ContractDef) -> ContractIR:
    merged = _merge_contract(unit, c)
    slots, init_stmts = _storage_layout(unit, merged)
    structs = {sd.name: sd for sd in merged.structs}
    out = ContractIR(name=merged.name, path=unit.path, line=merged.line)
    for var, slot in slots.items():
        out.storage_sorts[var] = slot.sort
        if slot.mapping:
            out.mappings.add(var)
        if slot.contract_type is not None:
            out.contract_types[var] = slot.contract_type
    ctor = merged.constructor
    if ctor is None and init_stmts:
        ctor = ast.FunctionDef(name="constructor", params=[],
                               body=ast.Block(stmts=[], line=merged.line),
                               is_constructor=True, line=merged.line)
    if ctor is not None:
        out.constructor = _lower_function(unit, merged, slots, structs, ctor,
                                          preamble=init_stmts)
        out.constructor.visibility = "constructor"
    # private/internal functions exist only inlined at their call sites
    for fn in merged.functions:
        if fn.visibility in ("public", "external"):
            out.functions.append(_lower_function(unit, merged, slots, structs, fn))
    return out


def lower_unit(unit: ast.SourceUnit) -> list[ContractIR]:
    """Lower every contract in a source unit."""
    return [lower_contract(unit, c) for c in unit.contracts]
