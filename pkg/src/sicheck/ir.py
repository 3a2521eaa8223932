"""Flat three-address IR with a parallel structured (tree) view.

Lowering turns each function into a list of numbered instructions whose
operands are atoms: Python ints/bools for constants, strings for register
names.  Storage is never a register; every state-variable access is an
explicit LoadStorage/StoreStorage so dependency facts fall out of the
instruction type alone.

The same instruction objects are also arranged into a tree of
Straight/IfNode/WhileNode blocks.  Path-insensitive passes and the control
flow graph use the flat list; the value-summary computation walks the tree.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional, Union

Atom = Union[int, bool, str]

EXTCALL_KINDS = ("call", "send", "transfer", "delegate", "high")


def atom_str(a: Optional[Atom]) -> str:
    if a is None:
        return "_"
    if isinstance(a, bool):
        return "true" if a else "false"
    if isinstance(a, int):
        return str(a)
    return "%" + a


@dataclass
class Instr:
    idx: int = field(default=-1, compare=False)
    line: int = field(default=0, compare=False)

    # -- generic accessors used by the fact extractor --------------------

    def defined_reg(self) -> Optional[str]:
        return getattr(self, "dst", None)

    def used_atoms(self) -> list[Atom]:
        out: list[Atom] = []
        for name in ("src", "a", "b", "cond", "value", "dest", "index"):
            v = getattr(self, name, None)
            if v is not None and name != "dst":
                out.append(v)
        out.extend(getattr(self, "args", ()))
        return out

    def used_regs(self) -> list[str]:
        return [a for a in self.used_atoms() if isinstance(a, str)]

    def storage_reads(self) -> list[str]:
        return [self.var] if isinstance(self, LoadStorage) else []

    def storage_writes(self) -> list[str]:
        return [self.var] if isinstance(self, StoreStorage) else []


@dataclass
class Copy(Instr):
    dst: str = ""
    src: Atom = 0


@dataclass
class UnOp(Instr):
    dst: str = ""
    op: str = ""
    a: Atom = 0


@dataclass
class BinOp(Instr):
    dst: str = ""
    op: str = ""
    a: Atom = 0
    b: Atom = 0


@dataclass
class LoadEnv(Instr):
    """Read from the transaction environment (msg.sender, this.balance, ...)."""

    dst: str = ""
    what: str = ""


@dataclass
class Havoc(Instr):
    """Assign an unconstrained fresh value; dst=None is a pure no-op."""

    dst: Optional[str] = None
    note: str = ""


@dataclass
class LoadStorage(Instr):
    dst: str = ""
    var: str = ""
    index: Optional[Atom] = None


@dataclass
class StoreStorage(Instr):
    var: str = ""
    index: Optional[Atom] = None
    value: Atom = 0


@dataclass
class Require(Instr):
    cond: Atom = False
    kind: str = "require"  # "require" | "assert" | "throw"


@dataclass
class Branch(Instr):
    cond: Atom = False
    on_true: int = -1
    on_false: int = -1


@dataclass
class Jump(Instr):
    target: int = -1


@dataclass
class Return(Instr):
    value: Optional[Atom] = None


@dataclass
class ExtCall(Instr):
    """External call; kind is one of EXTCALL_KINDS.

    call     low-level ``dest.call.value(v)(...)`` / ``dest.call(...)``
    send     ``dest.send(v)`` (gas-stipended, returns bool)
    transfer ``dest.transfer(v)`` (gas-stipended, reverts on failure)
    delegate ``dest.delegatecall(...)``
    high     ``obj.method(...)`` on a contract-typed or unknown target
    """

    dst: Optional[str] = None
    kind: str = "call"
    dest: Atom = 0
    value: Optional[Atom] = None
    args: list[Atom] = field(default_factory=list)
    method: Optional[str] = None
    dest_decl: Optional[str] = None  # contract type of the target, if declared


@dataclass
class SelfDestruct(Instr):
    dest: Atom = 0


@dataclass
class NewContract(Instr):
    dst: Optional[str] = None
    contract: str = ""
    args: list[Atom] = field(default_factory=list)


# ---------------------------------------------------------------------------
# Structured view


@dataclass
class TreeNode:
    pass


@dataclass
class Straight(TreeNode):
    instrs: list[Instr] = field(default_factory=list)


@dataclass
class IfNode(TreeNode):
    cond_instrs: list[Instr] = field(default_factory=list)
    cond: Atom = False
    branch: Branch = None
    then: list[TreeNode] = field(default_factory=list)
    orelse: list[TreeNode] = field(default_factory=list)


@dataclass
class WhileNode(TreeNode):
    cond_instrs: list[Instr] = field(default_factory=list)
    cond: Atom = False
    branch: Branch = None
    body: list[TreeNode] = field(default_factory=list)


def tree_instrs(nodes: list[TreeNode]) -> Iterator[Instr]:
    """All instructions in a subtree, in source order."""
    for node in nodes:
        if isinstance(node, Straight):
            yield from node.instrs
        elif isinstance(node, IfNode):
            yield from node.cond_instrs
            yield node.branch
            yield from tree_instrs(node.then)
            yield from tree_instrs(node.orelse)
        elif isinstance(node, WhileNode):
            yield from node.cond_instrs
            yield node.branch
            yield from tree_instrs(node.body)


def written_storage_vars(nodes: list[TreeNode]) -> set[str]:
    return {v for ins in tree_instrs(nodes) for v in ins.storage_writes()}


# ---------------------------------------------------------------------------
# Functions and contracts


@dataclass
class FunctionIR:
    name: str
    params: list[str] = field(default_factory=list)
    param_sorts: dict[str, str] = field(default_factory=dict)
    visibility: str = "public"
    payable: bool = False
    instrs: list[Instr] = field(default_factory=list)
    tree: list[TreeNode] = field(default_factory=list)
    line: int = 0

    @property
    def is_public(self) -> bool:
        return self.visibility in ("public", "external")


@dataclass
class ContractIR:
    name: str
    path: str = "<memory>"
    storage_sorts: dict[str, str] = field(default_factory=dict)  # var -> uint/bool/addr
    mappings: set[str] = field(default_factory=set)  # index-collapsed vars
    contract_types: dict[str, str] = field(default_factory=dict)  # var -> contract name
    functions: list[FunctionIR] = field(default_factory=list)
    constructor: Optional[FunctionIR] = None
    line: int = 0

    def function(self, name: str) -> FunctionIR:
        for f in self.functions:
            if f.name == name:
                return f
        raise KeyError(name)

    @property
    def public_functions(self) -> list[FunctionIR]:
        return [f for f in self.functions if f.is_public]

    def all_functions(self) -> list[FunctionIR]:
        out = list(self.functions)
        if self.constructor is not None:
            out.append(self.constructor)
        return out


# ---------------------------------------------------------------------------
# Text serialization (for --dump and debugging)


def instr_to_str(ins: Instr) -> str:
    if isinstance(ins, Copy):
        return f"%{ins.dst} = {atom_str(ins.src)}"
    if isinstance(ins, UnOp):
        return f"%{ins.dst} = {ins.op}{atom_str(ins.a)}"
    if isinstance(ins, BinOp):
        return f"%{ins.dst} = {atom_str(ins.a)} {ins.op} {atom_str(ins.b)}"
    if isinstance(ins, LoadEnv):
        return f"%{ins.dst} = env {ins.what}"
    if isinstance(ins, Havoc):
        note = f" ; {ins.note}" if ins.note else ""
        if ins.dst is None:
            return "nop" + note
        return f"%{ins.dst} = havoc{note}"
    if isinstance(ins, LoadStorage):
        idx = f"[{atom_str(ins.index)}]" if ins.index is not None else ""
        return f"%{ins.dst} = load {ins.var}{idx}"
    if isinstance(ins, StoreStorage):
        idx = f"[{atom_str(ins.index)}]" if ins.index is not None else ""
        return f"store {ins.var}{idx} = {atom_str(ins.value)}"
    if isinstance(ins, Require):
        return f"{ins.kind} {atom_str(ins.cond)}"
    if isinstance(ins, Branch):
        return f"branch {atom_str(ins.cond)} ? {ins.on_true} : {ins.on_false}"
    if isinstance(ins, Jump):
        return f"jump {ins.target}"
    if isinstance(ins, Return):
        return f"return {atom_str(ins.value)}" if ins.value is not None else "return"
    if isinstance(ins, ExtCall):
        dst = f"%{ins.dst} = " if ins.dst else ""
        val = f" value={atom_str(ins.value)}" if ins.value is not None else ""
        method = f".{ins.method}" if ins.method else ""
        args = ", ".join(atom_str(a) for a in ins.args)
        return f"{dst}extcall.{ins.kind} {atom_str(ins.dest)}{method}({args}){val}"
    if isinstance(ins, SelfDestruct):
        return f"selfdestruct {atom_str(ins.dest)}"
    if isinstance(ins, NewContract):
        dst = f"%{ins.dst} = " if ins.dst else ""
        args = ", ".join(atom_str(a) for a in ins.args)
        return f"{dst}new {ins.contract}({args})"
    raise ValueError(f"unknown instruction {ins!r}")


def function_to_str(fn: FunctionIR) -> str:
    head = f"function {fn.name}({', '.join(fn.params)}) {fn.visibility}"
    if fn.payable:
        head += " payable"
    lines = [head]
    for ins in fn.instrs:
        lines.append(f"  {ins.idx:>3}| L{ins.line:<4} {instr_to_str(ins)}")
    return "\n".join(lines)


def contract_to_str(c: ContractIR) -> str:
    lines = [f"contract {c.name}"]
    for var in sorted(c.storage_sorts):
        tag = "mapping " if var in c.mappings else ""
        lines.append(f"  storage {var}: {tag}{c.storage_sorts[var]}")
    for fn in c.all_functions():
        lines.append("")
        lines.append(function_to_str(fn))
    return "\n".join(lines) + "\n"
