"""Control flow graph over the flat IR.

Nodes are ``(function_name, index)`` pairs.  Index -1 is the synthetic entry
node and ``len(instrs)`` the synthetic exit node; everything in between is an
instruction.  Edges here are intra-procedural only — the cross-function edges
an external call induces (to public entries and back) are added as graph
facts by the dependency-graph builder, not here.

``reach`` is the reflexive-transitive closure of the intra-procedural edges;
a failing ``require`` aborts the transaction, so only its success edge
appears.
"""

from __future__ import annotations

from typing import Optional

from .errors import UnknownNodeError
from .ir import Branch, ContractIR, FunctionIR, Instr, Jump, Return

NodeId = tuple[str, int]


def transitive_closure(succ: dict[NodeId, set[NodeId]],
                       reflexive: bool = True) -> dict[NodeId, set[NodeId]]:
    """Reachability over an explicit successor map."""
    nodes = set(succ)
    for outs in succ.values():
        nodes |= outs
    reach: dict[NodeId, set[NodeId]] = {}
    for start in nodes:
        seen: set[NodeId] = {start} if reflexive else set()
        stack = list(succ.get(start, ()))
        while stack:
            n = stack.pop()
            if n in seen:
                continue
            seen.add(n)
            stack.extend(succ.get(n, ()))
        reach[start] = seen
    return reach


def build_icfg(prog: ContractIR) -> "ICFG":
    return ICFG(prog)


class ICFG:
    def __init__(self, contract: ContractIR):
        self.contract = contract
        self.functions: dict[str, FunctionIR] = {
            f.name: f for f in contract.all_functions()}
        self.succ: dict[NodeId, set[NodeId]] = {}
        self.pred: dict[NodeId, set[NodeId]] = {}
        for fn in contract.all_functions():
            self._build_function(fn)
        self._reach = transitive_closure(self.succ)

    def _build_function(self, fn: FunctionIR) -> None:
        name = fn.name
        n = len(fn.instrs)

        def clamp(i: int) -> NodeId:
            return (name, min(i, n))

        self._add_edge((name, -1), clamp(0))
        for i, ins in enumerate(fn.instrs):
            if isinstance(ins, Branch):
                self._add_edge((name, i), clamp(ins.on_true))
                self._add_edge((name, i), clamp(ins.on_false))
            elif isinstance(ins, Jump):
                self._add_edge((name, i), clamp(ins.target))
            elif isinstance(ins, Return):
                self._add_edge((name, i), (name, n))
            else:
                self._add_edge((name, i), clamp(i + 1))
        self.succ.setdefault((name, n), set())
        self.pred.setdefault((name, n), set())

    def _add_edge(self, a: NodeId, b: NodeId) -> None:
        self.succ.setdefault(a, set()).add(b)
        self.succ.setdefault(b, set())
        self.pred.setdefault(b, set()).add(a)
        self.pred.setdefault(a, set())

    # -- queries ------------------------------------------------------------

    def entry(self, fn: str) -> NodeId:
        if fn not in self.functions:
            raise UnknownNodeError(f"no function {fn!r}")
        return (fn, -1)

    def exit(self, fn: str) -> NodeId:
        if fn not in self.functions:
            raise UnknownNodeError(f"no function {fn!r}")
        return (fn, len(self.functions[fn].instrs))

    def instr_at(self, node: NodeId) -> Optional[Instr]:
        fn, idx = node
        instrs = self.functions[fn].instrs
        if 0 <= idx < len(instrs):
            return instrs[idx]
        return None

    def line_of(self, node: NodeId) -> int:
        ins = self.instr_at(node)
        if ins is not None:
            return ins.line
        return self.functions[node[0]].line

    def reach_set(self, node: NodeId) -> set[NodeId]:
        if node not in self._reach:
            raise UnknownNodeError(f"unknown node {node!r}")
        return self._reach[node]

    def reach(self, a: NodeId, b: NodeId) -> bool:
        return b in self.reach_set(a)

    def nodes(self) -> list[NodeId]:
        return sorted(self.succ)

    # -- serialization ------------------------------------------------------

    @staticmethod
    def node_str(node: NodeId, n_instrs: Optional[int] = None) -> str:
        fn, idx = node
        if idx == -1:
            return f"{fn}:entry"
        if n_instrs is not None and idx == n_instrs:
            return f"{fn}:exit"
        return f"{fn}:{idx}"

    def _name(self, node: NodeId) -> str:
        fn, idx = node
        return self.node_str(node, len(self.functions[fn].instrs))

    def to_text(self) -> str:
        lines = []
        for a in self.nodes():
            for b in sorted(self.succ[a]):
                lines.append(f"{self._name(a)} -> {self._name(b)}")
        return "\n".join(lines) + "\n"
