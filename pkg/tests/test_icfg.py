"""Control-flow graph construction and reachability.

Reachability is checked against an independent breadth-first oracle
(tests/oracles.py) both on hand-written programs and across the whole
fixture corpus; edge shapes for branches, loops, returns and requires are
asserted against hand-derived successor sets.
"""

from hypothesis import given, settings
from hypothesis import strategies as st
import pytest

from conftest import all_fixture_files
from oracles import bfs_reach
from sicheck.errors import UnknownNodeError
from sicheck.frontend import lower, parse_source
from sicheck.icfg import build_icfg, transitive_closure
from sicheck.ir import Branch, Jump, Require, Return


def graph_of(src: str, contract: str | None = None):
    prog = lower(parse_source(src), contract)
    return prog, build_icfg(prog)


# ---------------------------------------------------------------------------
# Edge shapes


def test_straight_line_chain():
    _, g = graph_of(
        """
        contract C {
            uint x;
            function f(uint v) public { x = v + 1; }
        }
        """
    )
    # entry -> 0 -> 1 -> exit, nothing else
    assert g.succ[("f", -1)] == {("f", 0)}
    assert g.succ[("f", 0)] == {("f", 1)}
    assert g.succ[("f", 1)] == {("f", 2)}
    assert g.succ[("f", 2)] == set()
    assert g.exit("f") == ("f", 2)


def test_branch_has_exactly_two_successors():
    _, g = graph_of(
        """
        contract C {
            uint s;
            function f() public { if (s > 2) { s = 0; } else { s = 1; } }
        }
        """
    )
    f = g.functions["f"]
    (bi,) = [i for i, ins in enumerate(f.instrs) if isinstance(ins, Branch)]
    br = f.instrs[bi]
    assert g.succ[("f", bi)] == {("f", br.on_true), ("f", br.on_false)}
    # the then-arm jump skips the else arm
    (ji,) = [i for i, ins in enumerate(f.instrs) if isinstance(ins, Jump)]
    assert g.succ[("f", ji)] == {("f", f.instrs[ji].target)}


def test_loop_creates_a_cycle():
    _, g = graph_of(
        """
        contract C {
            uint n;
            function f() public { while (n > 0) { n -= 1; } }
        }
        """
    )
    f = g.functions["f"]
    (ji,) = [i for i, ins in enumerate(f.instrs) if isinstance(ins, Jump)]
    head = ("f", f.instrs[ji].target)
    body = ("f", ji)
    assert g.reach(head, body) and g.reach(body, head)


def test_return_edges_to_exit_not_fallthrough():
    _, g = graph_of(
        """
        contract C {
            uint s;
            function f(bool v) public returns (uint) {
                if (v) { return 1; }
                s = 2;
            }
        }
        """
    )
    f = g.functions["f"]
    (ri,) = [i for i, ins in enumerate(f.instrs) if isinstance(ins, Return)]
    assert g.succ[("f", ri)] == {g.exit("f")}
    # the store after the if is NOT reachable from the return
    (si,) = [i for i, ins in enumerate(f.instrs)
             if ins.storage_writes() == ["s"]]
    assert not g.reach(("f", ri), ("f", si))


def test_require_has_only_the_success_edge():
    # [DERIVED] a failing require aborts, so no failure edge exists.
    _, g = graph_of(
        """
        contract C {
            uint s;
            function f(uint v) public { require(v > 0); s = v; }
        }
        """
    )
    f = g.functions["f"]
    (qi,) = [i for i, ins in enumerate(f.instrs) if isinstance(ins, Require)]
    assert g.succ[("f", qi)] == {("f", qi + 1)}


def test_empty_body_entry_reaches_exit_directly():
    _, g = graph_of("contract C { function f() public { } }")
    assert g.succ[("f", -1)] == {("f", 0)}
    assert g.exit("f") == ("f", 0)


def test_constructor_is_part_of_the_graph():
    _, g = graph_of(
        """
        contract C {
            uint x = 5;
            function f() public { x = 1; }
        }
        """
    )
    assert g.entry("constructor") == ("constructor", -1)
    assert g.reach(g.entry("constructor"), g.exit("constructor"))


# ---------------------------------------------------------------------------
# API errors


def test_unknown_function_and_node_raise():
    _, g = graph_of("contract C { function f() public { } }")
    with pytest.raises(UnknownNodeError):
        g.entry("nope")
    with pytest.raises(UnknownNodeError):
        g.exit("nope")
    with pytest.raises(UnknownNodeError):
        g.reach_set(("nope", 0))


def test_line_of_synthetic_nodes_falls_back_to_function_line():
    _, g = graph_of(
        """
        contract C {
            uint x;
            function f() public { x = 1; }
        }
        """
    )
    assert g.line_of(("f", 0)) == 4      # the statement
    assert g.line_of(g.entry("f")) == 4  # function header line
    assert g.line_of(g.exit("f")) == 4


# ---------------------------------------------------------------------------
# Reachability vs independent oracle


def test_reach_matches_bfs_oracle_on_corpus():
    for path in all_fixture_files():
        unit = parse_source(path.read_text())
        for cd in unit.contracts:
            g = build_icfg(lower(unit, cd.name))
            oracle = bfs_reach(g.succ)
            for node in g.nodes():
                assert g.reach_set(node) == oracle[node], (path.name, node)


@st.composite
def random_digraph(draw):
    n = draw(st.integers(min_value=1, max_value=8))
    nodes = [("n", i) for i in range(n)]
    succ = {v: set() for v in nodes}
    for a in nodes:
        for b in nodes:
            if draw(st.booleans()):
                succ[a].add(b)
    return succ


@settings(max_examples=60, deadline=None)
@given(random_digraph())
def test_transitive_closure_matches_oracle(succ):
    assert transitive_closure(succ) == bfs_reach(succ)


@settings(max_examples=60, deadline=None)
@given(random_digraph())
def test_transitive_closure_is_reflexive_and_transitive(succ):
    reach = transitive_closure(succ)
    for a, outs in reach.items():
        assert a in outs
        for b in outs:
            assert reach[b] <= outs  # a->b and b->c implies a->c
