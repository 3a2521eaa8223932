"""Base-fact extraction: the extensional database the rules run on.

Expected facts are hand-derived from small sources at instruction-node
granularity (nodes located by instruction type, not by hard-coded index),
and reachability facts are cross-checked against the independent BFS
oracle.  Taint and owner analyses are checked on both in-test sources and
the corpus fixtures built for them.
"""

from conftest import line_pairs, pipeline, pipeline_file
from oracles import bfs_reach
from sicheck.facts import (SYMBOLIC_CV, derive_base_facts,
                           owner_only_statements, owner_variables, saturate,
                           taint_call_destinations)
from sicheck.datalog import L, Rule, Var
from sicheck.frontend import lower, parse_source
from sicheck.icfg import build_icfg
from sicheck.ir import (Branch, ExtCall, LoadStorage, Require, SelfDestruct,
                        StoreStorage)


def facts_of(src: str, contract: str | None = None):
    prog = lower(parse_source(src), contract)
    g = build_icfg(prog)
    return prog, g, derive_base_facts(g, prog)


def only_node(prog, fname: str, pred) -> tuple[str, int]:
    fn = prog.function(fname)
    (idx,) = [i for i, ins in enumerate(fn.instrs) if pred(ins)]
    return (fname, idx)


# ---------------------------------------------------------------------------
# Core relations


def test_write_read_depend_facts():
    # [DERIVED] a = b + v reads b, writes a, and every instruction in the
    # chain is data-dependent on b.
    prog, _, fb = facts_of(
        """
        contract C {
            uint a;
            uint b;
            function f(uint v) public { a = b + v; }
        }
        """
    )
    store = only_node(prog, "f", lambda i: isinstance(i, StoreStorage))
    load = only_node(prog, "f", lambda i: isinstance(i, LoadStorage))
    assert fb.tuples("write") == {(store, "a")}
    assert fb.tuples("read") == {(load, "b")}
    assert (store, "b") in fb.tuples("depend")
    assert (store, "a") not in fb.tuples("depend")
    assert fb.tuples("storage") == {("a",), ("b",)}


def test_mapping_access_collapses_to_base_variable():
    prog, _, fb = facts_of(
        """
        contract C {
            mapping(address => uint) bal;
            function f() public { bal[msg.sender] += 1; }
        }
        """
    )
    store = only_node(prog, "f", lambda i: isinstance(i, StoreStorage))
    load = only_node(prog, "f", lambda i: isinstance(i, LoadStorage))
    assert fb.has("write", store, "bal")
    assert fb.has("read", load, "bal")


def test_extcall_value_forms():
    prog, _, fb = facts_of(
        """
        contract C {
            uint price;
            address payee;
            function f(address dst, uint v) public {
                dst.send(5);
                dst.call.value(v)();
                payee.call.value(price)();
            }
        }
        """
    )
    fn = prog.function("f")
    calls = [(("f", i), ins) for i, ins in enumerate(fn.instrs)
             if isinstance(ins, ExtCall)]
    (send_n, _), (sym_n, _), (price_n, _) = calls
    assert fb.has("extcall", send_n, 5)          # constant Ether amount
    assert fb.has("extcall", sym_n, SYMBOLIC_CV)  # register-valued amount
    assert fb.has("extcall", price_n, SYMBOLIC_CV)
    assert fb.has("extcall_kind", send_n, "send")
    assert fb.has("extcall_kind", sym_n, "call")
    # the third call's amount is storage-derived, the second's is not
    assert fb.has("dep_value", price_n, "price")
    assert not any(n == sym_n for n, _ in fb.tuples("dep_value"))
    # its destination comes out of storage too
    assert fb.has("dep_dest", price_n, "payee")


def test_call_without_value_has_zero_cv():
    prog, _, fb = facts_of(
        """
        contract C {
            function f(address dst) public { dst.call(); }
        }
        """
    )
    n = only_node(prog, "f", lambda i: isinstance(i, ExtCall))
    assert fb.has("extcall", n, 0)


def test_guard_selfdestruct_public_entry_exit():
    prog, _, fb = facts_of(
        """
        contract C {
            uint x;
            address boss;
            function f(uint v) public {
                require(v > 0);
                if (v > 1) { x = v; }
            }
            function kill() public { selfdestruct(boss); }
        }
        """
    )
    req = only_node(prog, "f", lambda i: isinstance(i, Require))
    br = only_node(prog, "f", lambda i: isinstance(i, Branch))
    sd = only_node(prog, "kill", lambda i: isinstance(i, SelfDestruct))
    assert fb.has("guard", req) and fb.has("guard", br)
    assert fb.tuples("selfdestruct") == {(sd,)}
    assert fb.has("public", "f") and fb.has("public", "kill")
    assert fb.has("entry", ("f", -1), "f")
    assert fb.has("exit", ("f", len(prog.function("f").instrs)), "f")


def test_line_facts_cover_every_instruction():
    prog, _, fb = facts_of(
        """
        contract C {
            uint x;
            function f(uint v) public {
                x = v;
                x = v + 1;
            }
        }
        """
    )
    lines = dict(fb.tuples("line"))
    fn = prog.function("f")
    assert lines[("f", 0)] == 5 and lines[("f", -1)] == 4
    assert all(("f", i) in lines for i in range(len(fn.instrs)))
    assert fb.line_of(("f", 0)) == 5
    assert fb.line_of(("missing", 99)) == 0


# ---------------------------------------------------------------------------
# Reachability facts vs oracle


def test_reach_facts_equal_bfs_closure():
    for name in ("swap_order.sol", "stale_balance_withdraw.sol",
                 "mutex_guarded_wallet.sol"):
        prog, g, fb, _ = pipeline_file(name)
        oracle = bfs_reach(g.succ)
        expected = {(a, b) for a, outs in oracle.items() for b in outs}
        assert fb.tuples("reach") == expected, name


# ---------------------------------------------------------------------------
# Taint: attacker-steerable call destinations


def test_call_with_param_destination_is_tainted():
    prog, g, fb = facts_of(
        """
        contract T {
            function pay(address dst) public { dst.call.value(1)(); }
            function paysend(address dst) public { dst.send(1); }
            function paytrans(address dst) public { dst.transfer(1); }
        }
        """
    )
    tainted = taint_call_destinations(g, prog, fb)
    call = only_node(prog, "pay", lambda i: isinstance(i, ExtCall))
    assert tainted == {call}  # send/transfer stipends cannot re-enter
    assert fb.has("tainted_call", call)


def test_taint_flows_through_storage_writes():
    # [DERIVED] set() stores an attacker-chosen address that hit() later
    # calls, so the call is tainted even though its destination is storage.
    prog, g, fb = facts_of(
        """
        contract T {
            address target;
            function set(address t) public { target = t; }
            function hit() public { target.call.value(1)(); }
        }
        """
    )
    tainted = taint_call_destinations(g, prog, fb)
    call = only_node(prog, "hit", lambda i: isinstance(i, ExtCall))
    assert call in tainted
    assert "target" in fb.tainted_storage


def test_constructor_arguments_are_trusted():
    prog, g, _ = facts_of(
        """
        contract T {
            address target;
            constructor(address t) public { target = t; }
            function hit() public { target.call.value(1)(); }
        }
        """
    )
    assert taint_call_destinations(g, prog) == set()


def test_msg_sender_is_a_taint_source():
    prog, g, _ = facts_of(
        """
        contract T {
            function bounce() public { msg.sender.call.value(1)(); }
        }
        """
    )
    call = only_node(prog, "bounce", lambda i: isinstance(i, ExtCall))
    assert taint_call_destinations(g, prog) == {call}


# ---------------------------------------------------------------------------
# Owner-only statements


def test_owner_variable_closure_guarded_vault():
    # [DERIVED] owner is constructor-written and its only public write is
    # gated on msg.sender == owner, so it stays in the owner set.
    prog, g, fb, _ = pipeline_file("vault_guarded_owner_update.sol",
                                   "GuardedVault")
    assert fb.owner_vars == {"owner"}
    transfer = only_node(prog, "withdrawAll",
                         lambda i: isinstance(i, ExtCall))
    assert fb.has("owner", transfer)


def test_owner_variable_closure_open_vault():
    # [DERIVED] newOwner writes owner with no guard, so owner leaves the
    # set and the require in withdrawAll no longer gates anything.
    prog, g, fb, _ = pipeline_file("vault_open_owner_update.sol", "Vault")
    assert fb.owner_vars == set()
    transfer = only_node(prog, "withdrawAll",
                         lambda i: isinstance(i, ExtCall))
    assert not fb.has("owner", transfer)


def test_owner_branch_gates_only_the_guarded_arm():
    prog, g, fb = facts_of(
        """
        contract B {
            address owner;
            uint x;
            constructor() public { owner = msg.sender; }
            function f() public {
                if (msg.sender == owner) { x = 1; } else { x = 2; }
            }
        }
        """
    )
    gated = owner_only_statements(g, prog, fb)
    fn = prog.function("f")
    stores = {ins.value: ("f", i) for i, ins in enumerate(fn.instrs)
              if isinstance(ins, StoreStorage)}
    assert stores[1] in gated
    assert stores[2] not in gated
    assert owner_variables(g, prog) == {"owner"}


def test_owner_inequality_guard_gates_the_fallthrough():
    prog, g, _ = facts_of(
        """
        contract B {
            address owner;
            uint x;
            constructor() public { owner = msg.sender; }
            function f() public {
                if (msg.sender != owner) { return; }
                x = 3;
            }
        }
        """
    )
    gated = owner_only_statements(g, prog)
    store = only_node(prog, "f", lambda i: isinstance(i, StoreStorage))
    assert store in gated


# ---------------------------------------------------------------------------
# Rule application on top of the base facts


def test_saturate_extends_base_and_keeps_auxiliary_state():
    prog, g, fb = facts_of(
        """
        contract C {
            address target;
            function set(address t) public { target = t; }
            function hit() public { target.call.value(1)(); }
        }
        """
    )
    taint_call_destinations(g, prog, fb)
    rules = [Rule(L("risky", Var("S")),
                  [L("extcall", Var("S"), Var("CV")),
                   L("tainted_call", Var("S"))])]
    out = saturate(rules, fb)
    call = only_node(prog, "hit", lambda i: isinstance(i, ExtCall))
    assert out.tuples("risky") == {(call,)}
    assert out.tuples("write") == fb.tuples("write")  # EDB preserved
    assert out.tainted_storage == fb.tainted_storage
    assert out.reg_deps is fb.reg_deps


def test_tsv_rendering_skips_reach_and_formats_nodes():
    _, _, fb = facts_of(
        """
        contract C {
            uint x;
            function f(uint v) public { x = v; }
        }
        """
    )
    text = fb.to_tsv()
    assert "# write" in text and "# reach" not in text
    assert "f:0\tx" in text
