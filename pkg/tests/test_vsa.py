"""Value summaries: per-variable ⟨value, condition⟩ pairs per transaction.

Exact expected summaries are hand-derived from the walker's documented
semantics ([DERIVED]): stores contribute pairs under the current path
condition, return/selfdestruct cut the path, loops havoc written
variables, mapping stores are weak updates.  A deterministic coverage
check compares havoc-free summaries against the concrete interpreter.
"""

from conftest import pipeline_file
from sicheck.frontend import lower, parse_source
from sicheck.symexec import concrete_run
from sicheck.terms import (FALSE, MASK, TRUE, Binop, Cases, Const, Sym, Unop,
                           evaluate, simplify)
from sicheck.vsa import (HAVOC_PREFIX, SummaryPair, ValueSummary, arg_sym,
                         compute_summary, is_boundary_sym, mu_merge, pre_sym)


def summary_of(src: str, contract: str | None = None):
    prog = lower(parse_source(src), contract)
    return prog, compute_summary(prog)


# ---------------------------------------------------------------------------
# Symbol naming


def test_symbol_constructors_and_boundary_test():
    assert pre_sym("x").name == "pre$x"
    assert arg_sym("f", "v").name == "arg$f$v"
    assert is_boundary_sym("arg$f$v")
    assert is_boundary_sym("hv$f$0")
    assert not is_boundary_sym("pre$x")


def test_mu_merge_identical_values_collapse():
    b = Sym("p", "bool")
    v = Sym("x")
    assert mu_merge(b, v, v) == v
    merged = mu_merge(b, Const(1), Const(2))
    assert merged == Cases(((b, Const(1)),), Const(2))
    assert mu_merge(TRUE, Const(1), Const(2)) == Const(1)


# ---------------------------------------------------------------------------
# Hand-derived summaries


def test_plain_setter():
    # [DERIVED] one store, empty path condition.
    _, s = summary_of(
        """
        contract C {
            uint x;
            function set(uint v) public { x = v; }
        }
        """
    )
    assert s.pairs == {"x": [SummaryPair(arg_sym("set", "v"), TRUE)]}


def test_conditional_store_carries_the_branch_condition():
    _, s = summary_of(
        """
        contract C {
            bool lock;
            function grab() public {
                if (lock == false) { lock = true; }
            }
        }
        """
    )
    assert s.pairs == {
        "lock": [SummaryPair(Const(True),
                             Unop("!", pre_sym("lock", "bool")))],
    }


def test_require_then_set_and_reset():
    # [DERIVED] the mutex discipline: both stores run only when the lock
    # was free, so both pairs carry the same entry condition.
    _, s = summary_of(
        """
        contract M {
            bool mutex;
            function go() public {
                require(mutex == false);
                mutex = true;
                mutex = false;
            }
        }
        """
    )
    free = Unop("!", pre_sym("mutex", "bool"))
    assert s.pairs == {
        "mutex": [SummaryPair(Const(True), free),
                  SummaryPair(Const(False), free)],
    }


def test_code_after_return_contributes_nothing():
    _, s = summary_of(
        """
        contract C {
            uint x;
            function f() public {
                return;
                x = 5;
            }
        }
        """
    )
    assert s.for_var("x") == []


def test_code_after_selfdestruct_contributes_nothing():
    _, s = summary_of(
        """
        contract C {
            uint x;
            function f() public {
                selfdestruct(msg.sender);
                x = 5;
            }
        }
        """
    )
    assert s.for_var("x") == []


def test_early_return_guards_the_following_store():
    _, s = summary_of(
        """
        contract C {
            uint x;
            function f(uint v) public {
                if (v == 0) { return; }
                x = v;
            }
        }
        """
    )
    v = arg_sym("f", "v")
    (pair,) = s.for_var("x")
    assert pair.value == v
    assert pair.cond == simplify(Unop("!", Binop("==", v, Const(0))))


def test_loop_havocs_written_variables():
    _, s = summary_of(
        """
        contract C {
            uint x;
            uint y;
            function f() public {
                while (x < 10) { x = x + 1; }
                y = x;
            }
        }
        """
    )
    (pair,) = s.for_var("x")
    assert isinstance(pair.value, Sym)
    assert pair.value.name.startswith(HAVOC_PREFIX)
    assert pair.cond == TRUE
    # the post-loop read sees the havocked value, not pre$x
    (ypair,) = s.for_var("y")
    assert ypair.value == pair.value


def test_mapping_store_is_weak_but_direct_store_is_strong():
    _, s = summary_of(
        """
        contract C {
            mapping(uint => uint) m;
            uint y;
            uint peek;
            uint peek2;
            function probe(uint v) public {
                m[0] = v;
                peek = m[1];
            }
            function probe2(uint v) public {
                y = v;
                peek2 = y;
            }
        }
        """
    )
    # reading the mapping after a store sees either the old or new value
    (p,) = s.for_var("peek")
    assert isinstance(p.value, Cases)
    ((keep, old),) = p.value.branches
    assert old == pre_sym("m")
    assert isinstance(keep, Sym) and keep.name.startswith(HAVOC_PREFIX)
    assert p.value.default == arg_sym("probe", "v")
    # a scalar store replaces the value outright
    (p2,) = s.for_var("peek2")
    assert p2.value == arg_sym("probe2", "v")


def test_all_stores_contribute_not_just_the_last():
    _, s = summary_of(
        """
        contract C {
            uint y;
            function two(uint v) public {
                y = v;
                y = v + 1;
            }
        }
        """
    )
    v = arg_sym("two", "v")
    assert s.for_var("y") == [
        SummaryPair(v, TRUE),
        SummaryPair(simplify(Binop("+", v, Const(1))), TRUE),
    ]


def test_constructor_writes_are_not_transaction_summaries():
    # deployment happens once; it is not an adversary-schedulable move
    _, s = summary_of(
        """
        contract C {
            uint x = 5;
            uint y;
            function f() public { y = 1; }
        }
        """
    )
    assert s.for_var("x") == []
    assert s.for_var("y") == [SummaryPair(Const(1), TRUE)]


def test_balance_reads_are_never_cached_but_sender_is_stable():
    _, s = summary_of(
        """
        contract C {
            uint x;
            uint y;
            address a;
            address b;
            function f() public {
                x = this.balance;
                y = this.balance;
            }
            function g() public {
                a = msg.sender;
                b = msg.sender;
            }
        }
        """
    )
    (xp,) = s.for_var("x")
    (yp,) = s.for_var("y")
    assert xp.value != yp.value  # balance may change between reads
    (ap,) = s.for_var("a")
    (bp,) = s.for_var("b")
    assert ap.value == bp.value  # one transaction, one caller


def test_external_call_result_is_unconstrained():
    _, s = summary_of(
        """
        contract C {
            bool ok;
            function f(address d) public { ok = d.send(1); }
        }
        """
    )
    (p,) = s.for_var("ok")
    assert isinstance(p.value, Sym) and p.value.name.startswith(HAVOC_PREFIX)


def test_unsatisfiable_path_pairs_are_dropped():
    _, s = summary_of(
        """
        contract C {
            uint x;
            function f() public {
                require(false);
                x = 1;
            }
        }
        """
    )
    assert s.for_var("x") == []


def test_add_deduplicates_pairs():
    s = ValueSummary()
    s.add("x", Const(1), TRUE)
    s.add("x", Const(1), TRUE)
    s.add("x", Const(1), FALSE)  # unsatisfiable: dropped
    assert s.pairs == {"x": [SummaryPair(Const(1), TRUE)]}
    assert s.vars() == {"x"}
    assert "x:" in s.to_text()


# ---------------------------------------------------------------------------
# Corpus summary of the lock-discipline wallet


def test_lock_discipline_summary_on_fixture():
    # [DERIVED] per the lock protocol, L can only change when it was false
    # before: a locked state is stuck for other callers, so re-entrant
    # interleavings cannot re-acquire the lock.  (reapFarm's unlock is
    # additionally gated on the call having succeeded.)
    from sicheck.terms import subst

    prog, _, _, _ = pipeline_file("locked_farm_payout.sol")
    s = compute_summary(prog)
    pairs = s.for_var("L")
    assert {p.value for p in pairs} == {Const(True), Const(False)}
    for p in pairs:
        # with the lock already held, no pair's condition can hold
        assert simplify(subst(p.cond, {"pre$L": TRUE})) == FALSE, p


# ---------------------------------------------------------------------------
# Coverage against the concrete interpreter (havoc-free programs)

COVERAGE_SRC = """
contract Cov {
    uint x;
    uint y;
    function set(uint v) public { x = v; }
    function bump() public {
        if (x < 2) { y = y + x; } else { y = 0; }
    }
    function gate(uint v) public {
        require(v > 0);
        x = v + y;
    }
}
"""


def test_every_concrete_transition_is_covered_by_a_pair():
    # [DERIVED] soundness on deterministic code: for any single transaction
    # from any start state, each changed variable's new value must equal
    # some summary pair's value whose condition held in the start state.
    prog = lower(parse_source(COVERAGE_SRC), "Cov")
    summary = compute_summary(prog)
    inits = [{"x": 0, "y": 0}, {"x": 1, "y": 1}, {"x": 2, "y": 2},
             {"x": 5, "y": 1}]
    calls = [("set", [0]), ("set", [1]), ("set", [2]),
             ("bump", []), ("gate", [0]), ("gate", [1]), ("gate", [2])]
    for init in inits:
        for fn, args in calls:
            post = concrete_run(prog, [(fn, args, [])], dict(init))
            env = {f"pre${v}": val for v, val in init.items()}
            env.update({f"arg${fn}${p}": a
                        for p, a in zip(prog.function(fn).params, args)})
            def try_eval(term):
                # pairs from other functions mention their own argument
                # symbols; those cannot witness this transition as-is
                try:
                    return evaluate(term, env)
                except KeyError:
                    return None

            for var, newval in post.items():
                if newval == init[var]:
                    continue  # identity transition is implicitly covered
                covered = False
                for p in summary.for_var(var):
                    cond, val = try_eval(p.cond), try_eval(p.value)
                    if cond is True and val is not None and \
                            (int(val) & MASK) == (newval & MASK):
                        covered = True
                        break
                assert covered, (fn, args, init, var, newval)
