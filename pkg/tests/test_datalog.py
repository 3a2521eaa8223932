"""Bottom-up rule engine checked against naive fixpoint evaluation.

The engine is semi-naive and stratifies negation; the oracle in oracles.py
re-applies every rule against the full database until nothing changes, with
strata assigned by hand.  Agreement on randomized inputs is the evidence
that the delta optimization and the stratification are sound.
"""

import random

import pytest

from oracles import naive_saturate
from sicheck.datalog import Engine, L, Neq, NotL, Rule, Var
from sicheck.errors import StratificationError

X, Y, Z = Var("X"), Var("Y"), Var("Z")

# transitive closure: the classic recursive program
PATH_RULES = [
    Rule(L("path", X, Y), [L("edge", X, Y)]),
    Rule(L("path", X, Z), [L("edge", X, Y), L("path", Y, Z)]),
]

# negation + constraint: unordered distinct pairs with no direct edge
SPARSE_RULES = PATH_RULES + [
    Rule(L("node", X), [L("edge", X, Y)]),
    Rule(L("node", Y), [L("edge", X, Y)]),
    Rule(L("unlinked", X, Y),
         [L("node", X), L("node", Y), Neq(X, Y), NotL("path", X, Y)]),
]
SPARSE_STRATA = [PATH_RULES + SPARSE_RULES[2:4], [SPARSE_RULES[4]]]


def random_edges(rng, n_facts):
    nodes = [f"n{i}" for i in range(rng.randint(2, 8))]
    return {"edge": {(rng.choice(nodes), rng.choice(nodes))
                     for _ in range(n_facts)}}


def test_recursive_closure_matches_naive_on_random_graphs():
    rng = random.Random(7)
    engine = Engine(PATH_RULES)
    for _ in range(50):
        edb = random_edges(rng, rng.randint(1, 30))
        assert engine.saturate(edb) == naive_saturate([PATH_RULES], edb)


def test_stratified_negation_matches_naive_on_random_graphs():
    rng = random.Random(11)
    engine = Engine(SPARSE_RULES)
    for _ in range(50):
        edb = random_edges(rng, rng.randint(1, 25))
        assert engine.saturate(edb) == naive_saturate(SPARSE_STRATA, edb)


def test_constraints_filter_bindings():
    rules = [Rule(L("self", X), [L("edge", X, X)]),
             Rule(L("proper", X, Y), [L("edge", X, Y), Neq(X, Y)])]
    db = Engine(rules).saturate({"edge": {("a", "a"), ("a", "b")}})
    assert db["self"] == {("a",)}
    assert db["proper"] == {("a", "b")}


def test_constants_in_rule_positions_must_match():
    rules = [Rule(L("from_a", Y), [L("edge", "a", Y)])]
    db = Engine(rules).saturate({"edge": {("a", "b"), ("c", "d")}})
    assert db["from_a"] == {("b",)}


def test_saturate_keeps_edb_and_is_idempotent():
    engine = Engine(PATH_RULES)
    edb = {"edge": {("a", "b"), ("b", "c")}}
    db = engine.saturate(edb)
    assert db["edge"] == edb["edge"]
    assert db["path"] == {("a", "b"), ("b", "c"), ("a", "c")}
    assert engine.saturate(db) == db


def test_negation_inside_a_cycle_is_rejected():
    rules = [Rule(L("win", X), [L("move", X, Y), NotL("win", Y)])]
    with pytest.raises(StratificationError):
        Engine(rules)


def test_unsafe_rules_are_rejected():
    # head variable never bound positively
    with pytest.raises(ValueError):
        Rule(L("out", X, Y), [L("edge", X, X)])
    # negated literal over an unbound variable
    with pytest.raises(ValueError):
        Rule(L("out", X), [L("node", X), NotL("edge", X, Y)])
    # constraint over an unbound variable
    with pytest.raises(ValueError):
        Rule(L("out", X), [L("node", X), Neq(X, Y)])
    # negative head
    with pytest.raises(ValueError):
        Rule(NotL("out", X), [L("node", X)])


def test_empty_relations_behave_as_empty_sets():
    engine = Engine(PATH_RULES)
    assert engine.saturate({}).get("path", set()) == set()
