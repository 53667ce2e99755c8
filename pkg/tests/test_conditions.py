import random
import threading

import pytest
from hypothesis import given, settings, strategies as st

from bruteforce import brute_force, random_condition
from vflight.conditions import (
    TRUE, SAT, UNSAT, Atom, BuiltinSolver, CountingSolver, PathCondition,
    check_builtin, conjoin, flow_eq, in_context, null_eq, null_neq, opaque, term,
)

a, b, c, d = (term(i) for i in range(4))


@pytest.mark.parametrize("atoms, want", [
    ([], SAT),
    ([null_eq(a), null_neq(a)], UNSAT),
    ([flow_eq(a, b), null_eq(a), null_neq(b)], UNSAT),
    ([flow_eq(a, b), flow_eq(b, c), null_eq(a), null_neq(c)], UNSAT),
    ([flow_eq(a, b), null_eq(a), null_neq(c)], SAT),
    ([null_neq(a), null_neq(b)], SAT),
    ([opaque(a), null_eq(a)], SAT),
    ([flow_eq(a, b), flow_eq(c, d), null_eq(a), null_neq(d)], SAT),
])
def test_examples(atoms, want):
    c_ = PathCondition.of(atoms)
    assert check_builtin(c_) == want == brute_force(c_)


def test_contexts_are_distinct_terms():
    x = term(5)
    x2 = in_context(x, 2)
    assert x2 == (5, (2,))
    assert check_builtin(PathCondition.of([null_eq(x), null_neq(x2)])) == SAT
    assert check_builtin(PathCondition.of([null_eq(x), null_neq(x)]).renamed(2)) == UNSAT


def test_flow_eq_is_symmetric():
    assert flow_eq(a, b) == flow_eq(b, a)


def test_atom_validation():
    with pytest.raises(ValueError):
        Atom("maybe", (a,))
    with pytest.raises(ValueError):
        Atom("flow-eq", (a,))


def test_conjoin_tracks_provenance():
    left = PathCondition.of([null_eq(a)], owner=1)
    right = PathCondition.of([null_neq(b)], owner=4)
    both = conjoin(left, right)
    assert both.atoms == left.atoms | right.atoms
    assert both.provenance == {4}
    assert both.owner == 1
    assert conjoin(both, TRUE).provenance == {4}


def test_counting_solver_threads():
    s = CountingSolver()
    cond = PathCondition.of([null_eq(a)])

    def work():
        for _ in range(200):
            s.check(cond)

    ts = [threading.Thread(target=work) for _ in range(4)]
    for t in ts:
        t.start()
    for t in ts:
        t.join()
    assert s.calls == 800
    s.reset()
    assert s.calls == 0


@pytest.mark.parametrize("seed", range(20))
def test_agrees_with_brute_force_sample(seed):
    rng = random.Random(seed)
    for _ in range(50):
        cond = random_condition(rng)
        assert BuiltinSolver().check(cond) == brute_force(cond), cond


conditions = st.builds(lambda s: random_condition(random.Random(s)), st.integers(0, 10**9))


@settings(max_examples=200, deadline=None)
@given(conditions, conditions)
def test_monotone_under_conjunction(x, y):
    if check_builtin(x) == UNSAT:
        assert check_builtin(conjoin(x, y)) == UNSAT
        assert check_builtin(conjoin(y, x)) == UNSAT


@settings(max_examples=200, deadline=None)
@given(conditions, conditions)
def test_conjunction_commutes(x, y):
    assert check_builtin(conjoin(x, y)) == check_builtin(conjoin(y, x))


@settings(max_examples=200, deadline=None)
@given(conditions, st.integers(1, 99))
def test_renaming_preserves_verdict(x, k):
    assert check_builtin(x.renamed(k)) == check_builtin(x)


@settings(max_examples=100, deadline=None)
@given(conditions, st.randoms(use_true_random=False))
def test_atom_order_irrelevant(x, rnd):
    atoms = sorted(x.atoms)
    rnd.shuffle(atoms)
    # a fresh solver, atoms presented in another order
    assert BuiltinSolver().check(PathCondition.of(atoms)) == check_builtin(x)
