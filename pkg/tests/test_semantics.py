import itertools

import pytest
from hypothesis import given, settings, strategies as st

from cise.crdt import RemoveWinsSet
from cise.parser import parse_formula, parse_stmt
from cise.semantics import (ConfigurationError, DomainBounds, Env, EvaluationError, StateValue,
                            domain, domain_size, elements, eval_formula, eval_term, exec_stmt,
                            state_space)
from cise.terms import INT, App, Field, IntLit, PairSort, RWSetSort, SetSort, Var, substitute
from cise.typecheck import elaborate_formula
from conftest import load

B = DomainBounds(0, 3)


def formula(text, **scope):
    return elaborate_formula(parse_formula(text), {}, scope)


def ev(text, bounds=B, **vars):
    return eval_formula(formula(text, **{k: INT for k in vars}), Env(vars), bounds)


def test_membership_of_added_pair():
    assert ev("mem (1,2) (add (1,2) empty)")


def test_school_invariant():
    spec = load("school.cise")
    inv = spec.state.invariant
    bad = StateValue(students=frozenset({1}), courses=frozenset(), enrolled=frozenset({(1, 2)}))
    good = StateValue(students=frozenset({1}), courses=frozenset({2}), enrolled=frozenset({(1, 2)}))
    assert not eval_formula(inv, Env({}, {"": bad}), B)
    assert eval_formula(inv, Env({}, {"": good}), B)
    # by hand: the only enrolled pair is (1, 2), so the invariant is two membership tests
    for s in (bad, good):
        by_hand = all(i in s["students"] and j in s["courses"] for i, j in s["enrolled"])
        assert eval_formula(inv, Env({}, {"": s}), B) == by_hand


def test_exec_examples():
    spec = load("school.cise")
    body = spec.op("addCourse").body
    s0 = StateValue(students=frozenset(), courses=frozenset(), enrolled=frozenset())
    s1 = exec_stmt(body, s0, Env({"course": 5}), B)
    assert s1["courses"] == frozenset({5})
    assert s0["courses"] == frozenset()  # input untouched
    assert exec_stmt(parse_stmt("()"), s0, Env(), B) is s0
    two = parse_stmt("state.students <- add 1 state.students; state.students <- add 2 state.students")
    assert exec_stmt(two, s0, Env(), B)["students"] == frozenset({1, 2})


def test_quantifiers_range_over_bounds():
    assert ev("forall x. x >= 0 /\\ x <= 3")
    assert not ev("exists x. x = 4")
    assert ev("exists x. x = 4", DomainBounds(2, 5))
    assert ev("forall p: (int, int). fst p <= 3 /\\ snd p >= 0")
    assert ev("exists p. mem p (add (1, 2) empty) /\\ fst p = 1")


def test_arithmetic_is_unbounded():
    assert eval_term(App("+", (IntLit(3), IntLit(3))), Env(), B) == 6


def test_remove_wins_values():
    s = RemoveWinsSet(frozenset({1, 2}), frozenset({2}))
    st_ = StateValue(c=s)
    f = parse_formula("in_set 1 state.c /\\ not (in_set 2 state.c)", {"state": "state"})
    assert eval_formula(f, Env({}, {"state": st_}), B)


def test_domains():
    assert elements(PairSort(INT, INT), DomainBounds(0, 1)) == [(0, 0), (0, 1), (1, 0), (1, 1)]
    assert domain_size(SetSort(INT), B) == 16
    assert domain_size(RWSetSort(INT), DomainBounds(0, 1)) == 16
    assert len(list(domain(SetSort(PairSort(INT, INT)), DomainBounds(0, 1)))) == 16
    fields = (("a", INT), ("s", SetSort(INT)))
    assert len(list(state_space(fields, DomainBounds(0, 1)))) == 2 * 4


def test_bounds_validation():
    assert DomainBounds.parse("0..3") == B
    assert DomainBounds.parse("-1..1").ints == range(-1, 2)
    for bad in ("3..0", "0-3", "a..b", "0..9"):
        with pytest.raises(ConfigurationError):
            DomainBounds.parse(bad)


def test_unbound_name_is_an_error():
    with pytest.raises(EvaluationError):
        eval_term(Var("nope"), Env(), B)


# ---------------------------------------------------------------------------
# properties

sets = st.frozensets(st.integers(0, 3))
vals = st.integers(0, 3)


@given(sets, vals)
def test_set_laws(s, e):
    env = Env({"s": s, "e": e})
    scope = {"s": SetSort(INT), "e": INT}
    assert eval_formula(formula("mem e (add e s)", **scope), env, B)
    assert not eval_formula(formula("mem e (remove e s)", **scope), env, B)
    assert eval_formula(formula("add e (add e s) == add e s", **scope), env, B)


@given(sets, sets)
def test_extensional_equality(a, b):
    env = Env({"a": a, "b": b})
    scope = {"a": SetSort(INT), "b": SetSort(INT)}
    double = eval_formula(formula("(forall x. mem x a -> mem x b) /\\ "
                                  "(forall x. mem x b -> mem x a)", **scope), env, B)
    assert eval_formula(formula("a == b", **scope), env, B) == double == (a == b)


SCOPE = {"x": INT, "y": INT, "s": SetSort(INT)}
FORMULAS = [
    "x = y", "x < y + 1", "mem x s", "mem (x + y) (add y s)", "forall z. mem z s -> z <> x",
    "exists z. z = x /\\ mem z (remove y s)", "not (x = 2) -> is_empty (remove x s)",
]
EXPRS = ["y", "1", "y + 1", "x", "y - x"]


@settings(max_examples=200, deadline=None)
@given(st.sampled_from(FORMULAS), st.sampled_from(EXPRS), vals, vals, sets)
def test_substitution_lemma(ftext, etext, x, y, s):
    f = elaborate_formula(parse_formula(ftext), {}, SCOPE)
    e = elaborate_formula(parse_formula(f"{etext} = 0"), {}, SCOPE).args[0]
    env = Env({"x": x, "y": y, "s": s})
    lhs = eval_formula(substitute(f, {"x": e}), env, B)
    rhs = eval_formula(f, env.bind("x", eval_term(e, env, B)), B)
    assert lhs == rhs


def test_exec_is_deterministic_and_pure():
    spec = load("school.cise")
    fields = spec.state.fields
    bounds = DomainBounds(0, 1)
    for op in spec.ops:
        for s, args in itertools.product(state_space(fields, bounds),
                                         itertools.product(bounds.ints, repeat=len(op.params))):
            env = Env(dict(zip(op.param_names, args)))
            before = StateValue(dict(s))
            out1, out2 = exec_stmt(op.body, s, env, bounds), exec_stmt(op.body, s, env, bounds)
            assert out1 == out2 and s == before


def test_field_reads_need_a_state():
    with pytest.raises(EvaluationError):
        eval_term(Field("state", "c"), Env(), B)
