import itertools

import pytest
from hypothesis import given, settings, strategies as st

import oracle
from cise.analysis import gen_pair, gen_safety, gen_self
from cise.checker import check_formula_valid, check_task
from cise.parser import parse_spec
from cise.report import run_analysis
from cise.semantics import DomainBounds, Env, StateValue, eval_formula, state_space
from cise.terms import BOOL, FALSE, INT, TRUE, App, Field, IntLit, Quant, SetSort, Var
from conftest import load, load_tokens

SET = SetSort(INT)


def test_first_counterexample_is_lexicographically_least(school):
    res = check_task(gen_pair(school, "enroll", "remCourse"), DomainBounds(0, 3))
    cx = res.counterexample
    assert cx is not None and cx.validated
    assert cx.goal == "pre#3 of enroll after remCourse"
    assert cx.args == {"student1": 1, "course1": 1, "course2": 1}
    for lbl in ("state1", "state2"):
        assert cx.states[lbl] == StateValue(students=frozenset({1}), courses=frozenset({1}),
                                            enrolled=frozenset())
    assert cx.states["state1@1"]["courses"] == frozenset()


def test_every_counterexample_replays(school):
    b = DomainBounds(0, 2)
    for t in (gen_pair(school, "enroll", "remCourse"), gen_pair(school, "addCourse", "remCourse"),
              gen_self(school, "remCourse")):
        res = check_task(t, b)
        assert not res.valid
        for g in res.failed():
            cx = g.counterexample
            assert cx.validated and g.goal.label in cx.failed_goals
            env = Env(cx.args, cx.states)
            assert eval_formula(t.assumption, env, b)
            assert not eval_formula(g.goal.formula, env, b)
        for g in res.goals:
            if g.holds:
                assert g.counterexample is None


def test_vacuous_task_is_flagged():
    res = check_formula_valid(FALSE, DomainBounds(0, 1), fields=(("s", SET),), states=("state",),
                              assumption=FALSE)
    assert res.valid and res.vacuous
    assert any("vacuously" in w for w in res.warnings)


def test_model_counts():
    res = check_formula_valid(TRUE, DomainBounds(0, 1), fields=(("n", INT), ("s", SET)),
                              states=("state",))
    assert res.models == 2 * 4 and res.valuations == 2
    res = check_formula_valid(TRUE, DomainBounds(0, 2), params=(("x", INT),),
                              assumption=App(">", (Var("x"), IntLit(0))))
    assert res.models == 2


def test_out_of_domain_valuations_are_skipped():
    # add(x + 1, s) leaves the domain when x is the top value
    s = Field("state", "s")
    elem = App("+", (Var("x"), IntLit(1)), INT)
    f = App("mem", (elem, App("add", (elem, s), SET)))
    res = check_formula_valid(f, DomainBounds(0, 1), fields=(("s", SET),), states=("state",),
                              params=(("x", INT),))
    assert res.valid
    assert res.out_of_bounds == 1
    assert any("skipped" in w for w in res.warnings)


def test_safety_verdicts(school):
    for op in school.ops:
        assert check_task(gen_safety(school, op), DomainBounds(0, 2)).valid, op.name


def test_unsafe_op_is_caught():
    bad = parse_spec("""
type tau [@state] = { mutable x : int; } invariant { x >= 0 }
let dec (state : tau) ensures { state.x = (old state).x - 1 } = state.x <- state.x - 1
""")
    res = check_task(gen_safety(bad, "dec"), DomainBounds(0, 2))
    assert [g.goal.label for g in res.failed()] == ["invariant after dec"]
    assert res.failed()[0].counterexample.states["state"]["x"] == 0


# ---------------------------------------------------------------------------
# agreement with the brute-force oracle


@pytest.mark.parametrize("name", ["school.cise", "school_crdt.cise", "generic.cise"])
def test_oracle_agreement(name):
    spec = load(name)
    b = DomainBounds(0, 1)
    report = run_analysis(spec, None, b)
    for f, g in itertools.combinations([op.name for op in spec.ops], 2):
        assert report.pair(f, g).verdict == oracle.pair_verdict(spec, f, g, b), (f, g)
    for op in spec.ops:
        assert report.self_of(op.name).verdict == oracle.self_verdict(spec, op.name, b)


@pytest.mark.parametrize("tok", ["coarse.tok", "refined.tok", "coarse_mutex.tok"])
def test_oracle_agreement_with_tokens(tok, school):
    b = DomainBounds(0, 1)
    tokens = load_tokens(tok, school)
    report = run_analysis(school, tokens, b)
    for f, g in itertools.combinations([op.name for op in school.ops], 2):
        assert report.pair(f, g).verdict == oracle.pair_verdict(school, f, g, b, tokens)
    for op in school.ops:
        assert report.self_of(op.name).verdict == oracle.self_verdict(school, op.name, b, tokens)


# ---------------------------------------------------------------------------
# random formulas: the symbolic checker against plain enumeration

X, N, S = Var("x"), Field("state", "n"), Field("state", "s")
ints = st.one_of(st.sampled_from([X, N, Var("q")]), st.integers(0, 2).map(IntLit))
sets = st.one_of(st.just(S), st.just(Var("t")),
                 st.tuples(st.sampled_from(["add", "remove"]), ints)
                   .map(lambda p: App(p[0], (p[1], S), SET)))


def _formulas():
    atoms = st.one_of(
        st.sampled_from([TRUE, FALSE, Var("b")]),
        st.tuples(st.sampled_from(["=", "<", "<="]), ints, ints).map(lambda t: App(t[0], t[1:])),
        st.tuples(ints, sets).map(lambda t: App("mem", t)),
        sets.map(lambda s: App("is_empty", (s,))),
        st.tuples(sets, sets).map(lambda t: App("seteq", t)),
    )

    def extend(inner):
        return st.one_of(
            inner.map(lambda f: App("not", (f,))),
            st.tuples(st.sampled_from(["and", "or", "implies", "iff"]), inner, inner)
              .map(lambda t: App(t[0], t[1:])),
            st.tuples(st.sampled_from(["forall", "exists"]), inner)
              .map(lambda t: Quant(t[0], "q", INT, t[1])),
            st.tuples(st.sampled_from(["forall", "exists"]), inner)
              .map(lambda t: Quant(t[0], "t", SET, t[1])),
        )
    return st.recursive(atoms, extend, max_leaves=8)


def _close(f):
    # bind the quantifier names that may occur free
    return Quant("forall", "q", INT, Quant("exists", "t", SET, f))


@settings(max_examples=150, deadline=None)
@given(_formulas(), _formulas())
def test_checker_matches_enumeration(f, a):
    f, a = _close(f), _close(a)
    b = DomainBounds(0, 2)
    fields = (("n", INT), ("s", SET))
    params = (("x", INT), ("b", BOOL))
    res = check_formula_valid(f, b, fields=fields, states=("state",), params=params, assumption=a)
    count, valid = 0, True
    for s in state_space(fields, b):
        for x, bb in itertools.product(b.ints, (False, True)):
            env = Env({"x": x, "b": bb}, {"state": s})
            if eval_formula(a, env, b):
                count += 1
                valid = valid and eval_formula(f, env, b)
    assert res.models == count
    assert res.valid == valid
    if not valid:
        cx = res.counterexample
        assert cx.validated
        assert not eval_formula(f, Env(cx.args, cx.states), b)
