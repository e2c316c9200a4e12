import pytest

from cise.analysis import (AnalysisTask, Skipped, default_state_eq, gen_pair, gen_safety, gen_self,
                           generate_tasks, state_eq)
from cise.checker import check_task
from cise.report import run_analysis
from cise.semantics import DomainBounds, Env, StateValue, eval_formula
from cise.terms import App, Field, Var, free_vars, pretty
from conftest import SPEC_FIXTURES, load, load_tokens


def test_task_counts(school):
    n = len(school.ops)
    tasks = generate_tasks(school)
    assert len(tasks) == n + n * (n - 1) // 2 + n
    kinds = [t.kind for t in tasks]
    assert kinds == ["safety"] * n + ["pair"] * (n * (n - 1) // 2) + ["self"] * n
    assert len({t.name for t in tasks}) == len(tasks)


def test_empty_ops_has_no_tasks():
    assert generate_tasks(load("empty_ops.cise")) == []


def test_safety_task_shape(school):
    t = gen_safety(school, "remCourse")
    assert t.params == (("course", school.op("remCourse").params[0][1]),)
    assert [c.state_in for c in t.program] == ["state"]
    assert [g.label for g in t.goals] == ["post#1 of remCourse", "post#2 of remCourse",
                                          "invariant after remCourse"]
    # the invariant is assumed on the entry state
    assert Field("state", "enrolled") in set(_fields(t.assumption))


def _fields(t):
    if isinstance(t, Field):
        yield t
    for c in getattr(t, "args", ()):
        yield from _fields(c)
    if hasattr(t, "body"):
        yield from _fields(t.body)


def test_pair_task_shape(school):
    t = gen_pair(school, "enroll", "remCourse")
    assert t.name == "enroll_remCourse_commutativity"
    assert [n for n, _ in t.params] == ["student1", "course1", "course2"]
    assert [(c.op, c.state_in, c.state_out) for c in t.program] == [
        ("remCourse", "state1", "state1@1"), ("enroll", "state1@1", "state1@2"),
        ("enroll", "state2", "state2@1"), ("remCourse", "state2@1", "state2@2")]
    labels = [g.label for g in t.goals]
    assert labels[:7] == [
        "pre#1 of enroll after remCourse", "pre#2 of enroll after remCourse",
        "pre#3 of enroll after remCourse",
        "pre#1 of remCourse after enroll", "pre#2 of remCourse after enroll",
        "pre#3 of remCourse after enroll", "final states equal"]
    assert {g.blame for g in t.goals[7:]} == {"contract:enroll", "contract:remCourse"}
    # stability goals read the intermediate states only
    for g in t.goals[:3]:
        assert {f.state for f in _fields(g.formula)} <= {"state1@1"}
    for g in t.goals[3:6]:
        assert {f.state for f in _fields(g.formula)} <= {"state2@1"}
    assert free_vars(t.assumption) <= {"student1", "course1", "course2"}


def test_self_task_shape(school):
    t = gen_self(school, "remCourse")
    assert t.name == "remCourse_stability"
    assert [n for n, _ in t.params] == ["course1", "course2"]
    assert [(c.args, c.state_in) for c in t.program] == [(("course1",), "state1"),
                                                          (("course2",), "state1@1")]
    assert [g.label for g in t.goals] == [f"pre#{i} of second remCourse" for i in (1, 2, 3)]
    text = pretty(t.assumption)
    assert "state1.courses == state2.courses" in text


def test_pair_needs_distinct_ops(school):
    with pytest.raises(ValueError):
        gen_pair(school, "enroll", "enroll")


def test_default_state_eq():
    spec = load("generic.cise")
    eqf = state_eq(spec, "a", "b")
    assert eqf == default_state_eq(spec, "a", "b")
    s = StateValue(x=1, y=2)
    assert eval_formula(eqf, Env({}, {"a": s, "b": s}), DomainBounds())
    assert not eval_formula(eqf, Env({}, {"a": s, "b": s.set("y", 3)}), DomainBounds())
    school = load("school.cise")
    assert pretty(default_state_eq(school)) == ("s1.students == s2.students && s1.courses == "
                                                "s2.courses && s1.enrolled == s2.enrolled")


def test_coarse_tokens_skip_pairs(school):
    tokens = load_tokens("coarse.tok", school)
    tasks = {t.name: t for t in generate_tasks(school, tokens)}
    assert isinstance(tasks["enroll_remCourse_commutativity"], Skipped)
    assert isinstance(tasks["addCourse_remCourse_commutativity"], Skipped)
    assert isinstance(tasks["addCourse_enroll_commutativity"], AnalysisTask)
    # no token on remCourse conflicts with itself in the plain coarse system
    assert isinstance(tasks["remCourse_stability"], AnalysisTask)
    mutex = load_tokens("coarse_mutex.tok", school)
    assert isinstance(gen_self(school, "remCourse", mutex), Skipped)


def test_argtokens_inject_disequality(school):
    tokens = load_tokens("refined.tok", school)
    t = gen_pair(school, "enroll", "remCourse", tokens)
    assert isinstance(t, AnalysisTask)
    diseq = App("<>", (Var("course1"), Var("course2")))
    assert diseq in t.assumption.args
    # the generic pair is untouched by tokens on other ops
    assert diseq not in gen_pair(school, "enroll", "remCourse").assumption.args


def _failures(res):
    return {(g.goal.blame, g.goal.direction) for g in res.failed()}


@pytest.mark.parametrize("name", SPEC_FIXTURES)
def test_pair_verdict_symmetric(name):
    spec = load(name)
    b = DomainBounds(0, 1)
    ops = [op.name for op in spec.ops]
    for i, f in enumerate(ops):
        for g in ops[i + 1:]:
            ab = check_task(gen_pair(spec, f, g), b)
            ba = check_task(gen_pair(spec, g, f), b)
            assert _failures(ab) == _failures(ba), (f, g)


def test_tokens_only_remove_conflicts(school):
    # adding a token system never introduces a conflict that was not there without it
    b = DomainBounds(0, 2)
    plain = run_analysis(school, None, b)
    for tok in ("coarse.tok", "coarse_mutex.tok", "refined.tok"):
        with_tokens = run_analysis(school, load_tokens(tok, school), b)
        before = {f.task for f in plain.conflicts}
        after = {f.task for f in with_tokens.conflicts}
        assert after <= before, tok


def test_describe_lists_everything(school):
    text = gen_pair(school, "addCourse", "remCourse").describe()
    assert text.startswith("task addCourse_remCourse_commutativity")
    assert "val course1 : int" in text and "goal [final states equal]" in text
    assert text.count("\n  remCourse ") == 2
