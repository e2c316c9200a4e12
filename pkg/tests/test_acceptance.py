"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line.

Run on its own with ``pytest tests/test_acceptance.py -v``.
"""
import itertools
import random
import time

import pytest

import oracle
from cise import crdt
from cise.analysis import AnalysisTask, generate_tasks
from cise.checker import check_task
from cise.cli import main
from cise.parser import parse_formula
from cise.report import run_analysis
from cise.semantics import DomainBounds
from cise.smt import emit, run_solver
from cise.sp import simplify, sp_op
from cise.terms import INT, alpha_equal
from cise.tokens import TokenError, parse_tokens
from cise.typecheck import elaborate_formula
from conftest import SPEC_FIXTURES, fixture_path, load, load_tokens
from test_smt import SOLVER
from test_sp import soundness_task, strength_task
from test_tokens import INVALID, VALID

B3 = DomainBounds(0, 3)


@pytest.fixture
def verdict(capsys):
    """Print one line for the criterion, then fail the test if it did not pass."""
    def report(n, problems, detail=""):
        line = f"criterion {n}: {'PASS' if not problems else 'FAIL'}"
        if problems:
            line += " - " + "; ".join(problems)
        elif detail:
            line += f" ({detail})"
        with capsys.disabled():
            print("\n" + line)
        assert not problems, line
    return report


def test_criterion_1_school_conflicts(school, verdict):
    t0 = time.perf_counter()
    r = run_analysis(school, None, B3)
    elapsed = time.perf_counter() - t0
    text = r.format_text()
    problems = []
    er = r.pair("enroll", "remCourse")
    if er.verdict != "stability-conflict" or "enroll after remCourse" not in er.directions:
        problems.append(f"{{enroll, remCourse}} is {er.verdict} {er.directions}")
    if "operations enroll and remCourse conflict" not in text:
        problems.append("conflict line for enroll/remCourse missing")
    ar = r.pair("addCourse", "remCourse")
    if ar.verdict != "commutativity-conflict" or "final states equal" not in ar.failed_goals:
        problems.append(f"{{addCourse, remCourse}} is {ar.verdict}")
    if "operations addCourse and remCourse do not commute" not in text:
        problems.append("'do not commute' line missing")
    for p in r.pairs:
        if set(p.ops) in ({"enroll", "remCourse"}, {"addCourse", "remCourse"}):
            continue
        if p.verdict != "commutes-and-stable":
            problems.append(f"{{{', '.join(p.ops)}}} is {p.verdict}")
    for s in r.safety:
        if s.verdict != "safe":
            problems.append(f"{s.ops[0]} is {s.verdict}")
    rem = r.self_of("remCourse")
    if rem.verdict != "stable":
        cx = rem.counterexamples[0]
        problems.append(f"remCourse is {rem.verdict}: {', '.join(rem.failed_goals)} fails at "
                        f"{cx['args']}")
    if elapsed >= 30:
        problems.append(f"took {elapsed:.1f}s")
    verdict(1, problems, f"{elapsed:.1f}s")


def test_criterion_2_coarse_tokens(school, verdict, capsys):
    problems = []
    tokens = load_tokens("coarse.tok", school)
    r = run_analysis(school, tokens, B3)
    for pair in (("enroll", "remCourse"), ("addCourse", "remCourse")):
        if r.pair(*pair).verdict != "skipped-by-token-system":
            problems.append(f"{{{', '.join(pair)}}} not skipped")
    code = main(["analyze", fixture_path("school.cise"), "--tokens", fixture_path("coarse.tok"),
                 "--bounds", "0..3"])
    capsys.readouterr()
    if not r.sound:
        problems.append("token system reported not sound: " +
                        ", ".join(f"{f.task} {f.verdict}" for f in r.conflicts))
    if code != 0:
        problems.append(f"exit {code}")
    verdict(2, problems)


def test_criterion_3_refined_tokens(school, verdict):
    r = run_analysis(school, load_tokens("refined.tok", school), B3)
    er = r.pair("enroll", "remCourse")
    problems = []
    if er.verdict != "commutes-and-stable" or er.failed_goals:
        problems.append(f"{{enroll, remCourse}} is {er.verdict} {er.failed_goals}")
    verdict(3, problems)


def test_criterion_4_sp(verdict):
    t0 = time.perf_counter()
    problems = []
    spec = load("school.cise")
    got = simplify(sp_op(spec, spec.op("addCourse")).formula)
    want = elaborate_formula(
        parse_formula("exists v0. state.courses = add(course, v0) && course > 0",
                      {"state": "state"}), {"state": spec.state}, {"course": INT})
    if not alpha_equal(got, want):
        problems.append("addCourse sp differs")
    b = DomainBounds(0, 2)
    n = 0
    for name in SPEC_FIXTURES:
        spec = load(name)
        for op in spec.ops:
            post = simplify(sp_op(spec, op).formula)
            n += 1
            if not check_task(soundness_task(spec, op, post), b).valid:
                problems.append(f"{name}:{op.name} not sound")
            if not check_task(strength_task(spec, op, post), b).valid:
                problems.append(f"{name}:{op.name} not strongest")
    elapsed = time.perf_counter() - t0
    if elapsed >= 10:
        problems.append(f"took {elapsed:.1f}s")
    verdict(4, problems, f"{n} operations, {elapsed:.1f}s")


def test_criterion_5_crdt_fix(verdict):
    r = run_analysis(load("school_crdt.cise"), None, B3)
    f = r.pair("addCourse", "remCourse")
    problems = [] if f.verdict == "commutes-and-stable" else [f"addCourse/remCourse is {f.verdict}"]
    verdict(5, problems)


def test_criterion_6_crdt_convergence(verdict):
    t0 = time.perf_counter()
    problems = []
    for seed in range(200):
        steps = crdt.random_schedule(random.Random(seed), 3, 100, range(4))
        if sum(1 for s in steps if s[0] == "op") > 100:
            problems.append(f"seed {seed}: too many events")
        if not crdt.simulate(3, steps).converged:
            problems.append(f"seed {seed} diverged")
    elems = range(3)
    subsets = [frozenset(c) for k in range(4) for c in itertools.combinations(elems, k)]
    sets = [crdt.RemoveWinsSet(a, r) for a in subsets for r in subsets]
    assert len(sets) == 64
    merge = crdt.merge
    for a in sets:
        if merge(a, a) != a:
            problems.append("merge not idempotent")
        for b in sets:
            if merge(a, b) != merge(b, a):
                problems.append("merge not commutative")
            for c in sets:
                if merge(merge(a, b), c) != merge(a, merge(b, c)):
                    problems.append("merge not associative")
                    break
    elapsed = time.perf_counter() - t0
    if elapsed >= 60:
        problems.append(f"took {elapsed:.1f}s")
    verdict(6, sorted(set(problems)), f"{elapsed:.1f}s")


def test_criterion_7_oracle(verdict):
    b = DomainBounds(0, 1)
    problems, n = [], 0
    for name in SPEC_FIXTURES:
        spec = load(name)
        r = run_analysis(spec, None, b)
        for f, g in itertools.combinations([op.name for op in spec.ops], 2):
            n += 1
            want = oracle.pair_verdict(spec, f, g, b)
            if r.pair(f, g).verdict != want:
                problems.append(f"{name} {{{f}, {g}}}: {r.pair(f, g).verdict} vs {want}")
    verdict(7, problems, f"{n} pair tasks")


def test_criterion_8_token_grammar(school, verdict):
    problems = []
    if len(VALID) < 20 or len(INVALID) < 15:
        problems.append("suite too small")
    for text in VALID:
        try:
            parse_tokens(text, school)
        except TokenError as exc:
            problems.append(f"rejected {text!r}: {exc}")
    for text, kind in INVALID:
        try:
            parse_tokens(text, school)
            problems.append(f"accepted {text!r}")
        except TokenError as exc:
            if exc.kind != kind:
                problems.append(f"{text!r}: {exc.kind}, expected {kind}")
    verdict(8, problems, f"{len(VALID)} valid, {len(INVALID)} invalid")


@pytest.mark.skipif(SOLVER is None, reason="no SMT solver configured")
def test_criterion_9_smt_agreement(verdict):
    problems, n = [], 0
    for name in SPEC_FIXTURES:
        spec = load(name)
        for t in generate_tasks(spec):
            assert isinstance(t, AnalysisTask)
            res = check_task(t, B3)
            for s, g in zip(emit(t), res.goals):
                n += 1
                got = run_solver(s.text, SOLVER).status
                if got != ("unsat" if g.holds else "sat"):
                    problems.append(f"{t.name} [{g.goal.label}]: solver {got}")
    verdict(9, problems, f"{n} goals, unbounded integers")
