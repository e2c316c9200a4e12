"""SMT-LIB 2 export of analysis tasks, one script per goal.

Sets are characteristic functions ``(Array T Bool)``; set expressions are
expanded pointwise, so ``add``/``remove``/``mem`` need no set theory and ``==``
and ``is_empty`` become quantified statements over elements.  Pairs use a
small datatype.  Each call of the task program gets its own copy of the state
(SSA style), defined from the previous copy.  Every script asserts the
assumption and the negated goal: ``unsat`` means the goal is valid.

Integers are unbounded unless ``bounds`` is given, in which case integer
constants and initial set contents are restricted to the bounded domain, the
exact semantics of the bounded checker.
"""
from __future__ import annotations

import os
import re
import shlex
import subprocess
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

from .analysis import AnalysisTask
from .semantics import DomainBounds, Env, StateValue, elements, eval_formula, exec_stmt
from .terms import (App, Assign, BoolLit, BoolSort, Field, IntLit, IntSort, OP_STATE, PairSort,
                    Quant, RWSetSort, Seq, SetSort, Skip, Sort, Stmt, Term, Var)
from . import crdt

SOLVER_ENV = "CISE_SMT_SOLVER"

PRELUDE = "(declare-datatypes ((Pair 0)) (((mk-pair (pair-fst Int) (pair-snd Int)))))"


class SmtError(RuntimeError):
    pass


@dataclass(frozen=True)
class SetRep:
    elem: Sort
    member: Callable[[str], str]


@dataclass(frozen=True)
class RWRep:
    adds: SetRep
    removes: SetRep


@dataclass(frozen=True)
class SmtScript:
    task: str
    goal: str
    index: int
    text: str
    # (smt term, kind, info) for every initial-state/argument value, used for model replay
    values: tuple[tuple[str, str, tuple], ...] = ()

    @property
    def filename(self) -> str:
        slug = re.sub(r"[^A-Za-z0-9]+", "_", self.goal).strip("_")
        return f"{self.task}__{self.index:02d}_{slug}.smt2"


def sym(*parts: str) -> str:
    # quoted symbols cannot contain '|' or '\'; DSL identifiers never do
    return "|" + ".".join(parts) + "|"


def smt_sort(s: Sort) -> str:
    if isinstance(s, IntSort):
        return "Int"
    if isinstance(s, BoolSort):
        return "Bool"
    if isinstance(s, PairSort):
        if s.fst != IntSort() or s.snd != IntSort():
            raise SmtError(f"unsupported pair sort {s}")
        return "Pair"
    if isinstance(s, SetSort):
        return f"(Array {smt_sort(s.elem)} Bool)"
    raise SmtError(f"sort {s} has no single SMT sort")


def _int(n: int) -> str:
    return str(n) if n >= 0 else f"(- {-n})"


class _Emitter:
    def __init__(self) -> None:
        self.decls: list[str] = []
        self.defs: list[str] = []
        self.n = 0

    def fresh(self, base: str) -> str:
        self.n += 1
        return sym(base, str(self.n))

    def const(self, name: str, sort: str) -> str:
        self.decls.append(f"(declare-const {name} {sort})")
        return name

    def array_rep(self, name: str, elem: Sort) -> SetRep:
        return SetRep(elem, lambda e, name=name: f"(select {name} {e})")

    def declare_value(self, base: tuple[str, ...], sort: Sort) -> Any:
        if isinstance(sort, SetSort):
            return self.array_rep(self.const(sym(*base), smt_sort(sort)), sort.elem)
        if isinstance(sort, RWSetSort):
            arr = smt_sort(SetSort(sort.elem))
            a = self.const(sym(*base, "adds"), arr)
            r = self.const(sym(*base, "removes"), arr)
            return RWRep(self.array_rep(a, sort.elem), self.array_rep(r, sort.elem))
        return self.const(sym(*base), smt_sort(sort))

    # -- terms

    def tr(self, t: Term, env: dict, states: dict) -> Any:
        if isinstance(t, IntLit):
            return _int(t.value)
        if isinstance(t, BoolLit):
            return "true" if t.value else "false"
        if isinstance(t, Var):
            return env[t.name]
        if isinstance(t, Field):
            return states[t.state][t.name]
        if isinstance(t, Quant):
            return self._quant(t, env, states)
        assert isinstance(t, App), t
        return self._app(t, env, states)

    def _quant(self, t: Quant, env: dict, states: dict) -> str:
        q = "forall" if t.kind == "forall" else "exists"
        s = t.sort
        if isinstance(s, RWSetSort):
            arr = smt_sort(SetSort(s.elem))
            a, r = self.fresh(f"b.{t.var}.adds"), self.fresh(f"b.{t.var}.removes")
            val = RWRep(self.array_rep(a, s.elem), self.array_rep(r, s.elem))
            body = self.tr(t.body, {**env, t.var: val}, states)
            return f"({q} (({a} {arr}) ({r} {arr})) {body})"
        b = self.fresh(f"b.{t.var}")
        val = self.array_rep(b, s.elem) if isinstance(s, SetSort) else b
        body = self.tr(t.body, {**env, t.var: val}, states)
        return f"({q} (({b} {smt_sort(s)})) {body})"

    def set_eq(self, a: SetRep, b: SetRep) -> str:
        e = self.fresh("e")
        return f"(forall (({e} {smt_sort(a.elem)})) (= {a.member(e)} {b.member(e)}))"

    def eq(self, a: Any, b: Any) -> str:
        if isinstance(a, SetRep):
            return self.set_eq(a, b)
        if isinstance(a, RWRep):
            return f"(and {self.set_eq(a.adds, b.adds)} {self.set_eq(a.removes, b.removes)})"
        return f"(= {a} {b})"

    def _app(self, t: App, env: dict, states: dict) -> Any:
        op = t.op
        if op == "empty":
            return SetRep(t.sort.elem, lambda e: "false")
        if op == "rw_empty":
            e = SetRep(t.sort.elem, lambda e: "false")
            return RWRep(e, e)
        a = [self.tr(x, env, states) for x in t.args]
        if op in ("and", "or"):
            return f"({op} {' '.join(a)})" if a else ("true" if op == "and" else "false")
        if op == "not":
            return f"(not {a[0]})"
        if op == "implies":
            return f"(=> {a[0]} {a[1]})"
        if op == "iff":
            return f"(= {a[0]} {a[1]})"
        if op in ("=", "seteq", "equal"):
            return self.eq(a[0], a[1])
        if op == "<>":
            return f"(not {self.eq(a[0], a[1])})"
        if op in ("<", "<=", ">", ">=", "+", "-"):
            return f"({op} {a[0]} {a[1]})"
        if op == "neg":
            return f"(- {a[0]})"
        if op == "pair":
            return f"(mk-pair {a[0]} {a[1]})"
        if op == "fst":
            return f"(pair-fst {a[0]})"
        if op == "snd":
            return f"(pair-snd {a[0]})"
        if op == "add":
            x, s = a
            return SetRep(s.elem, lambda e: f"(or (= {e} {x}) {s.member(e)})")
        if op == "remove":
            x, s = a
            return SetRep(s.elem, lambda e: f"(and (not (= {e} {x})) {s.member(e)})")
        if op == "mem":
            return a[1].member(a[0])
        if op == "is_empty":
            s = a[0]
            e = self.fresh("e")
            return f"(forall (({e} {smt_sort(s.elem)})) (not {s.member(e)}))"
        if op == "add_element":
            x, r = a
            return RWRep(self._app_add(x, r.adds), r.removes)
        if op == "remove_element":
            x, r = a
            return RWRep(r.adds, self._app_add(x, r.removes))
        if op == "in_set":
            x, r = a
            return f"(and {r.adds.member(x)} (not {r.removes.member(x)}))"
        if op == "rw_adds":
            return a[0].adds
        if op == "rw_removes":
            return a[0].removes
        raise SmtError(f"unsupported operator {op!r}")

    @staticmethod
    def _app_add(x: str, s: SetRep) -> SetRep:
        return SetRep(s.elem, lambda e: f"(or (= {e} {x}) {s.member(e)})")

    # -- program

    def exec(self, s: Stmt, state: dict, env: dict) -> dict:
        if isinstance(s, Skip):
            return state
        if isinstance(s, Assign):
            out = dict(state)
            out[s.field] = self.tr(s.value, env, {OP_STATE: state})
            return out
        if isinstance(s, Seq):
            return self.exec(s.second, self.exec(s.first, state, env), env)
        raise SmtError(f"unknown statement {s!r}")

    def define(self, name: tuple[str, ...], sort: Sort, value: Any) -> Any:
        """Declare a fresh copy of a state field and tie it to ``value``."""
        target = self.declare_value(name, sort)
        if isinstance(sort, SetSort):
            self.defs.append(self._array_def(target, value))
        elif isinstance(sort, RWSetSort):
            self.defs.append(self._array_def(target.adds, value.adds))
            self.defs.append(self._array_def(target.removes, value.removes))
        else:
            self.defs.append(f"(= {target} {value})")
        return target

    def _array_def(self, target: SetRep, value: SetRep) -> str:
        e = self.fresh("e")
        return f"(forall (({e} {smt_sort(target.elem)})) (= {target.member(e)} {value.member(e)}))"


def _in_bounds(term: str, sort: Sort, bounds: DomainBounds) -> str:
    if isinstance(sort, IntSort):
        return f"(<= {_int(bounds.int_min)} {term} {_int(bounds.int_max)})"
    if isinstance(sort, PairSort):
        return (f"(and {_in_bounds(f'(pair-fst {term})', IntSort(), bounds)} "
                f"{_in_bounds(f'(pair-snd {term})', IntSort(), bounds)})")
    return "true"


def emit(task: AnalysisTask, bounds: DomainBounds | None = None) -> list[SmtScript]:
    em = _Emitter()
    env: dict[str, Any] = {}
    values: list[tuple[str, str, tuple]] = []
    domain: list[str] = []
    for name, sort in task.params:
        if isinstance(sort, (SetSort, RWSetSort)):
            raise SmtError(f"parameter {name}: set-valued parameters are not supported")
        env[name] = em.declare_value(("v", name), sort)
        values.append((env[name], "param", (name, sort)))
        if bounds:
            domain.append(_in_bounds(env[name], sort, bounds))
    states: dict[str, dict[str, Any]] = {}
    fields = task.spec.state.fields
    for lbl in task.states:
        states[lbl] = {}
        for fname, sort in fields:
            if bounds and isinstance(sort, (SetSort, RWSetSort)):
                states[lbl][fname] = _bounded_set(em, lbl, fname, sort, bounds, values)
                continue
            rep = em.declare_value(("s", lbl, fname), sort)
            states[lbl][fname] = rep
            if not isinstance(rep, (SetRep, RWRep)):
                values.append((rep, "field", (lbl, fname, sort)))
                if bounds:
                    domain.append(_in_bounds(rep, sort, bounds))
    spec = task.spec
    for c in task.program:
        op = spec.op(c.op)
        local = {p: env[a] for p, a in zip(op.param_names, c.args)}
        after = em.exec(op.body, states[c.state_in], local)
        states[c.state_out] = {f: em.define(("s", c.state_out, f), s, after[f]) for f, s in fields}
    assumption = em.tr(task.assumption, env, states)
    goal_texts = [em.tr(g.formula, env, states) for g in task.goals]

    scripts = []
    for i, (g, gt) in enumerate(zip(task.goals, goal_texts), 1):
        lines = [f"; task {task.name}", f"; goal {g.label}",
                 "(set-logic ALL)", "(set-option :produce-models true)", PRELUDE]
        lines += em.decls
        for d in domain:
            lines.append(f"(assert {d})")
        for d in em.defs:
            lines.append(f"(assert {d})")
        lines.append(f"(assert {assumption})")
        lines.append(f"(assert (not {gt}))")
        lines += ["(check-sat)", "(get-model)"]
        scripts.append(SmtScript(task.name, g.label, i, "\n".join(lines) + "\n", tuple(values)))
    return scripts


def _bounded_set(em: _Emitter, lbl: str, fname: str, sort: Sort, bounds: DomainBounds,
                 values: list) -> Any:
    # one boolean per domain element: the set is finite by construction
    elems = elements(sort.elem, bounds)
    parts = ("adds", "removes") if isinstance(sort, RWSetSort) else ("set",)
    reps = []
    for part in parts:
        bits = []
        for i, e in enumerate(elems):
            b = em.const(sym("s", lbl, fname, part, str(i)), "Bool")
            values.append((b, "elem", (lbl, fname, part, e)))
            bits.append((_elem_lit(e), b))

        def member(x: str, bits=bits) -> str:
            return "(or " + " ".join(f"(and (= {x} {lit}) {b})" for lit, b in bits) + ")"
        reps.append(SetRep(sort.elem, member))
    return reps[0] if len(reps) == 1 else RWRep(*reps)


def _elem_lit(e: Any) -> str:
    if isinstance(e, tuple):
        return f"(mk-pair {_int(e[0])} {_int(e[1])})"
    return _int(e)


def write_scripts(scripts: list[SmtScript], directory: str | Path) -> list[Path]:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    out = []
    for s in scripts:
        p = d / s.filename
        p.write_text(s.text, encoding="utf-8")
        out.append(p)
    return out


# ---------------------------------------------------------------------------
# Solver hook


@dataclass
class SolverResult:
    status: str  # "sat" | "unsat" | "unknown" | "error"
    output: str


def solver_command(cmd: str | None = None) -> list[str] | None:
    cmd = cmd or os.environ.get(SOLVER_ENV)
    return shlex.split(cmd) if cmd else None


def run_solver(text: str, cmd: str | None = None, timeout: float = 60.0) -> SolverResult:
    argv = solver_command(cmd)
    if not argv:
        raise SmtError(f"no solver configured (pass --solver or set {SOLVER_ENV})")
    try:
        p = subprocess.run(argv, input=text, capture_output=True, text=True, timeout=timeout)
    except FileNotFoundError:
        raise SmtError(f"solver not found: {argv[0]}") from None
    except subprocess.TimeoutExpired:
        return SolverResult("unknown", "timeout")
    first = p.stdout.strip().split("\n", 1)[0].strip() if p.stdout.strip() else ""
    status = first if first in ("sat", "unsat", "unknown") else "error"
    return SolverResult(status, p.stdout + p.stderr)


def _tokens(text: str) -> list[str]:
    return re.findall(r"\(|\)|\|[^|]*\||[^\s()]+", text)


def parse_sexpr(text: str) -> Any:
    toks = _tokens(text)
    pos = 0

    def read():
        nonlocal pos
        t = toks[pos]
        pos += 1
        if t == "(":
            out = []
            while toks[pos] != ")":
                out.append(read())
            pos += 1
            return out
        return t

    return read()


def _value(v: Any) -> Any:
    if isinstance(v, list):
        if v and v[0] == "-":
            return -_value(v[1])
        if v and v[0] == "mk-pair":
            return (_value(v[1]), _value(v[2]))
        raise SmtError(f"cannot read model value {v!r}")
    if v in ("true", "false"):
        return v == "true"
    return int(v)


def model_counterexample(script: SmtScript, task: AnalysisTask, bounds: DomainBounds,
                         cmd: str | None = None, timeout: float = 60.0):
    """Ask the solver for a model of a sat script and replay it concretely.

    Returns ``(args, states, validated)``; the script must have been emitted
    with ``bounds`` so set contents are fully described by the queried bits.
    """
    terms = [t for t, _, _ in script.values]
    text = script.text.replace("(get-model)\n", "")
    if terms:
        text += f"(get-value ({' '.join(terms)}))\n"
    res = run_solver(text, cmd, timeout)
    if res.status != "sat":
        raise SmtError(f"expected sat, solver said {res.status}")
    body = res.output.strip().split("\n", 1)[1] if terms else "()"
    pairs = parse_sexpr(body)
    args: dict[str, Any] = {}
    init: dict[str, dict[str, Any]] = {lbl: {} for lbl in task.states}
    bits: dict[tuple, set] = {}
    for (_, kind, info), (_, raw) in zip(script.values, pairs):
        v = _value(raw)
        if kind == "param":
            args[info[0]] = v
        elif kind == "field":
            init[info[0]][info[1]] = v
        else:
            lbl, fname, part, e = info
            s = bits.setdefault((lbl, fname, part), set())
            if v:
                s.add(e)
    for lbl in task.states:
        for fname, sort in task.spec.state.fields:
            if isinstance(sort, SetSort):
                init[lbl][fname] = frozenset(bits.get((lbl, fname, "set"), ()))
            elif isinstance(sort, RWSetSort):
                init[lbl][fname] = crdt.RemoveWinsSet(frozenset(bits.get((lbl, fname, "adds"), ())),
                                                      frozenset(bits.get((lbl, fname, "removes"), ())))
    states = {lbl: StateValue(init[lbl]) for lbl in task.states}
    for c in task.program:
        op = task.spec.op(c.op)
        env = Env({p: args[a] for p, a in zip(op.param_names, c.args)})
        states[c.state_out] = exec_stmt(op.body, states[c.state_in], env, bounds)
    env = Env(args, states)
    goal = next(g for g in task.goals if g.label == script.goal)
    ok = eval_formula(task.assumption, env, bounds) and not eval_formula(goal.formula, env, bounds)
    return args, states, ok
