"""Bounded validity checker for analysis tasks.

Integers and pairs of integers are enumerated concretely.  Booleans and set
membership bits are BDD variables, so each concrete integer valuation covers
every combination of set contents at once.  Quantifiers over integers expand
over the finite interval; quantifiers over sets become BDD quantification.

Counterexamples are the lexicographically least failing valuation: integer
slots in order (task parameters, then integer fields per state), then set
contents with the first element most significant and "absent" before
"present".  Every counterexample is replayed through the concrete evaluator.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Any

from dd import autoref

from .analysis import AnalysisTask, Call, ProofGoal
from .semantics import (ConfigurationError, DomainBounds, Env, StateValue, elements,
                        eval_formula, exec_stmt, format_value, to_json_value)
from .terms import (App, Assign, BoolLit, BoolSort, Field, IntLit, OP_STATE, OpDecl, PairSort,
                    Quant, RWSetSort, Seq, SetSort, Skip, Sort, Spec, StateDecl, Stmt, Term, Var,
                    flatten_stmt)
from . import crdt

# Upper bound on concrete integer valuations per task.
VALUATION_LIMIT = 1 << 20


class BoundsError(Exception):
    """A set operation needed an element outside the finite domain."""


@dataclass(frozen=True)
class SymSet:
    elems: tuple
    index: dict = field(compare=False, repr=False)
    bits: tuple


@dataclass(frozen=True)
class SymRW:
    adds: SymSet
    removes: SymSet


@dataclass
class Counterexample:
    goal: str
    args: dict[str, Any]
    states: dict[str, StateValue]
    failed_goals: list[str]
    validated: bool | None  # None: too large to replay concretely

    def to_json(self) -> dict:
        return {
            "goal": self.goal,
            "args": {k: to_json_value(v) for k, v in self.args.items()},
            "states": {k: to_json_value(v) for k, v in self.states.items()},
            "failed_goals": list(self.failed_goals),
            "validated": self.validated,
        }

    def format(self, indent: str = "") -> str:
        lines = []
        if self.args:
            lines.append(indent + ", ".join(f"{k} = {format_value(v)}" for k, v in self.args.items()))
        for lbl, st in self.states.items():
            lines.append(f"{indent}{lbl}: {st!r}")
        return "\n".join(lines)


@dataclass
class GoalResult:
    goal: ProofGoal
    holds: bool
    counterexample: Counterexample | None = None


@dataclass
class CheckResult:
    task: AnalysisTask
    bounds: DomainBounds
    goals: list[GoalResult]
    counterexample: Counterexample | None
    models: int
    valuations: int
    out_of_bounds: int = 0
    warnings: list[str] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return all(g.holds for g in self.goals)

    @property
    def vacuous(self) -> bool:
        return self.models == 0

    def failed(self) -> list[GoalResult]:
        return [g for g in self.goals if not g.holds]


# ---------------------------------------------------------------------------
# Symbolic evaluation


class _Engine:
    def __init__(self, task_fields: tuple[tuple[str, Sort], ...], ops: dict[str, OpDecl],
                 bounds: DomainBounds) -> None:
        self.bdd = autoref.BDD()
        self.fields = task_fields
        self.ops = ops
        self.bounds = bounds
        self.order: list[str] = []
        self._elems: dict[Sort, tuple[tuple, dict]] = {}
        self.qvars: dict[tuple, str] = {}

    # -- helpers

    def elems(self, sort: Sort) -> tuple[tuple, dict]:
        if sort not in self._elems:
            es = tuple(elements(sort, self.bounds))
            self._elems[sort] = (es, {e: i for i, e in enumerate(es)})
        return self._elems[sort]

    def const(self, b: bool):
        return self.bdd.true if b else self.bdd.false

    def _qvar(self, depth: int, elem: Sort, part: str, i: int) -> str:
        key = (depth, elem, part, i)
        if key not in self.qvars:
            # not foreseen by the pre-scan: append at the bottom of the order
            name = f"_q{depth}_{part}_{i}_{_sort_tag(elem)}"
            self.bdd.declare(name)
            self.qvars[key] = name
        return self.qvars[key]

    def set_of(self, sort: Sort, bits) -> SymSet:
        es, idx = self.elems(sort)
        return SymSet(es, idx, tuple(bits))

    # -- terms

    def ev(self, t: Term, vars: dict, states: dict, depth: int = 0) -> Any:
        if isinstance(t, IntLit):
            return t.value
        if isinstance(t, BoolLit):
            return self.const(t.value)
        if isinstance(t, Var):
            return vars[t.name]
        if isinstance(t, Field):
            return states[t.state][t.name]
        if isinstance(t, Quant):
            return self._quant(t, vars, states, depth)
        assert isinstance(t, App), t
        return self._app(t, vars, states, depth)

    def _quant(self, t: Quant, vars: dict, states: dict, depth: int):
        s = t.sort
        if isinstance(s, (SetSort, RWSetSort)):
            n = len(self.elems(s.elem)[0])
            vecs, names = [], []
            for part in _parts(s):
                vs = [self._qvar(depth, s.elem, part, i) for i in range(n)]
                names += vs
                vecs.append(self.set_of(s.elem, [self.bdd.var(v) for v in vs]))
            val: Any = vecs[0] if isinstance(s, SetSort) else SymRW(*vecs)
            body = self.ev(t.body, {**vars, t.var: val}, states, depth + 1)
            if t.kind == "forall":
                return self.bdd.forall(names, body)
            return self.bdd.exist(names, body)
        if isinstance(s, BoolSort):
            vals: list = [self.bdd.false, self.bdd.true]
        else:
            vals = elements(s, self.bounds)
        if t.kind == "forall":
            acc = self.bdd.true
            for v in vals:
                acc = acc & self.ev(t.body, {**vars, t.var: v}, states, depth)
                if acc == self.bdd.false:
                    break
        else:
            acc = self.bdd.false
            for v in vals:
                acc = acc | self.ev(t.body, {**vars, t.var: v}, states, depth)
                if acc == self.bdd.true:
                    break
        return acc

    def _eq(self, a, b):
        if isinstance(a, SymSet):
            acc = self.bdd.true
            for x, y in zip(a.bits, b.bits):
                acc = acc & x.equiv(y)
            return acc
        if isinstance(a, SymRW):
            return self._eq(a.adds, b.adds) & self._eq(a.removes, b.removes)
        if isinstance(a, autoref.Function):
            return a.equiv(b)
        return self.const(a == b)

    def _member_bit(self, e, s: SymSet):
        i = s.index.get(e)
        return self.bdd.false if i is None else s.bits[i]

    def _with_bit(self, e, s: SymSet, value) -> SymSet:
        i = s.index.get(e)
        if i is None:
            raise BoundsError(f"element {format_value(e)} lies outside the bounded domain")
        bits = list(s.bits)
        bits[i] = value
        return SymSet(s.elems, s.index, tuple(bits))

    def _app(self, t: App, vars: dict, states: dict, depth: int):
        op = t.op
        if op == "empty":
            return self.set_of(t.sort.elem, [self.bdd.false] * len(self.elems(t.sort.elem)[0]))
        if op == "rw_empty":
            e = self.set_of(t.sort.elem, [self.bdd.false] * len(self.elems(t.sort.elem)[0]))
            return SymRW(e, e)
        if op == "and":
            acc = self.bdd.true
            for x in t.args:
                acc = acc & self.ev(x, vars, states, depth)
                if acc == self.bdd.false:
                    break
            return acc
        if op == "or":
            acc = self.bdd.false
            for x in t.args:
                acc = acc | self.ev(x, vars, states, depth)
                if acc == self.bdd.true:
                    break
            return acc
        a = [self.ev(x, vars, states, depth) for x in t.args]
        if op == "not":
            return ~a[0]
        if op == "implies":
            return a[0].implies(a[1])
        if op == "iff":
            return a[0].equiv(a[1])
        if op in ("=", "seteq", "equal"):
            return self._eq(a[0], a[1])
        if op == "<>":
            return ~self._eq(a[0], a[1])
        if op == "<":
            return self.const(a[0] < a[1])
        if op == "<=":
            return self.const(a[0] <= a[1])
        if op == ">":
            return self.const(a[0] > a[1])
        if op == ">=":
            return self.const(a[0] >= a[1])
        if op == "+":
            return a[0] + a[1]
        if op == "-":
            return a[0] - a[1]
        if op == "neg":
            return -a[0]
        if op == "pair":
            return (a[0], a[1])
        if op == "fst":
            return a[0][0]
        if op == "snd":
            return a[0][1]
        if op == "add":
            return self._with_bit(a[0], a[1], self.bdd.true)
        if op == "remove":
            if a[0] not in a[1].index:
                return a[1]
            return self._with_bit(a[0], a[1], self.bdd.false)
        if op == "mem":
            return self._member_bit(a[0], a[1])
        if op == "is_empty":
            acc = self.bdd.true
            for b in a[0].bits:
                acc = acc & ~b
            return acc
        if op == "add_element":
            return SymRW(self._with_bit(a[0], a[1].adds, self.bdd.true), a[1].removes)
        if op == "remove_element":
            return SymRW(a[1].adds, self._with_bit(a[0], a[1].removes, self.bdd.true))
        if op == "in_set":
            return self._member_bit(a[0], a[1].adds) & ~self._member_bit(a[0], a[1].removes)
        if op == "rw_adds":
            return a[0].adds
        if op == "rw_removes":
            return a[0].removes
        raise ConfigurationError(f"unsupported operator {op!r}")

    def exec(self, s: Stmt, state: dict, vars: dict) -> dict:
        if isinstance(s, Skip):
            return state
        if isinstance(s, Assign):
            out = dict(state)
            out[s.field] = self.ev(s.value, vars, {OP_STATE: state})
            return out
        if isinstance(s, Seq):
            return self.exec(s.second, self.exec(s.first, state, vars), vars)
        raise ConfigurationError(f"unknown statement {s!r}")

    def run(self, program: tuple[Call, ...], vars: dict, states: dict) -> dict:
        states = dict(states)
        for c in program:
            op = self.ops[c.op]
            local = {p: vars[a] for p, a in zip(op.param_names, c.args)}
            states[c.state_out] = self.exec(op.body, states[c.state_in], local)
        return states

    def lexmin(self, u) -> dict[str, bool]:
        # plain restriction: node low/high edges may be complemented
        out = {}
        for v in self.order:
            lo = self.bdd.let({v: False}, u)
            if lo != self.bdd.false:
                out[v], u = False, lo
            else:
                out[v], u = True, self.bdd.let({v: True}, u)
        return out


def _parts(sort: Sort) -> tuple[str, ...]:
    return ("adds", "removes") if isinstance(sort, RWSetSort) else ("set",)


def _sort_tag(s: Sort) -> str:
    return "p" if isinstance(s, PairSort) else "i"


def _set_quantifiers(t: Term, depth: int):
    """(depth, element sort, part) of every set quantifier, mirroring _Engine._quant."""
    if isinstance(t, Quant):
        if isinstance(t.sort, (SetSort, RWSetSort)):
            for part in _parts(t.sort):
                yield depth, t.sort.elem, part
            yield from _set_quantifiers(t.body, depth + 1)
        else:
            yield from _set_quantifiers(t.body, depth)
    elif isinstance(t, App):
        for a in t.args:
            yield from _set_quantifiers(a, depth)


def _is_symbolic(sort: Sort) -> bool:
    return isinstance(sort, (BoolSort, SetSort, RWSetSort))


def _check_sort(sort: Sort, what: str) -> None:
    if isinstance(sort, PairSort) and not all(
            not _is_symbolic(x) and not isinstance(x, PairSort) for x in (sort.fst, sort.snd)):
        raise ConfigurationError(f"{what}: pairs may only contain integers")


# ---------------------------------------------------------------------------
# Task checking


def check_task(task: AnalysisTask, bounds: DomainBounds | None = None) -> CheckResult:
    bounds = bounds or DomainBounds()
    spec = task.spec
    fields = spec.state.fields
    eng = _Engine(fields, {o.name: o for o in spec.ops}, bounds)

    # concrete integer slots, in counterexample order
    slots: list[tuple[str, str, str, Sort]] = []  # (kind, label, name, sort)
    for name, sort in task.params:
        _check_sort(sort, f"parameter {name}")
        if not _is_symbolic(sort):
            slots.append(("param", "", name, sort))
    for lbl in task.states:
        for name, sort in fields:
            _check_sort(sort, f"field {name}")
            if not _is_symbolic(sort):
                slots.append(("field", lbl, name, sort))

    # BDD variables.  The level order interleaves, per set element, the bits of
    # every state copy and of every set quantifier over that element sort, so
    # equalities between copies stay linear.  Counterexamples are minimised in
    # a separate, field-major order (eng.order).
    sym_params: dict[str, Any] = {}
    var_info: dict[str, tuple] = {}
    levels: list[str] = []
    for name, sort in task.params:
        if isinstance(sort, BoolSort):
            v = f"p_{len(var_info)}"
            var_info[v] = ("param", name)
            levels.append(v)
            eng.order.append(v)
        elif isinstance(sort, (SetSort, RWSetSort)):
            raise ConfigurationError(f"parameter {name}: set-valued parameters are not supported")
    bool_fields: dict[tuple[str, str], str] = {}
    set_bits: dict[tuple[str, str, str], list[str]] = {}
    by_elem: dict[tuple[Sort, int], list[str]] = {}
    for fname, sort in fields:
        if isinstance(sort, BoolSort):
            for lbl in task.states:
                v = f"v{len(var_info)}"
                var_info[v] = ("bool", lbl, fname)
                bool_fields[(lbl, fname)] = v
                levels.append(v)
                eng.order.append(v)
        elif isinstance(sort, (SetSort, RWSetSort)):
            es, _ = eng.elems(sort.elem)
            for i, e in enumerate(es):
                for p in _parts(sort):
                    for lbl in task.states:
                        v = f"v{len(var_info)}"
                        var_info[v] = ("elem", lbl, fname, p, e)
                        set_bits.setdefault((lbl, fname, p), []).append(v)
                        by_elem.setdefault((sort.elem, i), []).append(v)
                        eng.order.append(v)
    terms = [task.assumption] + [g.formula for g in task.goals]
    for c in task.program:
        terms += [st.value for st in flatten_stmt(eng.ops[c.op].body)]
    quants: list[tuple[int, Sort, str]] = []
    for t in terms:
        for q in _set_quantifiers(t, 0):
            if q not in quants:
                quants.append(q)
    for depth, elem, part in quants:
        for i in range(len(eng.elems(elem)[0])):
            v = f"_q{depth}_{part}_{i}_{_sort_tag(elem)}"
            eng.qvars[(depth, elem, part, i)] = v
            by_elem.setdefault((elem, i), []).append(v)
    for group in by_elem.values():
        levels += group
    for v in levels:
        eng.bdd.declare(v)
    for name, sort in task.params:
        if isinstance(sort, BoolSort):
            sym_params[name] = eng.bdd.var(next(k for k, i in var_info.items()
                                                if i == ("param", name)))
    sym_state: dict[str, dict[str, Any]] = {lbl: {} for lbl in task.states}
    for lbl in task.states:
        for fname, sort in fields:
            if isinstance(sort, BoolSort):
                sym_state[lbl][fname] = eng.bdd.var(bool_fields[(lbl, fname)])
            elif isinstance(sort, (SetSort, RWSetSort)):
                vecs = [eng.set_of(sort.elem, [eng.bdd.var(v) for v in set_bits[(lbl, fname, p)]])
                        for p in _parts(sort)]
                sym_state[lbl][fname] = vecs[0] if isinstance(sort, SetSort) else SymRW(*vecs)

    domains = [elements(s, bounds) for _, _, _, s in slots]
    total = 1
    for d in domains:
        total *= len(d)
    if total > VALUATION_LIMIT:
        raise ConfigurationError(
            f"{task.name}: {total} integer valuations at bounds {bounds} exceed the limit")

    results = {g.label: _Witness() for g in task.goals}
    first: tuple | None = None
    models = 0
    oob = 0
    oob_msg = None
    nvars = len(eng.order)
    for combo in itertools.product(*domains):
        vars = dict(sym_params)
        states = {lbl: dict(sym_state[lbl]) for lbl in task.states}
        for (kind, lbl, name, _), val in zip(slots, combo):
            if kind == "param":
                vars[name] = val
            else:
                states[lbl][name] = val
        try:
            states = eng.run(task.program, vars, states)
            assume = eng.ev(task.assumption, vars, states)
            if assume == eng.bdd.false:
                continue
            fails = []
            for g in task.goals:
                fails.append(assume & ~eng.ev(g.formula, vars, states))
        except BoundsError as exc:
            oob += 1
            oob_msg = oob_msg or str(exc)
            continue
        models += int(eng.bdd.count(assume, nvars=nvars)) if nvars else 1
        any_fail = eng.bdd.false
        for g, f in zip(task.goals, fails):
            if f != eng.bdd.false:
                any_fail = any_fail | f
                st = results[g.label]
                if st.witness is None:
                    st.witness = (combo, eng.lexmin(f))
        if first is None and any_fail != eng.bdd.false:
            first = (combo, eng.lexmin(any_fail))

    def build(label: str | None, witness: tuple) -> Counterexample:
        return _concretise(task, bounds, slots, var_info, witness, label)

    goal_results = []
    for g in task.goals:
        w = results[g.label].witness
        goal_results.append(GoalResult(g, w is None, build(g.label, w) if w else None))
    overall = build(None, first) if first else None

    warnings = list(task.notes)
    if models == 0:
        warnings.append(f"{task.name}: the assumption has no model at bounds {bounds}; "
                        "every goal holds vacuously")
    if oob:
        warnings.append(f"{task.name}: {oob} valuation(s) skipped: {oob_msg}")
    for gr in goal_results:
        cx = gr.counterexample
        if cx is not None and cx.validated is False:
            warnings.append(f"{task.name}: counterexample for '{gr.goal.label}' "
                            "did not replay in the concrete evaluator")
        elif cx is not None and cx.validated is None:
            warnings.append(f"{task.name}: counterexample for '{gr.goal.label}' "
                            "is too large to replay concretely")
    return CheckResult(task, bounds, goal_results, overall, models, total, oob, warnings)


@dataclass
class _Witness:
    witness: tuple | None = None


def _concretise(task: AnalysisTask, bounds: DomainBounds, slots, var_info, witness,
                label: str | None) -> Counterexample:
    combo, assignment = witness
    args: dict[str, Any] = {}
    init: dict[str, dict[str, Any]] = {lbl: {} for lbl in task.states}
    for (kind, lbl, name, _), val in zip(slots, combo):
        if kind == "param":
            args[name] = val
        else:
            init[lbl][name] = val
    sets: dict[tuple, set] = {}
    for v, bit in assignment.items():
        info = var_info[v]
        if info[0] == "param":
            args[info[1]] = bit
        elif info[0] == "bool":
            init[info[1]][info[2]] = bit
        else:
            _, lbl, fname, part, e = info
            s = sets.setdefault((lbl, fname, part), set())
            if bit:
                s.add(e)
    for lbl in task.states:
        for fname, sort in task.spec.state.fields:
            if isinstance(sort, SetSort):
                init[lbl][fname] = frozenset(sets.get((lbl, fname, "set"), ()))
            elif isinstance(sort, RWSetSort):
                init[lbl][fname] = crdt.RemoveWinsSet(frozenset(sets.get((lbl, fname, "adds"), ())),
                                                      frozenset(sets.get((lbl, fname, "removes"), ())))
    args = {n: args[n] for n, _ in task.params}
    states = {lbl: StateValue({f: init[lbl][f] for f in task.spec.state.field_names})
              for lbl in task.states}
    # replay concretely
    failed: list[str] = []
    validated: bool | None = False
    try:
        for c in task.program:
            op = task.spec.op(c.op)
            env = Env({p: args[a] for p, a in zip(op.param_names, c.args)})
            states[c.state_out] = exec_stmt(op.body, states[c.state_in], env, bounds)
        env = Env(dict(args), states)
        if eval_formula(task.assumption, env, bounds):
            failed = [g.label for g in task.goals if not eval_formula(g.formula, env, bounds)]
            validated = bool(failed) if label is None else label in failed
    except ConfigurationError:
        # the concrete evaluator cannot ground some quantifier at these bounds
        validated = None
    return Counterexample(label or (failed[0] if failed else ""), args, states, failed, validated)


def check_formula_valid(formula: Term, bounds: DomainBounds | None = None,
                        fields: tuple[tuple[str, Sort], ...] = (),
                        states: tuple[str, ...] = (),
                        params: tuple[tuple[str, Sort], ...] = (),
                        assumption: Term = BoolLit(True)) -> CheckResult:
    """Check ``assumption -> formula`` over every state/variable valuation."""
    spec = Spec(StateDecl("state", tuple(fields)))
    task = AnalysisTask("formula", "formula", (), tuple(params), tuple(states), assumption, (),
                        (ProofGoal("formula", formula, "formula"),), spec)
    return check_task(task, bounds)
