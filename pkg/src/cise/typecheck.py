"""Sort inference and checking.

``elaborate_spec`` fills in the sorts the surface syntax leaves implicit
(unannotated quantifier binders, the polymorphic ``empty``) and reports
ill-sorted clauses.  ``typecheck`` only reports.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

from .terms import (BOOL, INT, INV_STATE, OP_STATE, App, Assign, BoolLit, Field, IntLit,
                    OpDecl, PairSort, Quant, RWSetSort, Seq, SetSort, Skip, Sort, Spec,
                    StateDecl, StateEq, Stmt, Term, Var, is_element_sort)


@dataclass(frozen=True)
class SourceSpan:
    file: str
    line: int
    column: int
    length: int = 1

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.column}"


@dataclass(frozen=True)
class Diagnostic:
    clause: str
    message: str
    span: SourceSpan | None = None

    def __str__(self) -> str:
        where = f"{self.span}: " if self.span else ""
        return f"{where}{self.clause}: {self.message}"


class _Cell:
    """Sort of an unannotated binder, fixed at its first informative use."""
    __slots__ = ("sort",)

    def __init__(self) -> None:
        self.sort: Sort | None = None


class SortError(Exception):
    pass


class _Checker:
    def __init__(self, states: dict[str, StateDecl], scope: dict[str, Sort],
                 allow_old: bool = False) -> None:
        self.states = states
        self.scope: dict[str, Sort | _Cell] = dict(scope)
        self.allow_old = allow_old
        self.errors: list[str] = []

    # -- helpers ------------------------------------------------------------
    def err(self, msg: str) -> None:
        if msg not in self.errors:
            self.errors.append(msg)

    def lookup(self, name: str) -> Sort | _Cell | None:
        return self.scope.get(name)

    # -- synthesis ----------------------------------------------------------
    def synth(self, t: Term) -> tuple[Term, Sort | None]:
        if isinstance(t, IntLit):
            return t, INT
        if isinstance(t, BoolLit):
            return t, BOOL
        if isinstance(t, Var):
            s = self.lookup(t.name)
            if s is None:
                self.err(f"unknown identifier '{t.name}'")
                return t, None
            if isinstance(s, _Cell):
                return t, s.sort
            return t, s
        if isinstance(t, Field):
            decl = self.states.get(t.state)
            if decl is None:
                self.err(f"unknown state '{t.state}'")
                return t, None
            if t.old and not self.allow_old:
                self.err("'old' is only allowed in ensures clauses")
            s = decl.field_sort(t.name)
            if s is None:
                self.err(f"unknown identifier '{t.name}' (no such state field)")
            return t, s
        if isinstance(t, Quant):
            return self.quant(t), BOOL
        assert isinstance(t, App), t
        return self.app(t, None)

    def check(self, t: Term, expected: Sort | None) -> Term:
        if expected is None:
            return self.synth(t)[0]
        if isinstance(t, Var):
            s = self.lookup(t.name)
            if isinstance(s, _Cell) and s.sort is None:
                s.sort = expected
                return t
        if isinstance(t, App):
            out, got = self.app(t, expected)
        else:
            out, got = self.synth(t)
        if got is not None and got != expected:
            self.err(f"sort mismatch: '{out}' has sort {got}, expected {expected}")
        return out

    def quant(self, t: Quant) -> Term:
        saved = self.scope.get(t.var)
        sort = t.sort
        if sort is None:
            # first pass only infers the binder's sort; uses seen before the
            # informative one are checked again below
            cell = _Cell()
            self.scope[t.var] = cell
            errors = list(self.errors)
            self.check(t.body, BOOL)
            self.errors = errors
            sort = cell.sort if cell.sort is not None else INT
        else:
            self._check_sort(sort, f"binder '{t.var}'")
        self.scope[t.var] = sort
        body = self.check(t.body, BOOL)
        if saved is None:
            del self.scope[t.var]
        else:
            self.scope[t.var] = saved
        return Quant(t.kind, t.var, sort, body)

    def _check_sort(self, s: Sort, what: str) -> None:
        if isinstance(s, (SetSort, RWSetSort)) and not is_element_sort(s.elem):
            self.err(f"{what}: set elements must be int or (int, int), got {s.elem}")

    def _set_arg(self, t: Term, kind: type, elem_hint: Sort | None = None) -> tuple[Term, Sort | None]:
        """Synthesise a (remove-wins) set argument; returns its element sort."""
        if isinstance(t, App) and t.op in ("empty", "rw_empty") and elem_hint is not None:
            return App(t.op, (), kind(elem_hint)), elem_hint
        out, s = self.synth(t)
        if s is None:
            return out, None
        if not isinstance(s, kind):
            want = "fset" if kind is SetSort else "remove_wins_set"
            self.err(f"sort mismatch: '{out}' has sort {s}, expected a {want}")
            return out, None
        return out, s.elem

    def app(self, t: App, expected: Sort | None) -> tuple[Term, Sort | None]:
        op, args = t.op, t.args
        if op in ("and", "or"):
            return App(op, tuple(self.check(a, BOOL) for a in args)), BOOL
        if op in ("not", "implies", "iff"):
            return App(op, tuple(self.check(a, BOOL) for a in args)), BOOL
        if op in ("<", "<=", ">", ">="):
            return App(op, tuple(self.check(a, INT) for a in args)), BOOL
        if op in ("+", "-", "neg"):
            return App(op, tuple(self.check(a, INT) for a in args)), INT
        if op in ("=", "<>", "seteq"):
            l, r = args
            l2, ls = self.synth_soft(l)
            if ls is None:
                r2, rs = self.synth(r)
                l2 = self.check(l, rs) if rs is not None else l2
                s = rs
            else:
                r2 = self.check(r, ls)
                s = ls
            if op == "seteq" and s is not None and not isinstance(s, (SetSort, RWSetSort)):
                self.err(f"'==' compares sets, got sort {s}")
            return App(op, (l2, r2)), BOOL
        if op == "pair":
            if isinstance(expected, PairSort):
                return App(op, (self.check(args[0], expected.fst),
                                self.check(args[1], expected.snd))), expected
            (a, sa), (b, sb) = self.synth(args[0]), self.synth(args[1])
            if sa is None or sb is None:
                return App(op, (a, b)), None
            return App(op, (a, b)), PairSort(sa, sb)
        if op in ("fst", "snd"):
            a, s = self.synth(args[0])
            if s is None:
                return App(op, (a,)), None
            if not isinstance(s, PairSort):
                self.err(f"sort mismatch: '{a}' has sort {s}, expected a pair")
                return App(op, (a,)), None
            return App(op, (a,)), s.fst if op == "fst" else s.snd
        if op in ("empty", "rw_empty"):
            kind = SetSort if op == "empty" else RWSetSort
            if isinstance(expected, kind):
                return App(op, (), expected), expected
            if t.sort is not None:
                return t, t.sort
            return t, None
        if op in ("add", "remove", "mem", "add_element", "remove_element", "in_set"):
            kind = RWSetSort if op in ("add_element", "remove_element", "in_set") else SetSort
            hint = expected.elem if isinstance(expected, kind) else None
            s_arg, elem = self._set_arg(args[1], kind, hint)
            if elem is None:
                e_arg, es = self.synth(args[0])
                if es is not None:
                    s_arg = self.check(args[1], kind(es))
                    elem = es
            else:
                e_arg = self.check(args[0], elem)
            result = BOOL if op in ("mem", "in_set") else (kind(elem) if elem is not None else None)
            return App(op, (e_arg, s_arg)), result
        if op == "is_empty":
            a, _ = self._set_arg(args[0], SetSort)
            return App(op, (a,)), BOOL
        if op == "equal":
            a, ea = self._set_arg(args[0], RWSetSort)
            b, eb = self._set_arg(args[1], RWSetSort, ea)
            if ea is None and eb is not None:
                a = self.check(args[0], RWSetSort(eb))
            elif ea is not None and eb is not None and ea != eb:
                self.err(f"sort mismatch: equal over remove_wins_set {ea} and {eb}")
            return App(op, (a, b)), BOOL
        if op in ("rw_adds", "rw_removes"):
            a, elem = self._set_arg(args[0], RWSetSort)
            return App(op, (a,)), SetSort(elem) if elem is not None else None
        self.err(f"unknown operator '{op}'")
        return t, None

    def synth_soft(self, t: Term) -> tuple[Term, Sort | None]:
        """Like synth, but leaves unresolved binders and bare ``empty`` unknown."""
        if isinstance(t, App) and t.op in ("empty", "rw_empty") and t.sort is None:
            return t, None
        return self.synth(t)


def _check_formula(checker: _Checker, f: Term) -> Term:
    return checker.check(f, BOOL)


def _check_stmt(checker: _Checker, s: Stmt, state: StateDecl) -> Stmt:
    if isinstance(s, Skip):
        return s
    if isinstance(s, Seq):
        return Seq(_check_stmt(checker, s.first, state), _check_stmt(checker, s.second, state))
    assert isinstance(s, Assign)
    fs = state.field_sort(s.field)
    if fs is None:
        checker.err(f"assignment to unknown state field '{s.field}'")
        return Assign(s.field, checker.synth(s.value)[0])
    return Assign(s.field, checker.check(s.value, fs))


def elaborate_spec(spec: Spec, spans: dict[str, SourceSpan] | None = None) -> tuple[Spec, list[Diagnostic]]:
    spans = spans or {}
    diags: list[Diagnostic] = []

    def report(clause: str, checker: _Checker) -> None:
        for msg in checker.errors:
            diags.append(Diagnostic(clause, msg, spans.get(clause)))

    st = spec.state
    seen: set[str] = set()
    for name, sort in st.fields:
        if name in seen:
            diags.append(Diagnostic("state", f"duplicate field '{name}'", spans.get("state")))
        seen.add(name)
        c = _Checker({}, {})
        c._check_sort(sort, f"field '{name}'")
        report("state", c)

    inv_checker = _Checker({INV_STATE: st}, {})
    invariant = _check_formula(inv_checker, st.invariant)
    report("invariant", inv_checker)
    state = replace(st, invariant=invariant)

    ops = []
    op_names: set[str] = set()
    for op in spec.ops:
        if op.name in op_names:
            diags.append(Diagnostic(f"operation {op.name}", f"duplicate operation '{op.name}'",
                                    spans.get(f"operation {op.name}")))
        op_names.add(op.name)
        scope: dict[str, Sort] = {}
        for pname, psort in op.params:
            if pname in scope:
                diags.append(Diagnostic(f"operation {op.name}", f"duplicate parameter '{pname}'",
                                        spans.get(f"operation {op.name}")))
            if pname in state.field_names:
                diags.append(Diagnostic(f"operation {op.name}",
                                        f"parameter '{pname}' clashes with a state field",
                                        spans.get(f"operation {op.name}")))
            c = _Checker({}, {})
            c._check_sort(psort, f"parameter '{pname}'")
            report(f"operation {op.name}", c)
            scope[pname] = psort
        requires = []
        for i, r in enumerate(op.requires, 1):
            c = _Checker({OP_STATE: state}, scope)
            requires.append(_check_formula(c, r))
            report(f"{op.name} requires #{i}", c)
        ensures = []
        for i, e in enumerate(op.ensures, 1):
            c = _Checker({OP_STATE: state}, scope, allow_old=True)
            ensures.append(_check_formula(c, e))
            report(f"{op.name} ensures #{i}", c)
        c = _Checker({OP_STATE: state}, scope)
        body = _check_stmt(c, op.body, state)
        report(f"{op.name} body", c)
        ops.append(OpDecl(op.name, op.params, tuple(requires), tuple(ensures), body))

    state_eq = spec.state_eq
    if state_eq is not None:
        if state_eq.left == state_eq.right:
            diags.append(Diagnostic("state_eq", "the two state parameters must differ",
                                    spans.get("state_eq")))
        c = _Checker({state_eq.left: state, state_eq.right: state}, {})
        state_eq = StateEq(state_eq.name, state_eq.left, state_eq.right, _check_formula(c, state_eq.body))
        report("state_eq", c)

    return Spec(state, tuple(ops), state_eq), diags


def typecheck(spec: Spec) -> list[Diagnostic]:
    return elaborate_spec(spec)[1]


def infer_sort(t: Term, states: dict[str, StateDecl], scope: dict[str, Sort]) -> Sort | None:
    c = _Checker(states, scope, allow_old=True)
    _, s = c.synth(t)
    if c.errors:
        raise SortError("; ".join(c.errors))
    return s


def elaborate_formula(f: Term, states: dict[str, StateDecl], scope: dict[str, Sort],
                      allow_old: bool = False) -> Term:
    """Check ``f`` as a formula and return it with inferred sorts; raises SortError."""
    c = _Checker(states, scope, allow_old)
    out = c.check(f, BOOL)
    if c.errors:
        raise SortError("; ".join(c.errors))
    return out
