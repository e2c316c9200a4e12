"""Strongest postconditions for straight-line operation bodies.

State fields are treated as program variables.  For an assignment the
classical forward rule introduces a fresh name for the overwritten value::

    sp(P, f <- e)   = exists v. state.f = e[f := v] /\\ P[f := v]
    sp(P, s1; s2)   = sp(sp(P, s1), s2)
    sp(P, skip)     = P
"""
from __future__ import annotations

from dataclasses import dataclass

from .terms import (OP_STATE, TRUE, App, Assign, Field, OpDecl, Quant, Seq, Skip,
                    Spec, Stmt, Term, Var, all_names, conj, free_vars, substitute)


@dataclass(frozen=True)
class SpResult:
    formula: Term
    fresh_vars: tuple[str, ...]


def spec_identifiers(spec: Spec) -> set[str]:
    names = set(spec.state.field_names) | set(spec.op_names)
    names |= all_names(spec.state.invariant)
    for op in spec.ops:
        names |= set(op.param_names)
        for t in op.requires + op.ensures:
            names |= all_names(t)
    return names


class _Fresh:
    def __init__(self, taken: set[str], prefix: str = "v") -> None:
        self.taken = set(taken)
        self.prefix = prefix
        self.n = 0
        self.issued: list[str] = []

    def __call__(self) -> str:
        while f"{self.prefix}{self.n}" in self.taken:
            self.n += 1
        name = f"{self.prefix}{self.n}"
        self.taken.add(name)
        self.issued.append(name)
        self.n += 1
        return name


def sp(pre: Term, body: Stmt, field_sorts: dict, avoid: set[str] | None = None,
       state: str = OP_STATE) -> SpResult:
    """Strongest postcondition of ``body`` from ``pre``.

    ``field_sorts`` maps field names to sorts (used to annotate binders);
    ``avoid`` lists identifiers fresh names must not collide with.
    """
    taken = set(avoid or ()) | all_names(pre) | _stmt_names(body) | set(field_sorts)
    fresh = _Fresh(taken)
    out = _sp(pre, body, field_sorts, fresh, state)
    return SpResult(out, tuple(fresh.issued))


def _stmt_names(s: Stmt) -> set[str]:
    if isinstance(s, Assign):
        return all_names(s.value)
    if isinstance(s, Seq):
        return _stmt_names(s.first) | _stmt_names(s.second)
    return set()


def _sp(p: Term, s: Stmt, sorts: dict, fresh: _Fresh, state: str) -> Term:
    if isinstance(s, Skip):
        return p
    if isinstance(s, Seq):
        return _sp(_sp(p, s.first, sorts, fresh, state), s.second, sorts, fresh, state)
    assert isinstance(s, Assign), s
    v = fresh()
    target = Field(state, s.field)
    old_value = {target: Var(v)}
    rhs = substitute(s.value, field_map=old_value)
    return Quant("exists", v, sorts[s.field],
                 conj([App("=", (target, rhs)), substitute(p, field_map=old_value)]))


def sp_op(spec: Spec, op: OpDecl) -> SpResult:
    sorts = dict(spec.state.fields)
    return sp(op.pre, op.body, sorts, avoid=spec_identifiers(spec))


def simplify(f: Term) -> Term:
    """Drop ``true`` conjuncts, flatten conjunctions, drop unused existentials."""
    if isinstance(f, App):
        args = tuple(simplify(a) for a in f.args)
        if f.op == "and":
            flat: list[Term] = []
            for a in args:
                if isinstance(a, App) and a.op == "and":
                    flat.extend(a.args)
                elif a == TRUE:
                    continue
                else:
                    flat.append(a)
            return conj(flat)
        return App(f.op, args, f.sort)
    if isinstance(f, Quant):
        body = simplify(f.body)
        if f.kind == "exists" and f.var not in free_vars(body):
            # sound only over non-empty domains, which every sort has
            return body
        return Quant(f.kind, f.var, f.sort, body)
    return f
