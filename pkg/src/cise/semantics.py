"""Concrete, bounded semantics of terms and statements.

Values: ``int``, ``bool``, 2-tuples for pairs, ``frozenset`` for finite sets and
:class:`~cise.crdt.RemoveWinsSet` for remove-wins sets.  Quantifiers range over
the finite domains described by :class:`DomainBounds`.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Any, Iterator, Mapping

from . import crdt
from .terms import (App, BoolLit, BoolSort, Field, IntLit, IntSort, OP_STATE, PairSort, Quant,
                    RWSetSort, SetSort, Sort, Stmt, Skip, Assign, Seq, Term, Var)

DEFAULT_CAP = 4
# Largest number of values a single quantifier may enumerate in the concrete evaluator.
GROUND_LIMIT = 1 << 16


class ConfigurationError(ValueError):
    pass


class EvaluationError(RuntimeError):
    pass


@dataclass(frozen=True)
class DomainBounds:
    int_min: int = 0
    int_max: int = 3
    cap: int = DEFAULT_CAP

    def __post_init__(self) -> None:
        if self.int_min > self.int_max:
            raise ConfigurationError(f"empty integer interval {self.int_min}..{self.int_max}")
        if self.size > self.cap:
            raise ConfigurationError(
                f"interval {self.int_min}..{self.int_max} has {self.size} values; cap is {self.cap}")

    @property
    def size(self) -> int:
        return self.int_max - self.int_min + 1

    @property
    def ints(self) -> range:
        return range(self.int_min, self.int_max + 1)

    @classmethod
    def parse(cls, text: str, cap: int = DEFAULT_CAP) -> DomainBounds:
        lo, sep, hi = text.partition("..")
        if not sep:
            raise ConfigurationError(f"bounds look like MIN..MAX, got {text!r}")
        try:
            return cls(int(lo), int(hi), cap)
        except ValueError as exc:
            if isinstance(exc, ConfigurationError):
                raise
            raise ConfigurationError(f"bounds look like MIN..MAX, got {text!r}") from None

    def __str__(self) -> str:
        return f"{self.int_min}..{self.int_max}"


def elements(sort: Sort, bounds: DomainBounds) -> list:
    """Finite domain of a non-set sort, in enumeration order."""
    if isinstance(sort, IntSort):
        return list(bounds.ints)
    if isinstance(sort, BoolSort):
        return [False, True]
    if isinstance(sort, PairSort):
        return list(itertools.product(elements(sort.fst, bounds), elements(sort.snd, bounds)))
    raise ConfigurationError(f"no element domain for sort {sort}")


def subsets(elems: list) -> Iterator[frozenset]:
    # first element is the most significant position; absent sorts before present
    for bits in itertools.product((False, True), repeat=len(elems)):
        yield frozenset(e for e, b in zip(elems, bits) if b)


def domain_size(sort: Sort, bounds: DomainBounds) -> int:
    if isinstance(sort, SetSort):
        return 2 ** len(elements(sort.elem, bounds))
    if isinstance(sort, RWSetSort):
        return 4 ** len(elements(sort.elem, bounds))
    return len(elements(sort, bounds))


def domain(sort: Sort, bounds: DomainBounds) -> Iterator[Any]:
    if isinstance(sort, SetSort):
        yield from subsets(elements(sort.elem, bounds))
    elif isinstance(sort, RWSetSort):
        elems = elements(sort.elem, bounds)
        for a in subsets(elems):
            for r in subsets(elems):
                yield crdt.RemoveWinsSet(a, r)
    else:
        yield from elements(sort, bounds)


class StateValue(Mapping):
    """Immutable record of field values."""

    __slots__ = ("_items", "_hash")

    def __init__(self, items: Mapping[str, Any] | None = None, **kw: Any) -> None:
        d = dict(items or {})
        d.update(kw)
        self._items = d
        self._hash = None

    def __getitem__(self, key: str) -> Any:
        return self._items[key]

    def __iter__(self):
        return iter(self._items)

    def __len__(self) -> int:
        return len(self._items)

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(self._items.items()))
        return self._hash

    def __eq__(self, other: object) -> bool:
        if isinstance(other, StateValue):
            return self._items == other._items
        return NotImplemented

    def set(self, name: str, value: Any) -> StateValue:
        d = dict(self._items)
        d[name] = value
        return StateValue(d)

    def __repr__(self) -> str:
        inner = ", ".join(f"{k}={format_value(v)}" for k, v in self._items.items())
        return f"{{{inner}}}"


def format_value(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, frozenset):
        return "{" + ", ".join(format_value(x) for x in sorted(v)) + "}"
    if isinstance(v, tuple):
        return "(" + ", ".join(format_value(x) for x in v) + ")"
    if isinstance(v, crdt.RemoveWinsSet):
        return f"<adds={format_value(v.adds)}, removes={format_value(v.removes)}>"
    return repr(v)


def to_json_value(v: Any) -> Any:
    if isinstance(v, frozenset):
        return [to_json_value(x) for x in sorted(v)]
    if isinstance(v, tuple):
        return [to_json_value(x) for x in v]
    if isinstance(v, crdt.RemoveWinsSet):
        return {"adds": to_json_value(v.adds), "removes": to_json_value(v.removes)}
    if isinstance(v, StateValue):
        return {k: to_json_value(x) for k, x in v.items()}
    return v


@dataclass(frozen=True)
class Env:
    """Bindings for evaluation: variables, current states and entry snapshots by label."""
    vars: Mapping[str, Any] = field(default_factory=dict)
    states: Mapping[str, StateValue] = field(default_factory=dict)
    olds: Mapping[str, StateValue] = field(default_factory=dict)

    def bind(self, name: str, value: Any) -> Env:
        return Env({**self.vars, name: value}, self.states, self.olds)

    def with_state(self, label: str, state: StateValue) -> Env:
        return Env(self.vars, {**self.states, label: state}, self.olds)


def eval_term(t: Term, env: Env, bounds: DomainBounds) -> Any:
    if isinstance(t, IntLit):
        return t.value
    if isinstance(t, BoolLit):
        return t.value
    if isinstance(t, Var):
        try:
            return env.vars[t.name]
        except KeyError:
            raise EvaluationError(f"unbound variable {t.name!r}") from None
    if isinstance(t, Field):
        table = env.olds if t.old else env.states
        try:
            return table[t.state][t.name]
        except KeyError:
            which = "old " if t.old else ""
            raise EvaluationError(f"unbound state field {which}{t.state}.{t.name}") from None
    if isinstance(t, Quant):
        if domain_size(t.sort, bounds) > GROUND_LIMIT:
            raise ConfigurationError(
                f"quantifier '{t.kind} {t.var}: {t.sort}' ranges over too many values at bounds {bounds}")
        vals = domain(t.sort, bounds)
        if t.kind == "forall":
            return all(eval_term(t.body, env.bind(t.var, v), bounds) for v in vals)
        return any(eval_term(t.body, env.bind(t.var, v), bounds) for v in vals)
    assert isinstance(t, App), t
    return _eval_app(t, env, bounds)


def _eval_app(t: App, env: Env, bounds: DomainBounds) -> Any:
    op = t.op
    # short-circuit connectives first
    if op == "and":
        return all(eval_term(a, env, bounds) for a in t.args)
    if op == "or":
        return any(eval_term(a, env, bounds) for a in t.args)
    if op == "implies":
        return (not eval_term(t.args[0], env, bounds)) or bool(eval_term(t.args[1], env, bounds))
    if op == "empty":
        return frozenset()
    if op == "rw_empty":
        return crdt.empty()
    a = [eval_term(x, env, bounds) for x in t.args]
    if op == "not":
        return not a[0]
    if op == "iff":
        return a[0] == a[1]
    if op in ("=", "seteq"):
        return a[0] == a[1]
    if op == "<>":
        return a[0] != a[1]
    if op == "<":
        return a[0] < a[1]
    if op == "<=":
        return a[0] <= a[1]
    if op == ">":
        return a[0] > a[1]
    if op == ">=":
        return a[0] >= a[1]
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
        return a[1] | {a[0]}
    if op == "remove":
        return a[1] - {a[0]}
    if op == "mem":
        return a[0] in a[1]
    if op == "is_empty":
        return not a[0]
    if op == "add_element":
        return crdt.add_element(a[0], a[1])
    if op == "remove_element":
        return crdt.remove_element(a[0], a[1])
    if op == "in_set":
        return crdt.member(a[0], a[1])
    if op == "equal":
        return crdt.equal(a[0], a[1])
    if op == "rw_adds":
        return a[0].adds
    if op == "rw_removes":
        return a[0].removes
    raise EvaluationError(f"unknown operator {op!r}")


def eval_formula(f: Term, env: Env, bounds: DomainBounds) -> bool:
    return bool(eval_term(f, env, bounds))


def exec_stmt(s: Stmt, state: StateValue, env: Env, bounds: DomainBounds | None = None,
              label: str = OP_STATE) -> StateValue:
    """Run an operation body; ``state`` is never mutated."""
    bounds = bounds or DomainBounds()
    if isinstance(s, Skip):
        return state
    if isinstance(s, Assign):
        return state.set(s.field, eval_term(s.value, env.with_state(label, state), bounds))
    if isinstance(s, Seq):
        mid = exec_stmt(s.first, state, env, bounds, label)
        return exec_stmt(s.second, mid, env, bounds, label)
    raise EvaluationError(f"unknown statement {s!r}")


def state_space(fields: tuple[tuple[str, Sort], ...], bounds: DomainBounds) -> Iterator[StateValue]:
    names = [n for n, _ in fields]
    for combo in itertools.product(*(list(domain(s, bounds)) for _, s in fields)):
        yield StateValue(dict(zip(names, combo)))
