"""Abstract syntax of the assertion and statement language.

Expressions and formulas share one tree type (:class:`Term`); formulas are
simply terms of sort ``bool``.  State-field reads carry a *state label* so the
same tree can talk about several states at once (``state1``, ``state1@1``,
the entry snapshot of an operation, ...).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator

# ---------------------------------------------------------------------------
# Sorts


class Sort:
    pass


@dataclass(frozen=True)
class IntSort(Sort):
    def __str__(self) -> str:
        return "int"


@dataclass(frozen=True)
class BoolSort(Sort):
    def __str__(self) -> str:
        return "bool"


@dataclass(frozen=True)
class PairSort(Sort):
    fst: Sort
    snd: Sort

    def __str__(self) -> str:
        return f"({self.fst}, {self.snd})"


@dataclass(frozen=True)
class SetSort(Sort):
    elem: Sort

    def __str__(self) -> str:
        return f"fset {_sort_atom(self.elem)}"


@dataclass(frozen=True)
class RWSetSort(Sort):
    """Remove-wins set: a pair of grow-only sets (adds, removes)."""
    elem: Sort

    def __str__(self) -> str:
        return f"remove_wins_set {_sort_atom(self.elem)}"


def _sort_atom(s: Sort) -> str:
    return f"({s})" if isinstance(s, (SetSort, RWSetSort)) else str(s)


INT = IntSort()
BOOL = BoolSort()


def is_element_sort(s: Sort) -> bool:
    """Sorts allowed as set elements: int or a pair of ints."""
    return s == INT or (isinstance(s, PairSort) and s.fst == INT and s.snd == INT)


# ---------------------------------------------------------------------------
# Terms

# Label used for bare field names inside the state invariant.
INV_STATE = ""
# Canonical label of an operation's state parameter.
OP_STATE = "state"


class Term:
    __slots__ = ()

    def __str__(self) -> str:
        return pretty(self)

    # Operator sugar used heavily by generators and tests.
    def __and__(self, other: Term) -> Term:
        return conj([self, other])

    def __or__(self, other: Term) -> Term:
        return App("or", (self, other))

    def __invert__(self) -> Term:
        return App("not", (self,))


@dataclass(frozen=True, repr=False)
class IntLit(Term):
    value: int

    def __repr__(self) -> str:
        return f"IntLit({self.value})"


@dataclass(frozen=True, repr=False)
class BoolLit(Term):
    value: bool

    def __repr__(self) -> str:
        return f"BoolLit({self.value})"


@dataclass(frozen=True, repr=False)
class Var(Term):
    name: str

    def __repr__(self) -> str:
        return f"Var({self.name!r})"


@dataclass(frozen=True, repr=False)
class Field(Term):
    """Read of ``name`` in the state labelled ``state``; ``old`` selects the entry snapshot."""
    state: str
    name: str
    old: bool = False

    def __repr__(self) -> str:
        return f"Field({self.state!r}, {self.name!r}{', old=True' if self.old else ''})"


@dataclass(frozen=True, repr=False)
class App(Term):
    op: str
    args: tuple[Term, ...] = ()
    # Only set for the polymorphic constants ``empty`` / ``rw_empty``.
    sort: Sort | None = field(default=None, compare=True)

    def __repr__(self) -> str:
        return f"App({self.op!r}, {self.args!r})"


@dataclass(frozen=True, repr=False)
class Quant(Term):
    kind: str  # "forall" | "exists"
    var: str
    sort: Sort
    body: Term

    def __repr__(self) -> str:
        return f"Quant({self.kind!r}, {self.var!r}, {self.sort}, {self.body!r})"


TRUE = BoolLit(True)
FALSE = BoolLit(False)

COMPARISONS = ("=", "<>", "<", "<=", ">", ">=")
CONNECTIVES = ("and", "or", "not", "implies", "iff")


def conj(items: Iterable[Term]) -> Term:
    items = list(items)
    if not items:
        return TRUE
    if len(items) == 1:
        return items[0]
    return App("and", tuple(items))


def disj(items: Iterable[Term]) -> Term:
    items = list(items)
    if not items:
        return FALSE
    if len(items) == 1:
        return items[0]
    return App("or", tuple(items))


def implies(a: Term, b: Term) -> Term:
    return App("implies", (a, b))


def eq(a: Term, b: Term) -> Term:
    return App("=", (a, b))


def neq(a: Term, b: Term) -> Term:
    return App("<>", (a, b))


def forall(var: str, sort: Sort, body: Term) -> Term:
    return Quant("forall", var, sort, body)


def exists(var: str, sort: Sort, body: Term) -> Term:
    return Quant("exists", var, sort, body)


# ---------------------------------------------------------------------------
# Statements


class Stmt:
    __slots__ = ()

    def __str__(self) -> str:
        return pretty_stmt(self)


@dataclass(frozen=True)
class Skip(Stmt):
    pass


@dataclass(frozen=True)
class Assign(Stmt):
    field: str
    value: Term


@dataclass(frozen=True)
class Seq(Stmt):
    first: Stmt
    second: Stmt


def seq(stmts: Iterable[Stmt]) -> Stmt:
    stmts = [s for s in stmts if not isinstance(s, Skip)]
    if not stmts:
        return Skip()
    out = stmts[-1]
    for s in reversed(stmts[:-1]):
        out = Seq(s, out)
    return out


def flatten_stmt(s: Stmt) -> list[Stmt]:
    if isinstance(s, Seq):
        return flatten_stmt(s.first) + flatten_stmt(s.second)
    if isinstance(s, Skip):
        return []
    return [s]


# ---------------------------------------------------------------------------
# Declarations


@dataclass(frozen=True)
class StateDecl:
    name: str
    fields: tuple[tuple[str, Sort], ...]
    invariant: Term = TRUE  # over Field(INV_STATE, ...)

    def field_sort(self, name: str) -> Sort | None:
        for n, s in self.fields:
            if n == name:
                return s
        return None

    @property
    def field_names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.fields)


@dataclass(frozen=True)
class OpDecl:
    name: str
    params: tuple[tuple[str, Sort], ...]
    requires: tuple[Term, ...] = ()
    ensures: tuple[Term, ...] = ()
    body: Stmt = Skip()

    @property
    def param_names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.params)

    @property
    def pre(self) -> Term:
        return conj(self.requires)


@dataclass(frozen=True)
class StateEq:
    """User equality predicate over two states labelled ``left`` and ``right``."""
    name: str
    left: str
    right: str
    body: Term


@dataclass(frozen=True)
class Spec:
    state: StateDecl
    ops: tuple[OpDecl, ...] = ()
    state_eq: StateEq | None = None

    def op(self, name: str) -> OpDecl:
        for o in self.ops:
            if o.name == name:
                return o
        raise KeyError(name)

    @property
    def op_names(self) -> tuple[str, ...]:
        return tuple(o.name for o in self.ops)


# ---------------------------------------------------------------------------
# Traversals


def children(t: Term) -> tuple[Term, ...]:
    if isinstance(t, App):
        return t.args
    if isinstance(t, Quant):
        return (t.body,)
    return ()


def subterms(t: Term) -> Iterator[Term]:
    yield t
    for c in children(t):
        yield from subterms(c)


def free_vars(t: Term) -> set[str]:
    if isinstance(t, Var):
        return {t.name}
    if isinstance(t, Quant):
        return free_vars(t.body) - {t.var}
    out: set[str] = set()
    for c in children(t):
        out |= free_vars(c)
    return out


def all_names(t: Term) -> set[str]:
    """Every variable name occurring in ``t``, bound or free."""
    out = set()
    for s in subterms(t):
        if isinstance(s, Var):
            out.add(s.name)
        elif isinstance(s, Quant):
            out.add(s.var)
    return out


def field_reads(t: Term) -> set[Field]:
    return {s for s in subterms(t) if isinstance(s, Field)}


def fresh_name(base: str, taken: set[str]) -> str:
    if base not in taken:
        return base
    for i in itertools.count(1):
        cand = f"{base}_{i}"
        if cand not in taken:
            return cand
    raise AssertionError("unreachable")


def substitute(t: Term, var_map: dict[str, Term] | None = None,
               field_map: dict[Field, Term] | None = None) -> Term:
    """Capture-avoiding simultaneous substitution of variables and field reads."""
    var_map = var_map or {}
    field_map = field_map or {}
    if not var_map and not field_map:
        return t
    incoming: set[str] = set()
    for r in itertools.chain(var_map.values(), field_map.values()):
        incoming |= free_vars(r)
    return _subst(t, var_map, field_map, incoming)


def _subst(t: Term, vm: dict[str, Term], fm: dict[Field, Term], incoming: set[str]) -> Term:
    if isinstance(t, Var):
        return vm.get(t.name, t)
    if isinstance(t, Field):
        return fm.get(t, t)
    if isinstance(t, App):
        if not t.args:
            return t
        return App(t.op, tuple(_subst(a, vm, fm, incoming) for a in t.args), t.sort)
    if isinstance(t, Quant):
        vm = {k: v for k, v in vm.items() if k != t.var}
        var, body = t.var, t.body
        if var in incoming:
            new = fresh_name(var, incoming | all_names(body) | set(vm))
            body = _subst(body, {var: Var(new)}, {}, {new})
            var = new
        return Quant(t.kind, var, t.sort, _subst(body, vm, fm, incoming))
    return t


def rename_states(t: Term, mapping: dict[tuple[str, bool], str]) -> Term:
    """Relabel field reads: ``(label, old) -> new label`` (the result is never ``old``)."""
    if isinstance(t, Field):
        key = (t.state, t.old)
        if key in mapping:
            return Field(mapping[key], t.name)
        return t
    if isinstance(t, App):
        if not t.args:
            return t
        return App(t.op, tuple(rename_states(a, mapping) for a in t.args), t.sort)
    if isinstance(t, Quant):
        return Quant(t.kind, t.var, t.sort, rename_states(t.body, mapping))
    return t


def map_terms_stmt(s: Stmt, fn: Callable[[Term], Term]) -> Stmt:
    if isinstance(s, Assign):
        return Assign(s.field, fn(s.value))
    if isinstance(s, Seq):
        return Seq(map_terms_stmt(s.first, fn), map_terms_stmt(s.second, fn))
    return s


def alpha_equal(a: Term, b: Term) -> bool:
    return _alpha(a, b, {}, {})


def _alpha(a: Term, b: Term, ma: dict[str, int], mb: dict[str, int]) -> bool:
    if type(a) is not type(b):
        return False
    if isinstance(a, Var):
        ia, ib = ma.get(a.name), mb.get(b.name)
        if ia is None and ib is None:
            return a.name == b.name
        return ia == ib
    if isinstance(a, Quant):
        if a.kind != b.kind or a.sort != b.sort:
            return False
        depth = len(ma) + 1
        return _alpha(a.body, b.body, {**ma, a.var: depth}, {**mb, b.var: depth})
    if isinstance(a, App):
        if a.op != b.op or len(a.args) != len(b.args):
            return False
        if a.sort is not None and b.sort is not None and a.sort != b.sort:
            return False
        return all(_alpha(x, y, ma, mb) for x, y in zip(a.args, b.args))
    return a == b


# ---------------------------------------------------------------------------
# Pretty printing (concrete DSL syntax)

_PREC = {"quant": 0, "implies": 1, "iff": 1, "or": 2, "and": 3, "not": 4,
         "cmp": 5, "arith": 6, "atom": 9}

_SYMBOL = {"and": "&&", "or": "||", "implies": "->", "iff": "<->",
           "+": "+", "-": "-", "seteq": "=="}

_CALLS = {"add", "remove", "mem", "is_empty", "fst", "snd",
          "add_element", "remove_element", "in_set", "equal"}


def _prec(t: Term) -> int:
    if isinstance(t, Quant):
        return _PREC["quant"]
    if isinstance(t, App):
        if t.op in ("implies", "iff"):
            return _PREC["implies"]
        if t.op in ("or", "and", "not"):
            return _PREC[t.op]
        if t.op in COMPARISONS or t.op == "seteq":
            return _PREC["cmp"]
        if t.op in ("+", "-"):
            return _PREC["arith"]
        if t.op == "neg":
            return _PREC["arith"]
    if isinstance(t, IntLit) and t.value < 0:
        return _PREC["arith"]
    return _PREC["atom"]


def pretty(t: Term, binder_sorts: bool = True) -> str:
    return _pp(t, binder_sorts)


def _wrap(t: Term, min_prec: int, bs: bool) -> str:
    s = _pp(t, bs)
    return f"({s})" if _prec(t) < min_prec else s


def _pp(t: Term, bs: bool) -> str:
    if isinstance(t, IntLit):
        return str(t.value)
    if isinstance(t, BoolLit):
        return "true" if t.value else "false"
    if isinstance(t, Var):
        return t.name
    if isinstance(t, Field):
        if t.state == INV_STATE and not t.old:
            return t.name
        if t.old:
            return f"(old {t.state}).{t.name}"
        return f"{t.state}.{t.name}"
    if isinstance(t, Quant):
        binders = []
        cur: Term = t
        while isinstance(cur, Quant) and cur.kind == t.kind:
            binders.append(f"{cur.var}: {cur.sort}" if bs else cur.var)
            cur = cur.body
        return f"{t.kind} {', '.join(binders)}. {_pp(cur, bs)}"
    assert isinstance(t, App), t
    op, args = t.op, t.args
    if op == "empty":
        return "empty"
    if op == "rw_empty":
        return "empty_set ()"
    if op == "pair":
        return f"({_pp(args[0], bs)}, {_pp(args[1], bs)})"
    if op in ("rw_adds", "rw_removes"):
        fld = "remove_wins_add" if op == "rw_adds" else "remove_wins_removes"
        return f"{_wrap(args[0], _PREC['atom'], bs)}.{fld}"
    if op in _CALLS:
        return f"{op}({', '.join(_pp(a, bs) for a in args)})"
    if op == "not":
        return f"not {_wrap(args[0], _PREC['not'], bs)}"
    if op == "neg":
        return f"-{_wrap(args[0], _PREC['atom'], bs)}"
    if op in ("and", "or"):
        p = _PREC[op]
        sym = f" {_SYMBOL[op]} "
        parts = [_wrap(a, p + 1, bs) for a in args[:-1]]
        # a trailing quantifier may stay unparenthesised: it extends to the end
        last = args[-1]
        parts.append(_pp(last, bs) if isinstance(last, Quant) else _wrap(last, p + 1, bs))
        return sym.join(parts)
    if op in ("implies", "iff"):
        lhs = _wrap(args[0], _PREC["implies"] + 1, bs)
        rhs_t = args[1]
        # right associative; iff and implies share a level
        if isinstance(rhs_t, Quant) or (isinstance(rhs_t, App) and rhs_t.op in ("implies", "iff")):
            rhs = _pp(rhs_t, bs)
        else:
            rhs = _wrap(rhs_t, _PREC["implies"] + 1, bs)
        return f"{lhs} {_SYMBOL[op]} {rhs}"
    if op in COMPARISONS or op == "seteq":
        sym = _SYMBOL.get(op, op)
        return f"{_wrap(args[0], _PREC['cmp'] + 1, bs)} {sym} {_wrap(args[1], _PREC['cmp'] + 1, bs)}"
    if op in ("+", "-"):
        return f"{_wrap(args[0], _PREC['arith'], bs)} {op} {_wrap(args[1], _PREC['arith'] + 1, bs)}"
    raise ValueError(f"cannot print operator {op!r}")


def pretty_stmt(s: Stmt, state: str = OP_STATE, indent: str = "") -> str:
    parts = flatten_stmt(s)
    if not parts:
        return f"{indent}()"
    lines = []
    for p in parts:
        assert isinstance(p, Assign)
        lines.append(f"{indent}{state}.{p.field} <- {pretty(p.value)}")
    return ";\n".join(lines)


def pretty_spec(spec: Spec) -> str:
    st = spec.state
    out = [f"type {st.name} [@state] = {{"]
    for name, sort in st.fields:
        out.append(f"  mutable {name} : {sort};")
    out.append(f"}} invariant {{ {pretty(st.invariant)} }}")
    for op in spec.ops:
        out.append("")
        params = " ".join(f"({n} : {s})" for n, s in op.params)
        out.append(f"let ghost {op.name} {params} ({OP_STATE} : {st.name}) : unit".replace("  ", " "))
        for r in op.requires:
            out.append(f"  requires {{ {pretty(r)} }}")
        for e in op.ensures:
            out.append(f"  ensures {{ {pretty(e)} }}")
        out.append("=")
        out.append(pretty_stmt(op.body, indent="  "))
    if spec.state_eq is not None:
        q = spec.state_eq
        out.append("")
        out.append(f"predicate {q.name} [@state_eq] ({q.left} {q.right} : {st.name}) =")
        out.append(f"  {pretty(q.body)}")
    return "\n".join(out) + "\n"
