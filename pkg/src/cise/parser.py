"""Parser for ``.cise`` specification files.

The surface syntax follows the WhyML-like listings it is meant to transcribe::

    type state [@state] = {
      mutable courses : fset int;
    } invariant { forall c. mem c courses -> c > 0 }

    let ghost addCourse (course : int) (state : state) : unit
      requires { course > 0 }
      ensures  { state.courses = add course (old state).courses }
    = state.courses <- add course state.courses

    predicate eq [@state_eq] (s1 s2 : state) = s1.courses == s2.courses

Application is curried (``mem x s``) but ``f(a, b)`` / ``f (a, b)`` are accepted
for builtins of arity two or more.  Comments are ``(* ... *)`` and nest.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

from .terms import (BOOL, INT, INV_STATE, OP_STATE, App, Assign, BoolLit, Field, IntLit,
                    OpDecl, PairSort, Quant, RWSetSort, SetSort, Skip, Sort, Spec, StateDecl,
                    StateEq, Stmt, Term, Var, conj, seq)
from .typecheck import Diagnostic, SourceSpan, elaborate_spec


class ParseError(ValueError):
    def __init__(self, message: str, span: SourceSpan | None = None) -> None:
        self.message = message
        self.span = span
        super().__init__(f"{span}: {message}" if span else message)


class SpecError(ValueError):
    """Raised when a spec parses but does not typecheck."""

    def __init__(self, diagnostics: list[Diagnostic]) -> None:
        self.diagnostics = diagnostics
        super().__init__("\n".join(str(d) for d in diagnostics))


# ---------------------------------------------------------------------------
# Lexer


@dataclass(frozen=True)
class Tok:
    kind: str  # INT, IDENT, ATTR, SYM, EOF
    text: str
    line: int
    col: int


_SYMBOLS = ["<->", "<-", "->", "/\\", "\\/", "&&", "||", "==", "<>", "<=", ">=",
            "(", ")", "{", "}", ",", ";", ":", ".", "=", "<", ">", "+", "-", "*"]
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_']*")
_INT = re.compile(r"[0-9]+")
_ATTR = re.compile(r"\[@([^\]]*)\]")

KEYWORDS = {"type", "mutable", "invariant", "let", "ghost", "requires", "ensures", "writes",
            "predicate", "forall", "exists", "not", "true", "false", "old", "empty",
            "unit", "skip", "begin", "end"}


def tokenize(text: str, filename: str = "<input>") -> list[Tok]:
    toks: list[Tok] = []
    i, line, col = 0, 1, 1
    n = len(text)

    def advance(k: int) -> None:
        nonlocal i, line, col
        for ch in text[i:i + k]:
            if ch == "\n":
                line += 1
                col = 1
            else:
                col += 1
        i += k

    while i < n:
        ch = text[i]
        if ch in " \t\r\n":
            advance(1)
            continue
        if text.startswith("(*", i):
            start = (line, col)
            depth = 0
            while True:
                if i >= n:
                    raise ParseError("unterminated comment", SourceSpan(filename, *start, 2))
                if text.startswith("(*", i):
                    depth += 1
                    advance(2)
                elif text.startswith("*)", i):
                    depth -= 1
                    advance(2)
                    if depth == 0:
                        break
                else:
                    advance(1)
            continue
        m = _ATTR.match(text, i)
        if m:
            toks.append(Tok("ATTR", m.group(1).strip(), line, col))
            advance(m.end() - i)
            continue
        m = _IDENT.match(text, i)
        if m:
            toks.append(Tok("IDENT", m.group(0), line, col))
            advance(m.end() - i)
            continue
        m = _INT.match(text, i)
        if m:
            toks.append(Tok("INT", m.group(0), line, col))
            advance(m.end() - i)
            continue
        for sym in _SYMBOLS:
            if text.startswith(sym, i):
                toks.append(Tok("SYM", sym, line, col))
                advance(len(sym))
                break
        else:
            raise ParseError(f"unexpected character {ch!r}", SourceSpan(filename, line, col))
    toks.append(Tok("EOF", "", line, col))
    return toks


# ---------------------------------------------------------------------------
# Raw syntax (before name resolution)


@dataclass
class R:
    span: SourceSpan = field(repr=False)


@dataclass
class RInt(R):
    value: int


@dataclass
class RBool(R):
    value: bool


@dataclass
class RName(R):
    name: str


@dataclass
class RTuple(R):
    items: list


@dataclass
class RUnit(R):
    pass


@dataclass
class REmpty(R):
    pass


@dataclass
class RApp(R):
    head: str
    args: list


@dataclass
class RDot(R):
    obj: R
    name: str


@dataclass
class ROld(R):
    obj: R


@dataclass
class RUn(R):
    op: str
    arg: R


@dataclass
class RBin(R):
    op: str
    args: list


@dataclass
class RQuant(R):
    kind: str
    binders: list  # [(name, Sort | None)]
    body: R


@dataclass
class RAssign(R):
    target: R
    value: R


@dataclass
class RProc(R):
    call: RApp


@dataclass
class RSkip(R):
    pass


@dataclass
class ROp:
    name: str
    params: list  # [(name, sort-or-typename, span)]
    requires: list
    ensures: list
    body: list
    span: SourceSpan
    clause_spans: dict = field(default_factory=dict)


# builtins: name -> (operator, arity)
BUILTINS = {
    "add": ("add", 2), "remove": ("remove", 2), "mem": ("mem", 2),
    "is_empty": ("is_empty", 1), "fst": ("fst", 1), "snd": ("snd", 1),
    "add_element": ("add_element", 2), "remove_element": ("remove_element", 2),
    "in_set": ("in_set", 2), "equal": ("equal", 2), "empty_set": ("rw_empty", 1),
}
_RW_FIELDS = {"remove_wins_add": "rw_adds", "remove_wins_removes": "rw_removes"}
_BINOPS = {"/\\": "and", "&&": "and", "\\/": "or", "||": "or", "->": "implies",
           "<->": "iff", "=": "=", "<>": "<>", "<": "<", "<=": "<=", ">": ">",
           ">=": ">=", "==": "seteq", "+": "+", "-": "-"}
_CMP = {"=", "<>", "<", "<=", ">", ">=", "=="}


class _Parser:
    def __init__(self, text: str, filename: str) -> None:
        self.filename = filename
        self.toks = tokenize(text, filename)
        self.pos = 0

    # -- token helpers ------------------------------------------------------
    @property
    def tok(self) -> Tok:
        return self.toks[self.pos]

    def peek(self, k: int = 1) -> Tok:
        return self.toks[min(self.pos + k, len(self.toks) - 1)]

    def span(self, t: Tok | None = None) -> SourceSpan:
        t = t or self.tok
        return SourceSpan(self.filename, t.line, t.col, max(1, len(t.text)))

    def error(self, msg: str, t: Tok | None = None) -> ParseError:
        return ParseError(msg, self.span(t))

    def at(self, *texts: str) -> bool:
        t = self.tok
        return t.kind in ("SYM", "IDENT") and t.text in texts

    def accept(self, text: str) -> Tok | None:
        if self.at(text):
            t = self.tok
            self.pos += 1
            return t
        return None

    def expect(self, text: str) -> Tok:
        t = self.accept(text)
        if t is None:
            found = self.tok.text or "end of input"
            raise self.error(f"expected '{text}', found '{found}'")
        return t

    def ident(self, what: str = "identifier") -> Tok:
        t = self.tok
        if t.kind != "IDENT" or t.text in KEYWORDS:
            found = t.text or "end of input"
            raise self.error(f"expected {what}, found '{found}'")
        self.pos += 1
        return t

    def attrs(self) -> list[str]:
        out = []
        while self.tok.kind == "ATTR":
            out.append(self.tok.text)
            self.pos += 1
        return out

    # -- sorts --------------------------------------------------------------
    def sort(self) -> Sort | str:
        if self.accept("fset"):
            return SetSort(self._sort_atom())
        if self.accept("remove_wins_set"):
            return RWSetSort(self._sort_atom())
        return self._sort_atom()

    def _sort_atom(self) -> Sort | str:
        if self.accept("int"):
            return INT
        if self.accept("bool"):
            return BOOL
        if self.accept("("):
            a = self.sort()
            if self.accept(","):
                b = self.sort()
                self.expect(")")
                if isinstance(a, str) or isinstance(b, str):
                    raise self.error("pair components must be value sorts")
                return PairSort(a, b)
            self.expect(")")
            return a
        t = self.tok
        if t.kind == "IDENT" and t.text not in KEYWORDS:
            self.pos += 1
            return t.text  # a named type, e.g. the state type
        raise self.error(f"expected a sort, found '{t.text or 'end of input'}'")

    def value_sort(self) -> Sort:
        t = self.tok
        s = self.sort()
        if isinstance(s, str):
            raise self.error(f"unknown sort '{s}'", t)
        return s

    # -- declarations -------------------------------------------------------
    def parse_file(self):
        states = []
        ops: list[ROp] = []
        preds = []
        while self.tok.kind != "EOF":
            t = self.tok
            if self.at("type"):
                states.append(self.type_decl())
            elif self.at("let"):
                self.pos += 1
                self.accept("ghost")
                ops.append(self.op_decl())
            elif self.at("predicate"):
                preds.append(self.predicate())
            elif t.kind == "IDENT" and t.text not in KEYWORDS and self.peek().text == "(":
                ops.append(self.op_decl())
            else:
                raise self.error(f"expected a declaration, found '{t.text}'")
        return states, ops, preds

    def type_decl(self):
        start = self.expect("type")
        name = self.ident("type name").text
        attrs = self.attrs()
        self.expect("=")
        self.expect("{")
        fields = []
        while not self.at("}"):
            self.accept("mutable")
            ft = self.ident("field name")
            self.expect(":")
            fs = self.value_sort()
            fields.append((ft.text, fs, self.span(ft)))
            if not self.accept(";"):
                break
        self.expect("}")
        invariants = []
        inv_span = None
        while self.at("invariant"):
            it = self.expect("invariant")
            inv_span = inv_span or self.span(it)
            self.expect("{")
            invariants.append(self.formula())
            self.expect("}")
        return dict(name=name, attrs=attrs, fields=fields, invariants=invariants,
                    span=self.span(start), inv_span=inv_span)

    def op_decl(self) -> ROp:
        nt = self.ident("operation name")
        params = self.params()
        if self.accept(":"):
            if not self.accept("unit"):
                self.sort()
        op = ROp(nt.text, params, [], [], [], self.span(nt))
        while True:
            if self.at("requires"):
                t = self.expect("requires")
                op.clause_spans[f"requires #{len(op.requires) + 1}"] = self.span(t)
                self.expect("{")
                op.requires.append(self.formula())
                self.expect("}")
            elif self.at("ensures"):
                t = self.expect("ensures")
                op.clause_spans[f"ensures #{len(op.ensures) + 1}"] = self.span(t)
                self.expect("{")
                op.ensures.append(self.formula())
                self.expect("}")
            elif self.at("writes"):
                self.expect("writes")
                self.expect("{")
                while not self.at("}"):
                    if self.tok.kind == "EOF":
                        raise self.error("unterminated writes clause")
                    self.pos += 1
                self.expect("}")
            else:
                break
        bt = self.expect("=")
        op.clause_spans["body"] = self.span(bt)
        op.body = self.stmts()
        return op

    def params(self) -> list:
        params = []
        while self.at("("):
            self.expect("(")
            if self.accept(")"):
                continue  # unit parameter
            names = [self.ident("parameter name")]
            while self.tok.kind == "IDENT" and self.tok.text not in KEYWORDS:
                names.append(self.ident())
            self.expect(":")
            s = self.sort()
            self.expect(")")
            for n in names:
                params.append((n.text, s, self.span(n)))
        return params

    def predicate(self):
        start = self.expect("predicate")
        name = self.ident("predicate name").text
        attrs = self.attrs()
        params = self.params()
        self.expect("=")
        body = self.formula()
        return dict(name=name, attrs=attrs, params=params, body=body, span=self.span(start))

    # -- statements ---------------------------------------------------------
    def _decl_boundary(self) -> bool:
        t = self.tok
        if t.kind == "EOF" or self.at("type", "let", "predicate"):
            return True
        return t.col == 1 and t.kind == "IDENT"

    def stmts(self) -> list:
        out = [self.stmt()]
        while self.accept(";"):
            if self._decl_boundary() or self.at("end", ")"):
                break
            out.append(self.stmt())
        return out

    def stmt(self):
        t = self.tok
        if self.accept("skip"):
            return RSkip(self.span(t))
        if self.accept("begin"):
            body = self.stmts()
            self.expect("end")
            return body
        if self.at("(") and self.peek().text == ")":
            self.pos += 2
            return RSkip(self.span(t))
        lhs = self.arith()
        if self.accept("<-"):
            return RAssign(self.span(t), lhs, self.formula())
        if isinstance(lhs, RApp) and lhs.head in ("add_element", "remove_element"):
            return RProc(self.span(t), lhs)
        raise self.error("expected an assignment 'state.field <- expr'", t)

    # -- formulas and expressions ------------------------------------------
    def formula(self) -> R:
        if self.at("forall", "exists"):
            return self.quant()
        lhs = self.disj()
        if self.at("->", "<->"):
            t = self.tok
            self.pos += 1
            rhs = self.formula()
            return RBin(self.span(t), _BINOPS[t.text], [lhs, rhs])
        return lhs

    def quant(self) -> R:
        kt = self.tok
        self.pos += 1
        binders = []
        while True:
            group = [self.ident("bound variable").text]
            while self.tok.kind == "IDENT" and self.tok.text not in KEYWORDS:
                group.append(self.ident().text)
            sort = None
            if self.accept(":"):
                sort = self.value_sort()
            binders.extend((g, sort) for g in group)
            if not self.accept(","):
                break
        self.expect(".")
        return RQuant(self.span(kt), kt.text, binders, self.formula())

    def _chain(self, sub, ops: tuple[str, ...], name: str) -> R:
        first = self.tok
        items = [sub()]
        while self.at(*ops):
            self.pos += 1
            if self.at("forall", "exists"):
                items.append(self.quant())
                break
            items.append(sub())
        if len(items) == 1:
            return items[0]
        return RBin(self.span(first), name, items)

    def disj(self) -> R:
        return self._chain(self.conj, ("\\/", "||"), "or")

    def conj(self) -> R:
        return self._chain(self.negation, ("/\\", "&&"), "and")

    def negation(self) -> R:
        t = self.tok
        if self.accept("not"):
            return RUn(self.span(t), "not", self.negation())
        if self.at("forall", "exists"):
            return self.quant()
        return self.comparison()

    def comparison(self) -> R:
        lhs = self.arith()
        if self.tok.kind == "SYM" and self.tok.text in _CMP:
            t = self.tok
            self.pos += 1
            rhs = self.arith()
            return RBin(self.span(t), _BINOPS[t.text], [lhs, rhs])
        return lhs

    def arith(self) -> R:
        lhs = self.application()
        while self.at("+", "-"):
            t = self.tok
            self.pos += 1
            rhs = self.application()
            lhs = RBin(self.span(t), t.text, [lhs, rhs])
        return lhs

    def _atom_start(self) -> bool:
        t = self.tok
        if t.col == 1 and t.kind == "IDENT":
            return False  # a new top-level declaration
        if t.kind == "INT":
            return True
        if t.kind == "IDENT":
            return t.text not in KEYWORDS or t.text in ("true", "false", "empty", "old")
        return t.kind == "SYM" and t.text == "("

    def application(self) -> R:
        t = self.tok
        if self.at("old"):
            self.pos += 1
            return ROld(self.span(t), self.postfix())
        if t.kind == "SYM" and t.text == "-" and self.peek().kind == "INT":
            self.pos += 2
            return RInt(self.span(t), -int(self.toks[self.pos - 1].text))
        if t.kind == "IDENT" and t.text not in KEYWORDS:
            nxt = self.peek()
            if nxt.text != "." and self._starts_arg(nxt):
                self.pos += 1
                limit = BUILTINS[t.text][1] if t.text in BUILTINS else None
                args = []
                while self._atom_start() and (limit is None or len(args) < limit):
                    args.append(self.postfix())
                return RApp(self.span(t), t.text, args)
        return self.postfix()

    def _starts_arg(self, t: Tok) -> bool:
        if t.col == 1 and t.kind == "IDENT":
            return False
        if t.kind == "INT":
            return True
        if t.kind == "IDENT":
            return t.text not in KEYWORDS or t.text in ("true", "false", "empty", "old")
        return t.kind == "SYM" and t.text == "("

    def postfix(self) -> R:
        obj = self.atom()
        while self.at(".") and self.peek().kind == "IDENT":
            t = self.expect(".")
            name = self.ident("field name").text
            obj = RDot(self.span(t), obj, name)
        return obj

    def atom(self) -> R:
        t = self.tok
        sp = self.span(t)
        if t.kind == "INT":
            self.pos += 1
            return RInt(sp, int(t.text))
        if self.accept("true"):
            return RBool(sp, True)
        if self.accept("false"):
            return RBool(sp, False)
        if self.accept("empty"):
            return REmpty(sp)
        if self.accept("old"):
            return ROld(sp, self.postfix())
        if self.accept("("):
            if self.accept(")"):
                return RUnit(sp)
            items = [self.formula()]
            while self.accept(","):
                items.append(self.formula())
            self.expect(")")
            return items[0] if len(items) == 1 else RTuple(sp, items)
        if t.kind == "IDENT" and t.text not in KEYWORDS:
            self.pos += 1
            return RName(sp, t.text)
        raise self.error(f"unexpected '{t.text or 'end of input'}'")


# ---------------------------------------------------------------------------
# Name resolution: raw syntax -> terms


@dataclass(frozen=True)
class _StateRef:
    label: str
    old: bool


class _Resolver:
    def __init__(self, states: dict[str, str], fields: set[str], bare_fields: bool) -> None:
        # states: surface name -> canonical label
        self.states = states
        self.fields = fields
        self.bare_fields = bare_fields

    def term(self, r: R, bound: frozenset = frozenset(), old: bool = False) -> Term:
        out = self._term(r, bound, old)
        if isinstance(out, _StateRef):
            raise ParseError("a state cannot be used as a value; select a field", r.span)
        return out

    def _term(self, r: R, bound: frozenset, old: bool):
        if isinstance(r, RInt):
            return IntLit(r.value)
        if isinstance(r, RBool):
            return BoolLit(r.value)
        if isinstance(r, REmpty):
            return App("empty", ())
        if isinstance(r, RName):
            if r.name in bound:
                return Var(r.name)
            if r.name in self.states:
                return _StateRef(self.states[r.name], old)
            if self.bare_fields and r.name in self.fields:
                return Field(INV_STATE, r.name, old)
            if r.name in BUILTINS:
                raise ParseError(f"'{r.name}' expects arguments", r.span)
            return Var(r.name)
        if isinstance(r, ROld):
            return self._term(r.obj, bound, True)
        if isinstance(r, RDot):
            obj = self._term(r.obj, bound, old)
            if isinstance(obj, _StateRef):
                return Field(obj.label, r.name, obj.old)
            if r.name in _RW_FIELDS:
                return App(_RW_FIELDS[r.name], (obj,))
            raise ParseError(f"cannot select field '{r.name}' here", r.span)
        if isinstance(r, RTuple):
            if len(r.items) != 2:
                raise ParseError("only pairs are supported", r.span)
            return App("pair", tuple(self.term(x, bound, old) for x in r.items))
        if isinstance(r, RUnit):
            raise ParseError("'()' is not a value", r.span)
        if isinstance(r, RUn):
            return App(r.op, (self.term(r.arg, bound, old),))
        if isinstance(r, RBin):
            return App(r.op, tuple(self.term(a, bound, old) for a in r.args))
        if isinstance(r, RQuant):
            body = self.term(r.body, bound | {n for n, _ in r.binders}, old)
            for name, sort in reversed(r.binders):
                body = Quant(r.kind, name, sort, body)  # sort may be None: inferred later
            return body
        if isinstance(r, RApp):
            return self._app(r, bound, old)
        raise ParseError("unexpected construct", r.span)

    def _app(self, r: RApp, bound: frozenset, old: bool):
        if r.head in BUILTINS:
            op, arity = BUILTINS[r.head]
            args = r.args
            if op == "rw_empty":
                if len(args) == 1 and isinstance(args[0], RUnit):
                    return App("rw_empty", ())
                raise ParseError("empty_set takes '()'", r.span)
            if len(args) == 1 and arity >= 2 and isinstance(args[0], RTuple) \
                    and len(args[0].items) == arity:
                args = args[0].items  # call syntax f(a, b)
            if len(args) != arity:
                raise ParseError(f"'{r.head}' expects {arity} argument(s), got {len(args)}", r.span)
            return App(op, tuple(self.term(a, bound, old) for a in args))
        if r.head in self.fields and len(r.args) == 1:
            obj = self._term(r.args[0], bound, old)
            if isinstance(obj, _StateRef):
                return Field(obj.label, r.head, obj.old)  # projection: 'courses state1'
        raise ParseError(f"unknown function '{r.head}'", r.span)

    def stmts(self, items: list) -> Stmt:
        out = []
        for it in items:
            if isinstance(it, list):
                out.append(self.stmts(it))
            else:
                out.append(self.stmt(it))
        return seq(out)

    def stmt(self, r) -> Stmt:
        if isinstance(r, RSkip):
            return Skip()
        if isinstance(r, RAssign):
            target = self._term(r.target, frozenset(), False)
            if not (isinstance(target, Field) and target.state == OP_STATE and not target.old):
                raise ParseError("assignment target must be a field of the state parameter",
                                 r.target.span)
            return Assign(target.name, self.term(r.value))
        if isinstance(r, RProc):
            call = r.call
            if len(call.args) != 2:
                raise ParseError(f"'{call.head}' expects 2 arguments", call.span)
            target = self._term(call.args[1], frozenset(), False)
            if not (isinstance(target, Field) and target.state == OP_STATE):
                raise ParseError(f"'{call.head}' must update a field of the state parameter",
                                 call.args[1].span)
            return Assign(target.name, App(call.head, (self.term(call.args[0]), target)))
        raise ParseError("unexpected statement", getattr(r, "span", None))


# ---------------------------------------------------------------------------
# Entry points


def parse_spec_unchecked(text: str, filename: str = "<input>") -> tuple[Spec, dict[str, SourceSpan]]:
    p = _Parser(text, filename)
    states, rops, preds = p.parse_file()
    end = SourceSpan(filename, p.tok.line, p.tok.col)
    tagged = [s for s in states if "state" in s["attrs"]]
    if not tagged:
        raise ParseError("no [@state] type declared", end)
    if len(tagged) > 1:
        raise ParseError("multiple [@state] types declared", tagged[1]["span"])
    sd = tagged[0]
    fields = {n for n, _, _ in sd["fields"]}
    spans: dict[str, SourceSpan] = {"state": sd["span"]}
    inv_res = _Resolver({}, fields, bare_fields=True)
    invariant = conj(inv_res.term(r) for r in sd["invariants"])
    if sd["inv_span"]:
        spans["invariant"] = sd["inv_span"]
    state = StateDecl(sd["name"], tuple((n, s) for n, s, _ in sd["fields"]), invariant)

    ops = []
    for rop in rops:
        state_params = [(n, sp) for n, s, sp in rop.params if s == state.name]
        if not state_params:
            raise ParseError(f"operation '{rop.name}' has no parameter of state type '{state.name}'",
                             rop.span)
        if len(state_params) > 1:
            raise ParseError(f"operation '{rop.name}' takes more than one state", state_params[1][1])
        params = []
        for n, s, sp in rop.params:
            if s == state.name:
                continue
            if isinstance(s, str):
                raise ParseError(f"unknown sort '{s}'", sp)
            params.append((n, s))
        res = _Resolver({state_params[0][0]: OP_STATE}, fields, bare_fields=False)
        requires = tuple(res.term(r) for r in rop.requires)
        ensures = tuple(res.term(r) for r in rop.ensures)
        body = res.stmts(rop.body)
        ops.append(OpDecl(rop.name, tuple(params), requires, ensures, body))
        spans[f"operation {rop.name}"] = rop.span
        for k, v in rop.clause_spans.items():
            spans[f"{rop.name} {k}"] = v

    state_eq = None
    for pd in preds:
        if "state_eq" not in pd["attrs"]:
            raise ParseError(f"predicate '{pd['name']}': only [@state_eq] predicates are supported",
                             pd["span"])
        if state_eq is not None:
            raise ParseError("multiple [@state_eq] predicates declared", pd["span"])
        ps = pd["params"]
        if len(ps) != 2 or any(s != state.name for _, s, _ in ps):
            raise ParseError(f"[@state_eq] predicate must take two '{state.name}' parameters",
                             pd["span"])
        (l, _, _), (r, _, _) = ps
        res = _Resolver({l: l, r: r}, fields, bare_fields=False)
        state_eq = StateEq(pd["name"], l, r, res.term(pd["body"]))
        spans["state_eq"] = pd["span"]
    return Spec(state, tuple(ops), state_eq), spans


def parse_spec(text: str, filename: str = "<input>") -> Spec:
    """Parse and typecheck a specification; raises ParseError or SpecError."""
    raw, spans = parse_spec_unchecked(text, filename)
    spec, diags = elaborate_spec(raw, spans)
    if diags:
        raise SpecError(diags)
    return spec


def parse_formula(text: str, state_labels: dict[str, str] | None = None,
                  fields: set[str] | None = None, bound: set[str] | None = None) -> Term:
    """Parse a standalone formula (sorts are not inferred; see typecheck.elaborate_formula)."""
    p = _Parser(text, "<formula>")
    r = p.formula()
    if p.tok.kind != "EOF":
        raise p.error(f"unexpected '{p.tok.text}' after formula")
    res = _Resolver(state_labels or {}, fields or set(), bare_fields=bool(fields))
    return res.term(r, frozenset(bound or ()))


def parse_stmt(text: str, state_param: str = "state") -> Stmt:
    p = _Parser(text, "<stmt>")
    items = p.stmts()
    if p.tok.kind != "EOF":
        raise p.error(f"unexpected '{p.tok.text}' after statement")
    return _Resolver({state_param: OP_STATE}, set(), bare_fields=False).stmts(items)
