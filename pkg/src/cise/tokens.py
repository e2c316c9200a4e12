"""Token systems: which operations (or operation arguments) must synchronise.

File format, one declaration per line (``;`` also separates)::

    token enroll t1            (* token <op> <tok>+ *)
    argtoken remCourse course t2
    t1 conflicts t2

Declarations come first, then conflicts.  Each token is declared exactly once
and a conflict may only mention tokens declared above it.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

from .parser import ParseError
from .terms import Spec
from .typecheck import SourceSpan

_ID = re.compile(r"[A-Za-z][A-Za-z0-9_]*\Z")
_RESERVED = {"token", "argtoken", "conflicts"}


class TokenError(ParseError):
    """A token file that violates the grammar or its declaration rules."""

    def __init__(self, kind: str, message: str, span: SourceSpan | None = None) -> None:
        self.kind = kind
        super().__init__(message, span)


@dataclass(frozen=True)
class TokenSystem:
    op_tokens: tuple[tuple[str, str], ...] = ()
    arg_tokens: tuple[tuple[str, str, str], ...] = ()
    conflicts: frozenset[frozenset[str]] = frozenset()

    def conflicting(self, a: str, b: str) -> bool:
        return frozenset((a, b)) in self.conflicts

    def tokens_of(self, op: str) -> list[str]:
        return [t for o, t in self.op_tokens if o == op]

    def arg_tokens_of(self, op: str) -> list[tuple[str, str]]:
        return [(a, t) for o, a, t in self.arg_tokens if o == op]

    def _any_token_of(self, op: str) -> list[str]:
        return self.tokens_of(op) + [t for _, t in self.arg_tokens_of(op)]

    def ops_exclusive(self, f: str, g: str) -> bool:
        """True when f and g may never run concurrently.

        That is the case when an op-level token of one conflicts with any token
        of the other: an op-level token is held on every invocation.
        """
        for t in self.tokens_of(f):
            if any(self.conflicting(t, u) for u in self._any_token_of(g)):
                return True
        for t in self.tokens_of(g):
            if any(self.conflicting(t, u) for u in self._any_token_of(f)):
                return True
        return False

    def arg_conflicts(self, f: str, g: str) -> list[tuple[str, str]]:
        """(arg of f, arg of g) pairs whose tokens conflict."""
        out = []
        for a, ta in self.arg_tokens_of(f):
            for b, tb in self.arg_tokens_of(g):
                if self.conflicting(ta, tb) and (a, b) not in out:
                    out.append((a, b))
        return out

    def format(self) -> str:
        lines = []
        by_op: dict[str, list[str]] = {}
        for o, t in self.op_tokens:
            by_op.setdefault(o, []).append(t)
        for o, ts in by_op.items():
            lines.append(f"token {o} {' '.join(ts)}")
        for o, a, t in self.arg_tokens:
            lines.append(f"argtoken {o} {a} {t}")
        for pair in sorted(sorted(p) for p in self.conflicts):
            a, b = (pair[0], pair[0]) if len(pair) == 1 else pair
            lines.append(f"{a} conflicts {b}")
        return "\n".join(lines) + "\n"


@dataclass
class _Line:
    words: list[str]
    span: SourceSpan
    cols: list[int] = field(default_factory=list)


def _strip_comments(text: str, filename: str) -> str:
    out = []
    depth = 0
    i = 0
    line = 1
    while i < len(text):
        if text.startswith("(*", i):
            depth += 1
            out.append("  ")
            i += 2
        elif depth and text.startswith("*)", i):
            depth -= 1
            out.append("  ")
            i += 2
        else:
            ch = text[i]
            if ch == "\n":
                line += 1
            out.append(ch if (not depth or ch == "\n") else " ")
            i += 1
    if depth:
        raise TokenError("syntax", "unterminated comment", SourceSpan(filename, line, 1))
    return "".join(out)


def _lines(text: str, filename: str) -> list[_Line]:
    text = _strip_comments(text, filename)
    out = []
    for lineno, raw in enumerate(text.split("\n"), 1):
        offset = 0
        for chunk in raw.split(";"):
            words, cols = [], []
            for m in re.finditer(r"\S+", chunk):
                words.append(m.group(0))
                cols.append(offset + m.start() + 1)
            if words:
                out.append(_Line(words, SourceSpan(filename, lineno, cols[0], len(chunk.strip())), cols))
            offset += len(chunk) + 1
    return out


def parse_tokens(text: str, spec: Spec, filename: str = "<tokens>") -> TokenSystem:
    lines = _lines(text, filename)
    if not lines:
        raise TokenError("syntax", "empty token system: declare at least one token",
                         SourceSpan(filename, 1, 1))

    def word_span(ln: _Line, k: int) -> SourceSpan:
        return SourceSpan(filename, ln.span.line, ln.cols[k], len(ln.words[k]))

    def check_id(ln: _Line, k: int, what: str) -> str:
        w = ln.words[k]
        if not _ID.match(w) or w in _RESERVED:
            raise TokenError("syntax", f"invalid {what} '{w}'", word_span(ln, k))
        return w

    # first pass: classify lines and record where each token is declared
    decl_line: dict[str, int] = {}
    for idx, ln in enumerate(lines):
        w = ln.words
        if w[0] == "token" and len(w) >= 3:
            for k in range(2, len(w)):
                decl_line.setdefault(w[k], idx)
        elif w[0] == "argtoken" and len(w) == 4:
            decl_line.setdefault(w[3], idx)

    ops = {o.name: o for o in spec.ops}
    op_tokens: list[tuple[str, str]] = []
    arg_tokens: list[tuple[str, str, str]] = []
    conflicts: set[frozenset[str]] = set()
    declared: set[str] = set()
    seen_conflict = False

    for idx, ln in enumerate(lines):
        w = ln.words
        if w[0] == "token":
            if len(w) < 3:
                raise TokenError("syntax", "expected 'token <operation> <token>+'", ln.span)
            if seen_conflict:
                raise TokenError("syntax", "token declarations must precede conflicts", ln.span)
            op = check_id(ln, 1, "operation name")
            if op not in ops:
                raise TokenError("unknown-operation", f"unknown operation '{op}'", word_span(ln, 1))
            for k in range(2, len(w)):
                tok = check_id(ln, k, "token name")
                if tok in declared:
                    raise TokenError("duplicate-token", f"token '{tok}' is declared more than once",
                                     word_span(ln, k))
                declared.add(tok)
                op_tokens.append((op, tok))
        elif w[0] == "argtoken":
            if len(w) != 4:
                raise TokenError("syntax", "expected 'argtoken <operation> <argument> <token>'", ln.span)
            if seen_conflict:
                raise TokenError("syntax", "token declarations must precede conflicts", ln.span)
            op = check_id(ln, 1, "operation name")
            arg = check_id(ln, 2, "argument name")
            tok = check_id(ln, 3, "token name")
            if op not in ops:
                raise TokenError("unknown-operation", f"unknown operation '{op}'", word_span(ln, 1))
            if arg not in ops[op].param_names:
                raise TokenError("unknown-argument", f"operation '{op}' has no argument '{arg}'",
                                 word_span(ln, 2))
            if tok in declared:
                raise TokenError("duplicate-token", f"token '{tok}' is declared more than once",
                                 word_span(ln, 3))
            declared.add(tok)
            arg_tokens.append((op, arg, tok))
        elif len(w) == 3 and w[1] == "conflicts":
            a = check_id(ln, 0, "token name")
            b = check_id(ln, 2, "token name")
            for k, t in ((0, a), (2, b)):
                if t not in declared:
                    if t in decl_line and decl_line[t] > idx:
                        raise TokenError("use-before-declaration",
                                         f"token '{t}' is used before it is declared",
                                         word_span(ln, k))
                    raise TokenError("undeclared-token", f"token '{t}' is not declared",
                                     word_span(ln, k))
            seen_conflict = True
            conflicts.add(frozenset((a, b)))
        else:
            raise TokenError("syntax", f"cannot parse {' '.join(w)!r}", ln.span)

    if not declared:
        raise TokenError("syntax", "empty token system: declare at least one token", lines[0].span)
    return TokenSystem(tuple(op_tokens), tuple(arg_tokens), frozenset(conflicts))
