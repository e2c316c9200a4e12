"""Running every analysis of a specification and assembling the conflict report."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

from .analysis import AnalysisTask, Skipped, generate_tasks
from .checker import CheckResult, check_task
from .semantics import DomainBounds
from .terms import Spec
from .tokens import TokenSystem

SCHEMA_VERSION = 1


@dataclass
class Finding:
    """Verdict for one safety, pair or self task."""
    kind: str
    ops: tuple[str, ...]
    verdict: str
    task: str
    directions: list[str] = field(default_factory=list)
    failed_goals: list[str] = field(default_factory=list)
    counterexamples: list[dict] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)
    result: CheckResult | None = field(default=None, repr=False)

    @property
    def conflict(self) -> bool:
        return self.verdict in ("stability-conflict", "commutativity-conflict", "self-conflict",
                                "unsafe")

    def to_json(self) -> dict:
        out: dict = {"ops" if self.kind == "pair" else "op":
                     list(self.ops) if self.kind == "pair" else self.ops[0],
                     "verdict": self.verdict, "task": self.task}
        if self.directions:
            out["directions"] = self.directions
        if self.failed_goals:
            out["failed_goals"] = self.failed_goals
        if self.counterexamples:
            out["counterexamples"] = self.counterexamples
        if self.notes:
            out["notes"] = self.notes
        return out


@dataclass
class ConflictReport:
    bounds: DomainBounds
    safety: list[Finding]
    pairs: list[Finding]
    self: list[Finding]
    tokens: TokenSystem | None = None
    warnings: list[str] = field(default_factory=list)

    def findings(self) -> list[Finding]:
        return self.safety + self.pairs + self.self

    @property
    def skipped(self) -> list[str]:
        return [f.task for f in self.findings() if f.verdict == "skipped-by-token-system"]

    @property
    def sound(self) -> bool:
        """Every task that was generated discharged."""
        return not any(f.conflict for f in self.findings())

    @property
    def conflicts(self) -> list[Finding]:
        return [f for f in self.findings() if f.conflict]

    def pair(self, f: str, g: str) -> Finding:
        for p in self.pairs:
            if set(p.ops) == {f, g}:
                return p
        raise KeyError((f, g))

    def self_of(self, op: str) -> Finding:
        return next(s for s in self.self if s.ops[0] == op)

    def safety_of(self, op: str) -> Finding:
        return next(s for s in self.safety if s.ops[0] == op)

    def exit_code(self) -> int:
        return 0 if self.sound else 1

    def to_json(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "bounds": {"min": self.bounds.int_min, "max": self.bounds.int_max},
            "safety": [f.to_json() for f in self.safety],
            "pairs": [f.to_json() for f in self.pairs],
            "self": [f.to_json() for f in self.self],
            "token_system": {"provided": self.tokens is not None, "sound": self.sound,
                             "skipped": self.skipped},
            "warnings": list(self.warnings),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=False) + "\n"

    def format_text(self, counterexamples: bool = True) -> str:
        lines = [f"bounds {self.bounds}", "", "safety"]
        for f in self.safety:
            lines.append(f"  {f.ops[0]}: {f.verdict}")
            lines += _detail(f, counterexamples)
        lines += ["", "commutativity and stability"]
        for f in self.pairs:
            a, b = f.ops
            head = f"  {{{a}, {b}}}: {f.verdict}"
            if f.directions:
                head += f" ({'; '.join(f.directions)})"
            lines.append(head)
            if f.verdict == "stability-conflict":
                lines.append(f"    operations {a} and {b} conflict")
            elif f.verdict == "commutativity-conflict":
                lines.append(f"    operations {a} and {b} do not commute")
            lines += _detail(f, counterexamples)
        lines += ["", "self-stability"]
        for f in self.self:
            lines.append(f"  {f.ops[0]}: {f.verdict}")
            lines += _detail(f, counterexamples)
        lines.append("")
        if self.tokens is not None:
            verdict = "sound" if self.sound else "not sound"
            lines.append(f"token system: {verdict}")
            if self.skipped:
                lines.append(f"  skipped: {', '.join(self.skipped)}")
        else:
            lines.append(f"conflicts: {len(self.conflicts)}")
        for w in self.warnings:
            lines.append(f"warning: {w}")
        return "\n".join(lines) + "\n"


def _detail(f: Finding, counterexamples: bool) -> list[str]:
    out = []
    for g in f.failed_goals:
        out.append(f"    failed: {g}")
    for n in f.notes:
        out.append(f"    note: {n}")
    if counterexamples and f.result is not None and f.conflict:
        cx = _first_relevant(f)
        if cx is not None:
            out.append("    counterexample:")
            out.append(cx.format("      "))
    return out


def _first_relevant(f: Finding):
    assert f.result is not None
    cx = f.result.counterexample
    if cx is not None and set(cx.failed_goals) & set(f.failed_goals):
        return cx
    for g in f.result.goals:
        if g.goal.label in f.failed_goals:
            return g.counterexample
    return None


def _cx_list(result: CheckResult, labels: list[str]) -> list[dict]:
    return [g.counterexample.to_json() for g in result.goals
            if g.goal.label in labels and g.counterexample is not None]


def _verdicts(task: AnalysisTask, res: CheckResult, safety: dict[str, Finding]) -> Finding:
    failed = res.failed()
    contract = [g for g in failed if g.goal.blame.startswith("contract:")]
    for g in contract:
        # a body that breaks its own contract mid-sequence is a safety problem of that op
        op = g.goal.blame.split(":", 1)[1]
        s = safety[op]
        s.verdict = "unsafe"
        s.notes.append(f"contract violated inside {task.name}: {g.goal.label}")
    if task.kind == "safety":
        labels = [g.goal.label for g in failed]
        return Finding("safety", task.ops, "unsafe" if labels else "safe", task.name,
                       failed_goals=labels, counterexamples=_cx_list(res, labels), result=res)
    stab = [g for g in failed if g.goal.blame == "stability"]
    if task.kind == "self":
        labels = [g.goal.label for g in stab]
        return Finding("self", task.ops, "self-conflict" if labels else "stable", task.name,
                       failed_goals=labels, counterexamples=_cx_list(res, labels), result=res)
    comm = [g for g in failed if g.goal.blame == "commutativity"]
    notes = []
    if stab:
        verdict = "stability-conflict"
        directions = []
        for g in stab:
            if g.goal.direction not in directions:
                directions.append(g.goal.direction)
        if comm:
            notes.append("final state equality also fails")
    elif comm:
        verdict, directions = "commutativity-conflict", []
    else:
        verdict, directions = "commutes-and-stable", []
    labels = [g.goal.label for g in stab + comm]
    return Finding("pair", task.ops, verdict, task.name, directions, labels,
                   _cx_list(res, labels), notes, res)


def run_analysis(spec: Spec, tokens: TokenSystem | None = None,
                 bounds: DomainBounds | None = None) -> ConflictReport:
    bounds = bounds or DomainBounds()
    tasks = generate_tasks(spec, tokens)
    safety: dict[str, Finding] = {}
    pairs: list[Finding] = []
    selfs: list[Finding] = []
    warnings: list[str] = []
    # safety first so that contract failures seen in later tasks can be attached to it
    ordered = sorted(tasks, key=lambda t: t.kind != "safety")
    for t in ordered:
        if isinstance(t, Skipped):
            f = Finding(t.kind, t.ops, "skipped-by-token-system", t.name, notes=[t.reason])
        else:
            res = check_task(t, bounds)
            warnings += res.warnings
            f = _verdicts(t, res, safety)
        if f.kind == "safety":
            safety[f.ops[0]] = f
        elif f.kind == "pair":
            pairs.append(f)
        else:
            selfs.append(f)
    pairs.sort(key=lambda f: tuple(sorted(f.ops)))
    selfs.sort(key=lambda f: f.ops)
    return ConflictReport(bounds, sorted(safety.values(), key=lambda f: f.ops), pairs, selfs,
                          tokens, warnings)
