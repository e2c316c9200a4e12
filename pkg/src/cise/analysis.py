"""Generation of safety, commutativity/stability and self-stability tasks."""
from __future__ import annotations

from dataclasses import dataclass, field

from .terms import (INV_STATE, OP_STATE, App, Field, OpDecl, Sort, Spec, StateDecl, Term,
                    Var, conj, implies, rename_states, substitute)
from .tokens import TokenSystem


@dataclass(frozen=True)
class Call:
    op: str
    args: tuple[str, ...]  # names of the task's symbolic argument variables
    state_in: str
    state_out: str


@dataclass(frozen=True)
class ProofGoal:
    label: str
    formula: Term
    # "stability" | "commutativity" | "contract:<op>" | "post" | "invariant"
    blame: str
    direction: str | None = None  # for stability goals: "f after g"


@dataclass(frozen=True)
class AnalysisTask:
    name: str
    kind: str  # "safety" | "pair" | "self"
    ops: tuple[str, ...]
    params: tuple[tuple[str, Sort], ...]
    states: tuple[str, ...]  # labels of the initial (free) states
    assumption: Term
    program: tuple[Call, ...]
    goals: tuple[ProofGoal, ...]
    spec: Spec = field(repr=False, compare=False)
    notes: tuple[str, ...] = ()

    @property
    def labels(self) -> list[str]:
        out = list(self.states)
        for c in self.program:
            if c.state_out not in out:
                out.append(c.state_out)
        return out

    def describe(self) -> str:
        lines = [f"task {self.name}"]
        for n, s in self.params:
            lines.append(f"  val {n} : {s}")
        for lbl in self.states:
            lines.append(f"  val {lbl} : {self.spec.state.name}")
        lines.append(f"  assume {{ {self.assumption} }}")
        for c in self.program:
            lines.append(f"  {c.op} {' '.join(c.args)} {c.state_in}   (* -> {c.state_out} *)")
        for g in self.goals:
            lines.append(f"  goal [{g.label}] {{ {g.formula} }}")
        return "\n".join(lines)


@dataclass(frozen=True)
class Skipped:
    """A task the token system rules out: the operations never run concurrently."""
    name: str
    kind: str
    ops: tuple[str, ...]
    reason: str


# ---------------------------------------------------------------------------
# Instantiation helpers


def instantiate_invariant(state: StateDecl, label: str) -> Term:
    return rename_states(state.invariant, {(INV_STATE, False): label})


def instantiate_pre(op: OpDecl, args: dict[str, str], label: str) -> list[Term]:
    vm = {p: Var(a) for p, a in args.items()}
    return [rename_states(substitute(r, var_map=vm), {(OP_STATE, False): label})
            for r in op.requires]


def instantiate_post(op: OpDecl, args: dict[str, str], before: str, after: str) -> list[Term]:
    vm = {p: Var(a) for p, a in args.items()}
    mapping = {(OP_STATE, False): after, (OP_STATE, True): before}
    return [rename_states(substitute(e, var_map=vm), mapping) for e in op.ensures]


def default_state_eq(spec: Spec, left: str = "s1", right: str = "s2") -> Term:
    """Point-wise equality: ``=`` on scalar fields, extensional ``==`` on sets."""
    from .terms import RWSetSort, SetSort
    parts = []
    for name, sort in spec.state.fields:
        op = "seteq" if isinstance(sort, (SetSort, RWSetSort)) else "="
        parts.append(App(op, (Field(left, name), Field(right, name))))
    return conj(parts)


def state_eq(spec: Spec, a: str, b: str) -> Term:
    if spec.state_eq is None:
        return default_state_eq(spec, a, b)
    q = spec.state_eq
    return rename_states(q.body, {(q.left, False): a, (q.right, False): b})


def _arg_names(op: OpDecl, suffix: str) -> dict[str, str]:
    # appending a fixed suffix is injective, and "…1" never equals "…2"
    return {p: f"{p}{suffix}" for p in op.param_names}


def _params(op: OpDecl, names: dict[str, str]) -> list[tuple[str, Sort]]:
    return [(names[p], s) for p, s in op.params]


def _post_goals(op: OpDecl, args: dict[str, str], before: str, after: str,
                where: str) -> list[ProofGoal]:
    pre = conj(instantiate_pre(op, args, before))
    out = []
    for i, post in enumerate(instantiate_post(op, args, before, after), 1):
        out.append(ProofGoal(f"post#{i} of {op.name} {where}", implies(pre, post),
                             f"contract:{op.name}"))
    return out


# ---------------------------------------------------------------------------
# Generators


def gen_safety(spec: Spec, op: OpDecl | str) -> AnalysisTask:
    op = spec.op(op) if isinstance(op, str) else op
    args = {p: p for p in op.param_names}
    pre, post = "state", "state@1"
    assumption = conj([instantiate_invariant(spec.state, pre), *instantiate_pre(op, args, pre)])
    goals = [ProofGoal(f"post#{i} of {op.name}", f, "post")
             for i, f in enumerate(instantiate_post(op, args, pre, post), 1)]
    goals.append(ProofGoal(f"invariant after {op.name}",
                           instantiate_invariant(spec.state, post), "invariant"))
    return AnalysisTask(f"{op.name}_safety", "safety", (op.name,), tuple(op.params), (pre,),
                        assumption, (Call(op.name, tuple(op.param_names), pre, post),),
                        tuple(goals), spec)


def _disequalities(spec: Spec, tokens: TokenSystem | None, f: OpDecl, g: OpDecl,
                   fa: dict[str, str], ga: dict[str, str]) -> tuple[list[Term], list[str]]:
    if tokens is None:
        return [], []
    terms, notes = [], []
    fs, gs = dict(f.params), dict(g.params)
    for a, b in tokens.arg_conflicts(f.name, g.name):
        if fs[a] != gs[b]:
            notes.append(f"argument tokens on {f.name}.{a} and {g.name}.{b} conflict but the "
                         f"arguments have different sorts; no constraint added")
            continue
        terms.append(App("<>", (Var(fa[a]), Var(ga[b]))))
    if f.name != g.name:
        for b, a in tokens.arg_conflicts(g.name, f.name):
            t = App("<>", (Var(fa[a]), Var(ga[b])))
            if gs[b] == fs[a] and t not in terms:
                terms.append(t)
    return terms, notes


def gen_pair(spec: Spec, f: OpDecl | str, g: OpDecl | str,
             tokens: TokenSystem | None = None) -> AnalysisTask | Skipped:
    f = spec.op(f) if isinstance(f, str) else f
    g = spec.op(g) if isinstance(g, str) else g
    if f.name == g.name:
        raise ValueError("gen_pair needs two different operations; use gen_self")
    name = f"{f.name}_{g.name}_commutativity"
    if tokens is not None and tokens.ops_exclusive(f.name, g.name):
        return Skipped(name, "pair", (f.name, g.name),
                       f"{f.name} and {g.name} hold conflicting tokens")
    fa, ga = _arg_names(f, "1"), _arg_names(g, "2")
    diseqs, notes = _disequalities(spec, tokens, f, g, fa, ga)
    assumption = conj([*instantiate_pre(f, fa, "state1"), *instantiate_pre(g, ga, "state2"),
                       *diseqs, state_eq(spec, "state1", "state2")])
    xf, xg = tuple(fa[p] for p in f.param_names), tuple(ga[p] for p in g.param_names)
    program = (
        Call(g.name, xg, "state1", "state1@1"),
        Call(f.name, xf, "state1@1", "state1@2"),
        Call(f.name, xf, "state2", "state2@1"),
        Call(g.name, xg, "state2@1", "state2@2"),
    )
    goals = []
    for i, p in enumerate(instantiate_pre(f, fa, "state1@1"), 1):
        goals.append(ProofGoal(f"pre#{i} of {f.name} after {g.name}", p, "stability",
                               f"{f.name} after {g.name}"))
    for i, p in enumerate(instantiate_pre(g, ga, "state2@1"), 1):
        goals.append(ProofGoal(f"pre#{i} of {g.name} after {f.name}", p, "stability",
                               f"{g.name} after {f.name}"))
    goals.append(ProofGoal("final states equal", state_eq(spec, "state1@2", "state2@2"),
                           "commutativity"))
    goals += _post_goals(g, ga, "state1", "state1@1", "(state1, first)")
    goals += _post_goals(f, fa, "state1@1", "state1@2", "(state1, second)")
    goals += _post_goals(f, fa, "state2", "state2@1", "(state2, first)")
    goals += _post_goals(g, ga, "state2@1", "state2@2", "(state2, second)")
    return AnalysisTask(name, "pair", (f.name, g.name), tuple(_params(f, fa) + _params(g, ga)),
                        ("state1", "state2"), assumption, program, tuple(goals), spec,
                        tuple(notes))


def gen_self(spec: Spec, f: OpDecl | str, tokens: TokenSystem | None = None) -> AnalysisTask | Skipped:
    f = spec.op(f) if isinstance(f, str) else f
    name = f"{f.name}_stability"
    if tokens is not None and tokens.ops_exclusive(f.name, f.name):
        return Skipped(name, "self", (f.name,), f"{f.name} holds a self-conflicting token")
    a1, a2 = _arg_names(f, "1"), _arg_names(f, "2")
    diseqs, notes = _disequalities(spec, tokens, f, f, a1, a2)
    assumption = conj([*instantiate_pre(f, a1, "state1"), *instantiate_pre(f, a2, "state2"),
                       *diseqs, state_eq(spec, "state1", "state2")])
    x1, x2 = tuple(a1[p] for p in f.param_names), tuple(a2[p] for p in f.param_names)
    program = (Call(f.name, x1, "state1", "state1@1"), Call(f.name, x2, "state1@1", "state1@2"))
    goals = [ProofGoal(f"pre#{i} of second {f.name}", p, "stability", f"{f.name} after {f.name}")
             for i, p in enumerate(instantiate_pre(f, a2, "state1@1"), 1)]
    return AnalysisTask(name, "self", (f.name,), tuple(_params(f, a1) + _params(f, a2)),
                        ("state1", "state2"), assumption, program, tuple(goals), spec,
                        tuple(notes))


def generate_tasks(spec: Spec, tokens: TokenSystem | None = None) -> list[AnalysisTask | Skipped]:
    out: list[AnalysisTask | Skipped] = [gen_safety(spec, op) for op in spec.ops]
    ops = spec.ops
    for i in range(len(ops)):
        for j in range(i + 1, len(ops)):
            out.append(gen_pair(spec, ops[i], ops[j], tokens))
    out += [gen_self(spec, op, tokens) for op in ops]
    return out
