"""Command-line interface: ``cise analyze | sp | crdt-sim | emit-smt``."""
from __future__ import annotations

import argparse
import json
import random
import sys
from pathlib import Path

from . import crdt
from .analysis import AnalysisTask, generate_tasks
from .parser import ParseError, SpecError, parse_spec
from .report import SCHEMA_VERSION, ConflictReport, run_analysis
from .semantics import ConfigurationError, DomainBounds, to_json_value
from .smt import SmtError, emit, run_solver, write_scripts
from .sp import simplify, sp_op
from .terms import Spec, pretty
from .tokens import TokenSystem, parse_tokens

EXIT_OK, EXIT_CONFLICT, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    pass


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror or exc}") from None
    except UnicodeDecodeError:
        raise InputError(f"{path}: not valid UTF-8") from None


def load_spec(path: str) -> Spec:
    return parse_spec(_read(path), path)


def load_tokens(path: str | None, spec: Spec) -> TokenSystem | None:
    if path is None:
        return None
    return parse_tokens(_read(path), spec, path)


def _bounds(text: str) -> DomainBounds:
    try:
        return DomainBounds.parse(text)
    except ConfigurationError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _tasks(spec: Spec, tokens: TokenSystem | None) -> list[AnalysisTask]:
    return [t for t in generate_tasks(spec, tokens) if isinstance(t, AnalysisTask)]


def _smt_section(report: ConflictReport, spec: Spec, tokens, args) -> list[dict]:
    checked = {f.task: f.result for f in report.findings() if f.result is not None}
    out = []
    for t in _tasks(spec, tokens):
        scripts = emit(t)
        if args.emit_smt:
            write_scripts(scripts, args.emit_smt)
        if not args.solver:
            continue
        res = checked[t.name]
        for sc, gr in zip(scripts, res.goals):
            status = run_solver(sc.text, args.solver).status
            expected = "unsat" if gr.holds else "sat"
            out.append({"task": t.name, "goal": sc.goal, "solver": status,
                        "agrees": status == expected if status in ("sat", "unsat") else None})
    return out


def cmd_analyze(args: argparse.Namespace) -> int:
    spec = load_spec(args.spec)
    tokens = load_tokens(args.tokens, spec)
    report = run_analysis(spec, tokens, args.bounds)
    smt = _smt_section(report, spec, tokens, args) if (args.emit_smt or args.solver) else []
    if args.report == "json":
        data = report.to_json()
        if smt:
            data["smt"] = smt
        sys.stdout.write(json.dumps(data, indent=2) + "\n")
    else:
        sys.stdout.write(report.format_text())
        for row in smt:
            mark = {True: "agrees", False: "DISAGREES", None: "no verdict"}[row["agrees"]]
            sys.stdout.write(f"smt {row['task']} [{row['goal']}]: {row['solver']} ({mark})\n")
    return report.exit_code()


def cmd_sp(args: argparse.Namespace) -> int:
    spec = load_spec(args.spec)
    try:
        op = spec.op(args.op)
    except KeyError:
        raise InputError(f"unknown operation '{args.op}'") from None
    if op.ensures and not args.force:
        print(f"note: {op.name} already has ensures clauses; they are ignored (use --force to "
              "silence this)", file=sys.stderr)
    res = sp_op(spec, op)
    print(pretty(simplify(res.formula), binder_sorts=args.sorts))
    return EXIT_OK


def _sim_report(seed, n, steps, res: crdt.SimResult) -> dict:
    return {
        "seed": seed,
        "replicas": n,
        "steps": len(steps),
        "converged": res.converged,
        "final_states": [to_json_value(s) for s in res.final_states],
    }


def cmd_crdt_sim(args: argparse.Namespace) -> int:
    runs = []
    if args.scenario:
        n, steps = crdt.parse_scenario(_read(args.scenario))
        runs.append(_sim_report(None, n, steps, crdt.simulate(n, steps)))
    else:
        for i in range(args.random):
            seed = args.seed + i
            rng = random.Random(seed)
            steps = crdt.random_schedule(rng, args.replicas, args.events, range(args.elements))
            runs.append(_sim_report(seed, args.replicas, steps, crdt.simulate(args.replicas, steps)))
    ok = all(r["converged"] for r in runs)
    if args.report == "json":
        data = {"schema_version": SCHEMA_VERSION, "converged": ok, "runs": runs}
        sys.stdout.write(json.dumps(data, indent=2) + "\n")
    else:
        for r in runs:
            tag = "" if r["seed"] is None else f"seed {r['seed']}: "
            print(f"{tag}{r['replicas']} replicas, {r['steps']} steps, "
                  f"{'converged' if r['converged'] else 'DIVERGED'}")
        print(f"{sum(r['converged'] for r in runs)}/{len(runs)} runs converged")
    return EXIT_OK if ok else EXIT_CONFLICT


def cmd_emit_smt(args: argparse.Namespace) -> int:
    spec = load_spec(args.spec)
    tokens = load_tokens(args.tokens, spec)
    bounded = args.bounds if args.bounded else None
    n = 0
    worst = EXIT_OK
    for t in _tasks(spec, tokens):
        scripts = emit(t, bounded)
        for p in write_scripts(scripts, args.dir):
            n += 1
            if args.solver:
                status = run_solver(p.read_text(encoding="utf-8"), args.solver).status
                print(f"{p.name}: {status}")
                if status != "unsat":
                    worst = EXIT_CONFLICT
    print(f"wrote {n} script(s) to {args.dir}")
    return worst


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cise", description="Invariant-preservation analysis for "
                                "replicated operations (safety, commutativity, stability).")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="run every analysis and report conflicts")
    a.add_argument("spec")
    a.add_argument("--tokens", help="token system file")
    a.add_argument("--bounds", type=_bounds, default=DomainBounds(), metavar="MIN..MAX")
    a.add_argument("--report", choices=("text", "json"), default="text")
    a.add_argument("--emit-smt", metavar="DIR", help="also write SMT-LIB scripts")
    a.add_argument("--solver", metavar="CMD", help="run each script through CMD, e.g. 'z3 -in'")
    a.set_defaults(func=cmd_analyze)

    s = sub.add_parser("sp", help="print the strongest postcondition of an operation")
    s.add_argument("spec")
    s.add_argument("op")
    s.add_argument("--force", action="store_true", help="ignore existing ensures without a note")
    s.add_argument("--sorts", action="store_true", help="annotate binders with their sorts")
    s.set_defaults(func=cmd_sp)

    c = sub.add_parser("crdt-sim", help="simulate remove-wins set replicas")
    c.add_argument("scenario", nargs="?", help="scenario file")
    c.add_argument("--random", type=int, default=0, metavar="COUNT", help="number of random runs")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--replicas", type=int, default=3)
    c.add_argument("--events", type=int, default=100)
    c.add_argument("--elements", type=int, default=4, help="elements are 0..N-1")
    c.add_argument("--report", choices=("text", "json"), default="text")
    c.set_defaults(func=cmd_crdt_sim)

    e = sub.add_parser("emit-smt", help="write one SMT-LIB script per proof goal")
    e.add_argument("spec")
    e.add_argument("dir")
    e.add_argument("--tokens")
    e.add_argument("--bounds", type=_bounds, default=DomainBounds(), metavar="MIN..MAX")
    e.add_argument("--bounded", action="store_true",
                   help="restrict integers and set contents to --bounds")
    e.add_argument("--solver", metavar="CMD")
    e.set_defaults(func=cmd_emit_smt)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    if args.command == "crdt-sim" and not args.scenario and args.random <= 0:
        print("cise crdt-sim: give a scenario file or --random COUNT", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except SpecError as exc:
        for d in exc.diagnostics:
            print(f"error: {d}", file=sys.stderr)
    except (ParseError, InputError, ConfigurationError, crdt.ScheduleError, SmtError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
