"""Command-line entry point.

Exit codes: 0 success, 1 tester FAIL verdict, 2 plan invalid, 3 budget
violation, 4 data error.  ``PRIVCALC_SEED`` sets the default seed.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

from privcalc import accuracy
from privcalc.core import Dataset, Schema, metric_named, parse_cell
from privcalc.errors import BudgetViolation, DataSchemaMismatch, PlanInvalid, PrivCalcError, SchemaError

EXIT_OK, EXIT_FAIL, EXIT_PLAN, EXIT_BUDGET, EXIT_DATA = 0, 1, 2, 3, 4


def _default_seed() -> int:
    return int(os.environ.get("PRIVCALC_SEED", "0"))


def infer_schema(path) -> Schema:
    """Guess column kinds from a CSV (int64, then float64, then bool, else string)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataSchemaMismatch(f"{path}: missing header row")
        rows = list(reader)
    kinds = []
    for j in range(len(header)):
        cells = [r[j] for r in rows if j < len(r)]
        for kind in ("int64", "float64", "bool"):
            try:
                for c in cells:
                    parse_cell(c, kind)
            except DataSchemaMismatch:
                continue
            kinds.append(kind)
            break
        else:
            kinds.append("string")
    return Schema.of(*zip(header, kinds))


def _load_schema(path) -> Schema:
    try:
        return Schema.from_json(Path(path).read_text())
    except (OSError, json.JSONDecodeError, SchemaError) as exc:
        raise DataSchemaMismatch(f"cannot load schema {path}: {exc}") from exc


def cmd_run(args) -> int:
    from privcalc.plan import dump_results, run_plan

    seed = args.seed if args.seed is not None else _default_seed()
    try:
        results = run_plan(args.plan, args.data, seed)
    except PlanInvalid as exc:
        print(f"plan invalid: {exc}", file=sys.stderr)
        return EXIT_PLAN
    except BudgetViolation as exc:
        print(f"budget violation: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (DataSchemaMismatch, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    text = dump_results(results)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_repl(args) -> int:
    from privcalc.repl import ReplSession, run_repl

    try:
        schema = _load_schema(args.schema) if args.schema else infer_schema(args.data)
        data = Dataset.from_csv(args.data, schema)
    except (DataSchemaMismatch, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    seed = args.seed if args.seed is not None else _default_seed()
    try:
        session = ReplSession(data, args.budget, args.mode, metric_named(args.metric), seed)
    except PrivCalcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PLAN
    run_repl(session)
    return EXIT_OK


def cmd_accuracy(args) -> int:
    try:
        bound = accuracy.accuracy_for_epsilon(args.sensitivity, args.epsilon, args.beta)
    except (PrivCalcError, ZeroDivisionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PLAN
    print(json.dumps({
        "epsilon": args.epsilon, "sensitivity": args.sensitivity, "beta": args.beta,
        "scale": args.sensitivity / args.epsilon, "alpha": bound.alpha,
    }))
    return EXIT_OK


def cmd_budget(args) -> int:
    try:
        eps = accuracy.epsilon_for_accuracy(args.sensitivity, args.alpha, args.beta)
    except PrivCalcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PLAN
    print(json.dumps({"alpha": args.alpha, "beta": args.beta, "sensitivity": args.sensitivity, "epsilon": eps}))
    return EXIT_OK


def cmd_test(args) -> int:
    from privcalc.plan import compile_plan, load_plan
    from privcalc.plotting import render_test_report
    from privcalc.tester import stochastic_test

    seed = args.seed if args.seed is not None else _default_seed()
    try:
        _, _, queries = compile_plan(load_plan(args.mechanism))
        if len(queries) != 1:
            raise PlanInvalid("the tester needs a plan with exactly one query")
        verdict = stochastic_test(queries[0][1], args.epsilon, args.samples, args.significance, seed)
    except PlanInvalid as exc:
        print(f"plan invalid: {exc}", file=sys.stderr)
        return EXIT_PLAN
    except PrivCalcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PLAN
    report = verdict.to_dict()
    report["mechanism"] = queries[0][1].name
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.report:
        Path(args.report).write_text(text)
        figure = args.figure or str(Path(args.report).with_suffix(".png"))
        render_test_report(report, figure)
    else:
        sys.stdout.write(text)
        if args.figure:
            render_test_report(report, args.figure)
    print(verdict.summary, file=sys.stderr)
    return EXIT_OK if verdict.passed else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="privcalc", description="Build, run, and check differentially private programs.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="execute a JSON batch plan over a CSV")
    r.add_argument("--plan", required=True)
    r.add_argument("--data", required=True)
    r.add_argument("--seed", type=int)
    r.add_argument("--out", help="results JSON path (default: stdout)")
    r.set_defaults(func=cmd_run)

    q = sub.add_parser("repl", help="interactive session over a CSV")
    q.add_argument("--data", required=True)
    q.add_argument("--schema", help="schema JSON; inferred from the CSV when omitted")
    q.add_argument("--budget", type=float)
    q.add_argument("--mode", choices=("filter", "odometer"), default="filter")
    q.add_argument("--metric", default="SymmetricDistance")
    q.add_argument("--seed", type=int)
    q.set_defaults(func=cmd_repl)

    a = sub.add_parser("accuracy", help="alpha for a Laplace release at a given epsilon")
    a.add_argument("--epsilon", type=float, required=True)
    a.add_argument("--sensitivity", type=float, required=True)
    a.add_argument("--beta", type=float, required=True)
    a.set_defaults(func=cmd_accuracy)

    b = sub.add_parser("budget", help="epsilon needed for (alpha, beta)-accuracy")
    b.add_argument("--alpha", type=float, required=True)
    b.add_argument("--beta", type=float, required=True)
    b.add_argument("--sensitivity", type=float, required=True)
    b.set_defaults(func=cmd_budget)

    t = sub.add_parser("test", help="stochastic test of a mechanism's privacy claim")
    t.add_argument("--mechanism", required=True, help="plan JSON with a single query")
    t.add_argument("--epsilon", type=float, required=True)
    t.add_argument("--samples", type=int, default=100_000)
    t.add_argument("--significance", type=float, default=0.01)
    t.add_argument("--seed", type=int)
    t.add_argument("--report", help="report JSON path; a PNG figure is written next to it")
    t.add_argument("--figure", help="explicit figure path")
    t.set_defaults(func=cmd_test)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
