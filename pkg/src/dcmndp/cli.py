"""Command-line entry point: generate, validate, solve, bench."""

from __future__ import annotations

import argparse
import glob
import sys
from pathlib import Path

from . import bench
from .engine import RULES, VARIANTS, InfeasibleInstanceError, SolverConfig, run
from .instance import (
    GeneratorParams,
    InstanceFormatError,
    InstanceValidationError,
    generate_random,
    parse_instance,
    serialize_instance,
    validate,
)

EXIT_OK, EXIT_INVALID, EXIT_IO, EXIT_INFEASIBLE = 0, 1, 2, 3
TRACE_COLUMNS = ("q", "theta", "best_theta", "beta", "lambda", "grad_norm", "dir_norm")


def _err(msg: str) -> None:
    print(msg, file=sys.stderr)


def _read_text(path: str) -> str | None:
    try:
        return Path(path).read_text()
    except OSError as exc:
        _err(f"cannot open {path}: {exc.strerror}")
        return None


def _choices(value: str, allowed: tuple[str, ...]) -> list[str]:
    if value.lower() == "all":
        return list(allowed)
    picked = [v.strip().upper() for v in value.split(",") if v.strip()]
    bad = [v for v in picked if v not in allowed]
    if bad or not picked:
        raise argparse.ArgumentTypeError(f"expected a subset of {','.join(allowed)}, got {value!r}")
    return picked


def cmd_generate(args) -> int:
    params = GeneratorParams(
        node_count=args.nodes,
        edge_count=args.edges,
        facility_count=args.facilities,
        seed=args.seed,
        ensure_feasible=not args.raw,
        name=args.name or "",
    )
    problems = params.problems()
    if problems:
        for p in problems:
            _err(p)
        return EXIT_INVALID
    text = serialize_instance(generate_random(params))
    if args.out:
        try:
            Path(args.out).write_text(text)
        except OSError as exc:
            _err(f"cannot write {args.out}: {exc.strerror}")
            return EXIT_IO
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_validate(args) -> int:
    text = _read_text(args.instance)
    if text is None:
        return EXIT_IO
    try:
        inst = parse_instance(text, check=False, name=Path(args.instance).stem)
    except InstanceFormatError as exc:
        print(f"parse error: {exc}")
        return EXIT_INVALID
    problems = validate(inst)
    if not problems:
        print("OK")
        return EXIT_OK
    for p in problems:
        print(p)
    return EXIT_INVALID


def cmd_solve(args) -> int:
    text = _read_text(args.instance)
    if text is None:
        return EXIT_IO
    try:
        inst = parse_instance(text, name=Path(args.instance).stem)
    except (InstanceFormatError, InstanceValidationError) as exc:
        _err(f"{args.instance}: {exc}")
        return EXIT_INVALID

    config = SolverConfig.of(
        args.variant, args.rule, alpha=args.alpha,
        max_stall=args.max_stall, upper_bound=args.ub,
    )
    on_iteration = None
    if args.trace:
        print(",".join(TRACE_COLUMNS), file=sys.stderr)

        def on_iteration(rec):
            values = (rec.theta, rec.best_theta, rec.beta, rec.lam, rec.grad_norm, rec.dir_norm)
            print(",".join([str(rec.q)] + [bench.fmt(v) for v in values]), file=sys.stderr)

    try:
        report = run(inst, config, on_iteration=on_iteration)
    except InfeasibleInstanceError as exc:
        _err(f"{args.instance}: infeasible: {exc}")
        return EXIT_INFEASIBLE

    row = bench.BenchRow(
        instance=inst.name, variant=config.direction.variant, rule=config.step.rule,
        best_lb=report.best_theta, ub=report.upper_bound, gap_pct=0.0,
        iterations=report.iterations, wall_time=report.wall_time,
        stop_reason=report.stop_reason, all_y_exact=report.all_y_exact, seed=inst.seed,
    )
    if args.pretty:
        width = max(len(c) for c in bench.CSV_COLUMNS)
        for name, cell in zip(bench.CSV_COLUMNS, row.cells()):
            print(f"{name:<{width}}  {cell}")
        if not report.ub_feasible:
            print("note: upper bound is not backed by a feasible design")
    else:
        sys.stdout.write(bench.rows_to_csv([row]))
    return EXIT_OK


def cmd_bench(args) -> int:
    paths: list[str] = []
    for pattern in args.instances:
        matches = sorted(glob.glob(pattern))
        paths.extend(matches if matches else [pattern])
    if not paths:
        _err("no instances given")
        return EXIT_IO
    rows = bench.run_bench(
        paths, args.variants, args.rules, jobs=args.jobs,
        alpha=args.alpha, max_stall=args.max_stall,
    )
    timing = not args.no_timing
    text = bench.rows_to_csv(rows, timing=timing)
    tables = bench.render_markdown(bench.gap_tables(rows), timing=timing)
    if args.out:
        try:
            Path(args.out).write_text(text)
            Path(args.out).with_suffix(".md").write_text(tables)
        except OSError as exc:
            _err(f"cannot write {args.out}: {exc.strerror}")
            return EXIT_IO
    else:
        sys.stdout.write(text)
    print(tables, file=sys.stderr if not args.out else sys.stdout)
    return EXIT_IO if all(r.error for r in rows) else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dcmndp", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a random instance")
    g.add_argument("--nodes", type=int, required=True)
    g.add_argument("--edges", type=int, required=True)
    g.add_argument("--facilities", type=int, default=3)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--name")
    g.add_argument("--raw", action="store_true",
                   help="skip the capacity scaling that guarantees feasibility")
    g.add_argument("--out")
    g.set_defaults(func=cmd_generate)

    v = sub.add_parser("validate", help="check an instance file")
    v.add_argument("instance")
    v.set_defaults(func=cmd_validate)

    def solver_flags(p):
        p.add_argument("--alpha", type=float, default=0.7)
        p.add_argument("--max-stall", type=int, default=100)

    s = sub.add_parser("solve", help="compute a Lagrangian lower bound")
    s.add_argument("instance")
    s.add_argument("--variant", type=str.upper, choices=VARIANTS, default="SG3")
    s.add_argument("--rule", type=str.upper, choices=RULES, default="R4")
    s.add_argument("--ub", type=float)
    s.add_argument("--trace", action="store_true", help="stream iterations as CSV to stderr")
    s.add_argument("--pretty", action="store_true")
    solver_flags(s)
    s.set_defaults(func=cmd_solve)

    b = sub.add_parser("bench", help="run the variant x rule grid")
    b.add_argument("instances", nargs="+", help="instance files or glob patterns")
    b.add_argument("--variants", type=lambda x: _choices(x, VARIANTS), default=list(VARIANTS))
    b.add_argument("--rules", type=lambda x: _choices(x, RULES), default=["R1"])
    b.add_argument("--jobs", type=int, default=1)
    b.add_argument("--out", help="CSV path; gap tables go next to it as .md")
    b.add_argument("--no-timing", action="store_true",
                   help="leave wall_time_s empty so output is byte-reproducible")
    solver_flags(b)
    b.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
