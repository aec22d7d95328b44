"""Plot-ready trace of one solver run: iteration, theta, best theta, beta, step."""

import argparse
import csv
import sys

from dcmndp.engine import SolverConfig, run
from dcmndp.instance import GeneratorParams, generate_random


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--nodes", type=int, default=15)
    parser.add_argument("--edges", type=int, default=25)
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--variant", default="SG3")
    parser.add_argument("--rule", default="R1")
    args = parser.parse_args()

    inst = generate_random(GeneratorParams(args.nodes, args.edges, seed=args.seed))
    report = run(inst, SolverConfig.of(args.variant, args.rule))
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(["q", "theta", "best_theta", "beta", "lambda"])
    for r in report.trajectory:
        writer.writerow([r.q, f"{r.theta:.6g}", f"{r.best_theta:.6g}", f"{r.beta:.6g}", f"{r.lam:.6g}"])
    print(f"# ub={report.upper_bound:g} stop={report.stop_reason}", file=sys.stderr)


if __name__ == "__main__":
    main()
