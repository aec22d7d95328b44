"""Run every direction/step-rule pair on the desk set and print the gap/CPU tables.

Writes results/grid.csv and results/tables.md. Takes a few minutes on one core.
"""

import argparse
import time
from pathlib import Path

from dcmndp.bench import desk_set, gap_tables, render_markdown, rows_to_csv, run_grid
from dcmndp.engine import RULES, VARIANTS


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", default="results")
    parser.add_argument("--jobs", type=int, default=1,
                        help="parallel workers; distorts CPU columns if > cores")
    parser.add_argument("--max-stall", type=int, default=100)
    parser.add_argument("--limit", type=int, help="use only the first N desk instances")
    args = parser.parse_args()

    instances = desk_set()[: args.limit]
    start = time.perf_counter()
    rows = run_grid(instances, VARIANTS, RULES, jobs=args.jobs, max_stall=args.max_stall)
    print(f"{len(rows)} runs in {time.perf_counter() - start:.1f} s\n")

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "grid.csv").write_text(rows_to_csv(rows))
    tables = render_markdown(gap_tables(rows))
    (out / "tables.md").write_text(tables)
    print(tables)


if __name__ == "__main__":
    main()
