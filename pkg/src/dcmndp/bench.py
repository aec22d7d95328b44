"""Benchmark harness: (instance, variant, rule) grid, CSV rows, gap tables."""

from __future__ import annotations

import csv
import io
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .engine import InfeasibleInstanceError, SolverConfig, run
from .instance import (
    GeneratorParams,
    Instance,
    InstanceFormatError,
    InstanceValidationError,
    generate_random,
    read_instance,
)

CSV_COLUMNS = (
    "instance", "variant", "rule", "best_lb", "ub", "gap_pct",
    "iterations", "wall_time_s", "stop_reason", "all_y_exact", "seed",
)
ABS_GAP_FLAG = "abs_gap"

# (nodes, edges) of the benchmark random families small enough for a desk run
DESK_SIZES = (
    (10, 15), (15, 20), (15, 25), (15, 30), (20, 35), (20, 40), (20, 45),
    (21, 40), (22, 45), (23, 50), (24, 55), (25, 60), (25, 50),
)


@dataclass
class BenchRow:
    instance: str
    variant: str
    rule: str
    best_lb: float
    ub: float
    gap_pct: float
    iterations: int
    wall_time: float
    stop_reason: str
    all_y_exact: bool
    seed: int | None
    error: str | None = None
    abs_gap: bool = False

    def cells(self, timing: bool = True) -> list[str]:
        if self.error is not None:
            return [self.instance, self.variant, self.rule, "", "", "", "", "",
                    "error", "", _fmt_seed(self.seed)]
        reason = self.stop_reason + ("|" + ABS_GAP_FLAG if self.abs_gap else "")
        return [
            self.instance, self.variant, self.rule,
            fmt(self.best_lb), fmt(self.ub), fmt(self.gap_pct),
            str(self.iterations), fmt(self.wall_time) if timing else "",
            reason, str(self.all_y_exact).lower(), _fmt_seed(self.seed),
        ]


def fmt(x: float) -> str:
    """Locale-independent, 6 significant digits."""
    if x == 0:
        return "0"
    return format(float(x), ".6g")


def _fmt_seed(seed: int | None) -> str:
    return "" if seed is None else str(seed)


def gap_percent(lbs: Sequence[float]) -> tuple[list[float], bool]:
    """Gaps of each bound to the best one, in percent of the best.

    When the best bound is not positive a percentage is meaningless; the
    absolute difference is returned instead and the flag is set.
    """
    best = max(lbs)
    if best <= 0:
        return [best - lb for lb in lbs], True
    return [100.0 * (best - lb) / best for lb in lbs], False


def solve_row(inst: Instance, variant: str, rule: str, **config) -> BenchRow:
    try:
        report = run(inst, SolverConfig.of(variant, rule, **config))
    except InfeasibleInstanceError as exc:
        return BenchRow(inst.name, variant.upper(), rule.upper(), math.nan, math.nan, math.nan,
                        0, 0.0, "error", False, inst.seed, error=str(exc))
    return BenchRow(
        instance=inst.name,
        variant=variant.upper(),
        rule=rule.upper(),
        best_lb=report.best_theta,
        ub=report.upper_bound,
        gap_pct=0.0,
        iterations=report.iterations,
        wall_time=report.wall_time,
        stop_reason=report.stop_reason,
        all_y_exact=report.all_y_exact,
        seed=inst.seed,
    )


def assign_gaps(rows: list[BenchRow]) -> list[BenchRow]:
    """Fill ``gap_pct`` per instance against the best bound among its rows."""
    by_instance: dict[str, list[int]] = {}
    for i, r in enumerate(rows):
        if r.error is None:
            by_instance.setdefault(r.instance, []).append(i)
    out = list(rows)
    for idx in by_instance.values():
        gaps, absolute = gap_percent([rows[i].best_lb for i in idx])
        for i, g in zip(idx, gaps):
            out[i] = replace(rows[i], gap_pct=g, abs_gap=absolute)
    return out


def rows_to_csv(rows: Iterable[BenchRow], timing: bool = True) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in rows:
        writer.writerow(r.cells(timing))
    return buf.getvalue()


# --------------------------------------------------------------------------
# aggregated tables


def instance_class(name: str) -> str:
    """Generated instances are named ``rand-...``; everything else counts as real-world."""
    return "Rand." if name.startswith("rand") else "Real."


@dataclass
class GapTable:
    title: str
    columns: list[str]
    gap: dict[str, list[float]] = field(default_factory=dict)
    cpu: dict[str, list[float]] = field(default_factory=dict)


def _table(title: str, rows: list[BenchRow], key, columns: list[str]) -> GapTable:
    table = GapTable(title, columns)
    per_instance: dict[str, dict[str, BenchRow]] = {}
    for r in rows:
        if r.error is None:
            per_instance.setdefault(r.instance, {})[key(r)] = r
    gap_acc: dict[str, dict[str, list[float]]] = {}
    cpu_acc: dict[str, dict[str, list[float]]] = {}
    for name in sorted(per_instance):
        cells = per_instance[name]
        if any(c not in cells for c in columns):
            continue
        gaps, _ = gap_percent([cells[c].best_lb for c in columns])
        cls = instance_class(name)
        for c, g in zip(columns, gaps):
            gap_acc.setdefault(cls, {}).setdefault(c, []).append(g)
            cpu_acc.setdefault(cls, {}).setdefault(c, []).append(cells[c].wall_time)
    for cls in ("Rand.", "Real."):
        if cls in gap_acc:
            table.gap[cls] = [float(np.mean(gap_acc[cls][c])) for c in columns]
            table.cpu[cls] = [float(np.mean(cpu_acc[cls][c])) for c in columns]
    if table.gap:
        table.gap["Aver."] = [float(np.mean(col)) for col in zip(*table.gap.values())]
        table.cpu["Aver."] = [float(np.mean(col)) for col in zip(*table.cpu.values())]
    return table


def gap_tables(rows: list[BenchRow]) -> list[GapTable]:
    """Variants across columns for each rule, rules across columns for each variant."""
    variants = sorted({r.variant for r in rows})
    rules = sorted({r.rule for r in rows})
    tables = []
    if len(variants) > 1 or len(rules) == 1:
        for rule in rules:
            subset = [r for r in rows if r.rule == rule]
            tables.append(_table(f"using {rule}", subset, lambda r: r.variant, variants))
    if len(rules) > 1:
        for variant in variants:
            subset = [r for r in rows if r.variant == variant]
            tables.append(_table(f"using {variant}", subset, lambda r: r.rule, rules))
    return tables


def render_markdown(tables: Sequence[GapTable], timing: bool = True) -> str:
    out = []
    for t in tables:
        blocks = [("Average GAP (%)", t.gap)]
        if timing:
            blocks.append(("CPU time (sec)", t.cpu))
        for label, data in blocks:
            out.append(f"### {label} {t.title}\n")
            out.append("| Inst. | " + " | ".join(t.columns) + " |")
            out.append("|---" * (len(t.columns) + 1) + "|")
            for cls, values in data.items():
                out.append(f"| {cls} | " + " | ".join(f"{v:.2f}" for v in values) + " |")
            out.append("")
    return "\n".join(out)


# --------------------------------------------------------------------------
# driver


def desk_set() -> list[Instance]:
    """Twenty generated instances: every desk size with seed i, the first
    seven sizes again with seed 100 + i."""
    specs = [(i + 1, n, m, i + 1) for i, (n, m) in enumerate(DESK_SIZES)]
    specs += [(i + 1, n, m, 101 + i) for i, (n, m) in enumerate(DESK_SIZES[:7])]
    return [
        generate_random(GeneratorParams(n, m, 3, seed=seed, name=f"rand-D{k}-s{seed}"))
        for k, n, m, seed in specs
    ]


def _load(path: str) -> Instance | str:
    try:
        return read_instance(path)
    except OSError as exc:
        return f"cannot open {path}: {exc.strerror}"
    except (InstanceFormatError, InstanceValidationError) as exc:
        return f"{path}: {exc}"


def _job(args) -> BenchRow:
    inst, variant, rule, config = args
    return solve_row(inst, variant, rule, **config)


def run_grid(
    instances: Sequence[Instance],
    variants: Sequence[str],
    rules: Sequence[str],
    jobs: int = 1,
    **config,
) -> list[BenchRow]:
    """Like run_bench but on instances already in memory."""
    tasks = [(inst, v, r, config) for inst in instances for v in variants for r in rules]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_job, tasks))
    else:
        rows = [_job(t) for t in tasks]
    return assign_gaps(rows)


def run_bench(
    paths: Sequence[str],
    variants: Sequence[str],
    rules: Sequence[str],
    jobs: int = 1,
    **config,
) -> list[BenchRow]:
    """One row per (instance, variant, rule); order is fixed regardless of ``jobs``."""
    tasks = []
    failed: list[BenchRow] = []
    for path in paths:
        inst = _load(path)
        if isinstance(inst, str):
            print(inst, file=sys.stderr)
            failed.extend(
                BenchRow(Path(path).stem, v.upper(), r.upper(), math.nan, math.nan, math.nan,
                         0, 0.0, "error", False, None, error=inst)
                for v in variants for r in rules
            )
            continue
        tasks.extend((inst, v, r, config) for v in variants for r in rules)

    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_job, tasks))
    else:
        rows = [_job(t) for t in tasks]
    for r in rows:
        if r.error:
            print(f"{r.instance}: {r.error}", file=sys.stderr)
    return assign_gaps(rows + failed)
