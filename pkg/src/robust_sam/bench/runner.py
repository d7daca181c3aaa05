"""Benchmark sweep: one engine run per config cell, one CSV row per run."""
from __future__ import annotations

import csv
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from ..engine import RunStatus, SamConfig, run_sam
from .config import BenchConfig, RunSpec

log = logging.getLogger(__name__)

# Schema is frozen; the golden-file test pins it.
COLUMNS = (
    "application", "size", "scenarios", "seed", "repetition", "strategy", "variant", "target_gap",
    "time_limit", "status", "total_time", "certified_gap", "objective_ub", "iterations", "final_D",
    "master_share", "second_stage_share", "error",
)
TIME_COLUMNS = ("total_time", "master_share", "second_stage_share")
SORT_KEY = ("application", "size", "scenarios", "seed", "repetition", "target_gap", "strategy", "variant")
ERROR = "error"
SOLVED = RunStatus.GAP_CERTIFIED.value

RESULTS_FILE = "results.csv"


def build_problem(cfg: BenchConfig, spec: RunSpec):
    if spec.application == "rclrp":
        from ..apps.rclrp import RclrpGenParams, RclrpProblem, generate_rclrp
        params = RclrpGenParams(cfg.warehouses, spec.size, spec.scenarios, instance_number=spec.repetition + 1,
                                base_seed=spec.seed)
        return RclrpProblem(generate_rclrp(params))
    from ..apps.bacasp import BacaspProblem, bacasp_generate
    inst = bacasp_generate(spec.size, seed=1000 * spec.seed + spec.repetition, n_scenarios=spec.scenarios,
                           **cfg.generator)
    return BacaspProblem(inst)


def _fmt_time(t: float) -> str:
    return f"{max(t, 0.0):.3f}"


def _fmt(v: float) -> str:
    v = float(v)
    if abs(v) < 1e-12:
        v = 0.0  # drops rounding residue such as 1e-16 gaps
    return format(v, ".10g")


def execute(cfg: BenchConfig, spec: RunSpec) -> dict:
    row = {k: "" for k in COLUMNS}
    row.update(application=spec.application, size=spec.size, scenarios=spec.scenarios, seed=spec.seed,
               repetition=spec.repetition, strategy=spec.strategy, variant=spec.variant,
               target_gap=_fmt(spec.target_gap), time_limit=_fmt(cfg.time_limit))
    try:
        problem = build_problem(cfg, spec)
        sam = SamConfig(**{**cfg.sam, **spec.toggles, "strategy": spec.strategy, "target_gap": spec.target_gap,
                           "global_time_limit": float(cfg.time_limit)})
        t0 = time.perf_counter()
        res = run_sam(problem, sam)
        wall = time.perf_counter() - t0
    except Exception as exc:  # a failed run becomes a row, never aborts the sweep
        log.exception("run %s failed", spec)
        row.update(status=ERROR, error=f"{type(exc).__name__}: {exc}")
        return row
    # shares are ratios in the run's own clock, so they stay meaningful under the work clock
    total = res.total_time
    share = (lambda t: t / total) if total > 0 else (lambda t: 0.0)
    row.update(status=res.status.value, total_time=_fmt_time(wall), certified_gap=_fmt(res.certified_gap),
               objective_ub=_fmt(res.objective_ub), iterations=res.iterations, final_D=len(res.final_D),
               master_share=_fmt_time(share(res.master_time)),
               second_stage_share=_fmt_time(share(res.second_stage_time)))
    return row


def _sort_value(row: dict, key: str):
    v = row[key]
    return float(v) if key in ("size", "scenarios", "seed", "repetition", "target_gap") else str(v)


def canonical_order(rows: list[dict]) -> list[dict]:
    return sorted(rows, key=lambda r: tuple(_sort_value(r, k) for k in SORT_KEY))


def _single_thread_env() -> None:
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = "1"


def _execute_packed(args):
    return execute(*args)


def run_benchmark(cfg: BenchConfig, out_path: str | Path | None = None) -> tuple[Path, list[dict]]:
    """Run the sweep and write the CSV; returns its path and the rows in canonical order."""
    specs = list(cfg.runs())
    if cfg.workers == 1:
        rows = [execute(cfg, s) for s in specs]
    else:
        with ProcessPoolExecutor(cfg.workers, initializer=_single_thread_env) as pool:
            rows = list(pool.map(_execute_packed, [(cfg, s) for s in specs]))
    rows = canonical_order(rows)
    path = Path(out_path) if out_path else Path(cfg.output_dir) / RESULTS_FILE
    write_csv(path, rows)
    return path, rows


def write_csv(path: str | Path, rows: list[dict]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=COLUMNS, quoting=csv.QUOTE_MINIMAL, lineterminator="\r\n")
        w.writeheader()
        w.writerows(rows)


def read_csv(path: str | Path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = set(COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        return list(reader)
