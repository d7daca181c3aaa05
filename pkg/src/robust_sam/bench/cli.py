"""``bench`` command line: run sweeps, draw plots, print the variant table."""
from __future__ import annotations

import argparse
import logging
import sys

from .config import BenchConfig
from .plots import DEFAULT_GROUP_BY, emit_performance_plot
from .runner import ERROR, run_benchmark
from .table import emit_variant_table


def _run(args) -> int:
    cfg = BenchConfig.load(args.config)
    if args.workers:
        cfg.workers = args.workers
    path, rows = run_benchmark(cfg, args.out)
    errors = sum(r["status"] == ERROR for r in rows)
    print(f"wrote {len(rows)} rows to {path} ({errors} errors)")
    return 1 if errors else 0


def _plot(args) -> int:
    for p in emit_performance_plot(args.csv, args.out, tuple(args.group_by)):
        print(p)
    return 0


def _table(args) -> int:
    print(emit_variant_table(args.csv))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bench", description="Scenario-addition benchmark harness")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a benchmark sweep")
    run.add_argument("--config", required=True)
    run.add_argument("--out", help="CSV path (default: <output_dir>/results.csv)")
    run.add_argument("--workers", type=int)
    run.set_defaults(func=_run)
    plot = sub.add_parser("plot", help="write SVG performance plots")
    plot.add_argument("--csv", required=True)
    plot.add_argument("--out", required=True)
    plot.add_argument("--group-by", nargs="+", default=list(DEFAULT_GROUP_BY))
    plot.set_defaults(func=_plot)
    table = sub.add_parser("table", help="print the ASBP variant table")
    table.add_argument("--csv", required=True)
    table.set_defaults(func=_table)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (OSError, ValueError) as exc:
        print(f"bench: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
