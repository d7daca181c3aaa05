"""Variant table: mean runtime and solved count per cell and ASBP variant.

Unsolved runs count at the time limit in the mean.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from statistics import mean

from .config import VARIANT_PRESETS
from .runner import SOLVED, read_csv

VARIANT_COLUMNS = tuple(VARIANT_PRESETS)
CELL_KEYS = ("target_gap", "size", "scenarios")


@dataclass(frozen=True)
class Cell:
    average: float
    solved: int
    runs: int


def cell_stats(times: list[float], solved: list[bool], limit: float) -> Cell:
    charged = [t if ok else limit for t, ok in zip(times, solved)]
    return Cell(mean(charged), sum(solved), len(times))


def variant_table(rows: list[dict], variants: tuple[str, ...] = VARIANT_COLUMNS):
    """Returns ``(cells, overall)``: cells maps a cell key to {variant: Cell}."""
    rows = [r for r in rows if r["strategy"] == "ASBP"]
    present = {r["variant"] for r in rows}
    missing = [v for v in variants if v not in present]
    if missing:
        raise ValueError(f"variant columns missing from results: {missing}")
    grouped: dict[tuple, dict[str, list[dict]]] = defaultdict(lambda: defaultdict(list))
    for r in rows:
        if r["variant"] in variants:
            grouped[tuple(r[k] for k in CELL_KEYS)][r["variant"]].append(r)
    cells = {}
    for key in sorted(grouped, key=lambda k: tuple(float(v) for v in k)):
        cells[key] = {}
        for v in variants:
            runs = grouped[key].get(v, [])
            if not runs:
                raise ValueError(f"cell {dict(zip(CELL_KEYS, key))} has no runs for variant {v}")
            limit = float(runs[0]["time_limit"])
            cells[key][v] = cell_stats([float(r["total_time"] or limit) for r in runs],
                                       [r["status"] == SOLVED for r in runs], limit)
    overall = {v: (mean(c[v].average for c in cells.values()), mean(c[v].solved for c in cells.values()))
               for v in variants}
    return cells, overall


def format_variant_table(cells, overall, variants: tuple[str, ...] = VARIANT_COLUMNS) -> str:
    head = ["gap", "size", "scen"] + [f"{v} avg" for v in variants] + [f"{v} solved" for v in variants]
    lines = [head]
    for key, row in cells.items():
        lines.append(list(key) + [f"{row[v].average:.3f}" for v in variants]
                     + [str(row[v].solved) for v in variants])
    lines.append(["overall", "", ""] + [f"{overall[v][0]:.3f}" for v in variants]
                 + [f"{overall[v][1]:.2f}" for v in variants])
    widths = [max(len(str(line[i])) for line in lines) for i in range(len(head))]
    return "\n".join("  ".join(str(c).rjust(w) for c, w in zip(line, widths)) for line in lines)


def emit_variant_table(csv_path: str | Path, variants: tuple[str, ...] = VARIANT_COLUMNS) -> str:
    cells, overall = variant_table(read_csv(csv_path), variants)
    return format_variant_table(cells, overall, variants)
