"""Performance plots: cumulative share of solved runs against log10 runtime."""
from __future__ import annotations

import math
import warnings
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .runner import SOLVED, read_csv  # noqa: E402

MIN_TIME = 1e-3  # keeps log10 finite for instantaneous runs
DEFAULT_GROUP_BY = ("target_gap", "size")


def performance_curve(times: list[float], solved: list[bool]) -> tuple[list[float], list[float]]:
    """Step vertices (log10 t, percent solved) for one strategy.

    The curve starts at 0% at the earliest solve time and rises by 100/n at
    every solved run, n counting all runs including unsolved ones.
    """
    n = len(times)
    if n == 0:
        return [], []
    xs = sorted(math.log10(max(t, MIN_TIME)) for t, ok in zip(times, solved) if ok)
    if not xs:
        return [], []
    px, py = [xs[0]], [0.0]
    for i, x in enumerate(xs, 1):
        px.append(x)
        py.append(100.0 * i / n)
    return px, py


def _group_label(keys, values) -> str:
    return "_".join(f"{k}={v}" for k, v in zip(keys, values))


def emit_performance_plot(csv_path: str | Path, out_dir: str | Path,
                          group_by: tuple[str, ...] = DEFAULT_GROUP_BY) -> list[Path]:
    """One SVG per group; each variant is drawn as a step curve."""
    rows = read_csv(csv_path)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    groups: dict[tuple, list[dict]] = defaultdict(list)
    for r in rows:
        groups[tuple(r[k] for k in group_by)].append(r)
    written = []
    plt.rcParams["svg.hashsalt"] = "bench"
    for key in sorted(groups):
        usable = [r for r in groups[key] if r["status"] != "error"]
        label = _group_label(group_by, key)
        if not usable:
            warnings.warn(f"group {label} has no usable runs; plot omitted", stacklevel=2)
            continue
        limit = max(float(r["time_limit"]) for r in usable)
        x_right = math.log10(max(limit, MIN_TIME))
        by_variant: dict[str, list[dict]] = defaultdict(list)
        for r in usable:
            by_variant[r["variant"]].append(r)
        fig, ax = plt.subplots(figsize=(6, 4))
        for variant in sorted(by_variant):
            vr = by_variant[variant]
            xs, ys = performance_curve([float(r["total_time"]) for r in vr], [r["status"] == SOLVED for r in vr])
            if not xs:
                xs, ys = [math.log10(MIN_TIME)], [0.0]
            xs, ys = xs + [max(x_right, xs[-1])], ys + [ys[-1]]
            ax.step(xs, ys, where="post", label=variant)
        ax.set_xlabel("log10 total runtime [s]")
        ax.set_ylabel("solved runs [%]")
        ax.set_ylim(-2, 102)
        ax.set_title(label)
        ax.legend()
        path = out_dir / f"perf_{label}.svg"
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
        written.append(path)
    return written
