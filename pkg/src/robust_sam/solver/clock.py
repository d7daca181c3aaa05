"""Time sources used for budgets and reported run times.

``WallClock`` and ``CpuClock`` measure real time. ``WorkClock`` is a
deterministic stand-in that advances a fixed amount per branch-and-bound
node, which makes every time-limited decision reproducible.
"""
from __future__ import annotations

import time


class WallClock:
    name = "wall"

    def now(self) -> float:
        return time.monotonic()

    def charge(self, nodes: int = 1) -> None:
        pass


class CpuClock(WallClock):
    name = "cpu"

    def now(self) -> float:
        return time.process_time()


class WorkClock:
    name = "work"

    def __init__(self, seconds_per_node: float = 1e-3):
        self.seconds_per_node = seconds_per_node
        self._ticks = 0

    def now(self) -> float:
        return self._ticks * self.seconds_per_node

    def charge(self, nodes: int = 1) -> None:
        self._ticks += nodes


def make_clock(kind: str = "wall", **kwargs):
    kinds = {"wall": WallClock, "cpu": CpuClock, "work": WorkClock}
    try:
        return kinds[kind](**kwargs)
    except KeyError:
        raise ValueError(f"unknown clock {kind!r}; expected one of {sorted(kinds)}") from None


DEFAULT_CLOCK = WallClock()
