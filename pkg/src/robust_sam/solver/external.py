"""Adapter that runs a user-supplied MIP solver binary behind the session contract.

The command comes from ``ROBUST_SAM_SOLVER_CMD`` (or an explicit argument) and
is a template with the placeholders ``{lp}``, ``{sol}``, ``{start}``,
``{time_limit}``, ``{gap}`` and ``{seed}``. Each :meth:`step` re-invokes the
solver with the remaining budget and the best known solution as a MIP start.

Solution files are read by a parser plug-in selected with
``ROBUST_SAM_SOLVER_FORMAT``:

``simple``
    ``status <optimal|infeasible|feasible|unknown>``, ``objective <v>`` and
    ``bound <v>`` lines, followed by ``<var-name> <value>`` lines.
``highs``
    The text written by HiGHS' ``writeSolution``.
"""
from __future__ import annotations

import math
import os
import shlex
import subprocess
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from ..mip.lpfile import fmt_number, lp_names, write_lp
from ..mip.model import Assignment, Model, check_feasible, evaluate
from .clock import DEFAULT_CLOCK
from .session import (
    IMPROVEMENT_EPS, EventKind, SessionState, SolveEvent, SolveParams, gap_closed,
    trivial_lower_bound,
)

CMD_ENV = "ROBUST_SAM_SOLVER_CMD"
FORMAT_ENV = "ROBUST_SAM_SOLVER_FORMAT"


class ExternalSolverError(RuntimeError):
    pass


@dataclass
class ParsedSolution:
    status: str  # optimal, infeasible, feasible or unknown
    objective: float = math.inf
    bound: float = -math.inf
    values: dict[str, float] = field(default_factory=dict)


def parse_simple(text: str) -> ParsedSolution:
    out = ParsedSolution("unknown")
    for line in text.splitlines():
        parts = line.split()
        if len(parts) != 2:
            continue
        key, value = parts
        if key == "status":
            out.status = value.lower()
        elif key == "objective":
            out.objective = float(value)
        elif key == "bound":
            out.bound = float(value)
        else:
            out.values[key] = float(value)
    return out


def parse_highs(text: str) -> ParsedSolution:
    lines = text.splitlines()
    out = ParsedSolution("unknown")
    status = lines[1].strip().lower() if len(lines) > 1 else ""
    if status == "optimal":
        out.status = "optimal"
    elif status == "infeasible":
        out.status = "infeasible"
        return out
    i = 0
    while i < len(lines):
        line = lines[i]
        if line.startswith("Objective"):
            out.objective = float(line.split()[1])
        elif line.startswith("# Columns"):
            for row in lines[i + 1:i + 1 + int(line.split()[2])]:
                name, value = row.split()[:2]
                out.values[name] = float(value)
            break
        i += 1
    if out.values and out.status == "unknown":
        out.status = "feasible"
    if out.status == "optimal":
        out.bound = out.objective
    return out


PARSERS: dict[str, Callable[[str], ParsedSolution]] = {"simple": parse_simple, "highs": parse_highs}


class ExternalSession:
    """Same observable contract as :class:`~.session.SolveSession`."""

    def __init__(self, model: Model, params: SolveParams | None = None, start: Assignment | None = None,
                 command: str | None = None, fmt: str | None = None):
        self.model = model
        self.params = params or SolveParams()
        self.clock = self.params.clock or DEFAULT_CLOCK
        self.command = command or os.environ.get(CMD_ENV)
        if not self.command:
            raise ExternalSolverError(f"no solver command given and {CMD_ENV} is unset")
        fmt = fmt or os.environ.get(FORMAT_ENV, "simple")
        if fmt not in PARSERS:
            raise ExternalSolverError(f"unknown solution format {fmt!r}; expected one of {sorted(PARSERS)}")
        self.parser = PARSERS[fmt]
        self.ub = math.inf
        self.lb = trivial_lower_bound(model)
        self.incumbent: np.ndarray | None = None
        self.elapsed = 0.0
        self.nodes = 0
        self.state = SessionState.FRESH
        self._terminal: SolveEvent | None = None
        self._names = lp_names([v.name for v in model.vars], "v")
        self._dir = tempfile.TemporaryDirectory(prefix="robust_sam_")
        self._lp = Path(self._dir.name) / "model.lp"
        write_lp(model, self._lp)
        if start is not None:
            self.offer(start)

    @property
    def finished(self) -> bool:
        return self.state is SessionState.FINISHED

    def offer(self, values: Assignment) -> bool:
        values = np.asarray(values, dtype=float)
        if not check_feasible(self.model, values):
            return False
        obj = evaluate(self.model.objective, values)
        if obj < self.ub - IMPROVEMENT_EPS:
            self.ub, self.incumbent = obj, values.copy()
            return True
        return False

    def close(self) -> None:
        self._dir.cleanup()

    def _finish(self, kind: EventKind) -> SolveEvent:
        if kind is EventKind.OPTIMAL:
            self.lb = self.ub
        elif kind is EventKind.INFEASIBLE:
            self.ub = self.lb = math.inf
        self.state = SessionState.FINISHED
        self._terminal = SolveEvent(kind, self.ub)
        return self._terminal

    def _write_start(self, path: Path) -> None:
        with open(path, "w") as fh:
            for name, value in zip(self._names, self.incumbent):
                fh.write(f"{name} {fmt_number(value)}\n")

    def step(self, budget: float = math.inf) -> SolveEvent:
        if not budget > 0:
            raise ValueError("budget must be positive")
        if self._terminal is not None:
            return self._terminal
        remaining = self.params.time_limit - self.elapsed
        if remaining <= 0:
            return self._finish(EventKind.TIME_LIMIT)
        limit = min(budget, remaining)
        sol = Path(self._dir.name) / "model.sol"
        start = Path(self._dir.name) / "start.sol"
        if self.incumbent is not None:
            self._write_start(start)
        elif start.exists():
            start.unlink()
        if sol.exists():
            sol.unlink()
        cmd = self.command.format(lp=self._lp, sol=sol, start=start if self.incumbent is not None else "",
                                  time_limit=fmt_number(limit) if limit < math.inf else "inf",
                                  gap=fmt_number(self.params.target_gap), seed=self.params.seed)
        t0 = self.clock.now()
        proc = subprocess.run(shlex.split(cmd), capture_output=True, text=True)
        self.elapsed += self.clock.now() - t0
        self.nodes += 1
        self.clock.charge(1)
        if proc.returncode != 0 or not sol.exists():
            raise ExternalSolverError(f"solver failed ({proc.returncode}): {proc.stderr.strip()[:500]}")
        parsed = self.parser(sol.read_text())
        if parsed.status == "infeasible":
            return self._finish(EventKind.INFEASIBLE)
        old_ub, old_lb = self.ub, self.lb
        if parsed.values:
            index = {name: i for i, name in enumerate(self._names)}
            x = np.zeros(self.model.num_vars)
            for name, value in parsed.values.items():
                if name in index:
                    x[index[name]] = value
            self.offer(x)
        if parsed.bound > self.lb and parsed.bound > -math.inf:
            self.lb = min(parsed.bound, self.ub)
        if parsed.status == "optimal" and self.incumbent is not None:
            return self._finish(EventKind.OPTIMAL)
        if self.params.target_gap > 0 and gap_closed(self.ub, self.lb, self.params.target_gap):
            return self._finish(EventKind.GAP_REACHED)
        if self.elapsed >= self.params.time_limit:
            return self._finish(EventKind.TIME_LIMIT)
        self.state = SessionState.PAUSED
        if self.ub < old_ub - IMPROVEMENT_EPS:
            return SolveEvent(EventKind.INCUMBENT_IMPROVED, self.ub)
        if self.lb > old_lb + IMPROVEMENT_EPS:
            return SolveEvent(EventKind.BOUND_IMPROVED, self.lb)
        return SolveEvent(EventKind.TIME_LIMIT, self.ub)
