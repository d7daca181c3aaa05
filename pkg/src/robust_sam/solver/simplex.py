"""Dense two-phase tableau simplex with Bland's rule.

Meant for the brute-force oracle: tiny LPs, no warm starts, no scaling.
Anti-cycling comes from Bland's rule alone, so the method always terminates.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TOL = 1e-9


@dataclass
class LPResult:
    status: str  # "optimal", "infeasible" or "unbounded"
    x: np.ndarray | None = None
    objective: float = math.nan


def _pivot(tab: np.ndarray, row: int, col: int) -> None:
    tab[row] /= tab[row, col]
    col_vals = tab[:, col].copy()
    col_vals[row] = 0.0
    tab -= np.outer(col_vals, tab[row])


def _run(tab: np.ndarray, basis: list[int], cost: np.ndarray, allowed: np.ndarray) -> str:
    """Minimize ``cost`` from the current basic feasible tableau, in place."""
    ncols = tab.shape[1] - 1
    while True:
        reduced = cost - cost[basis] @ tab[:, :ncols]
        entering = -1
        for j in range(ncols):
            if allowed[j] and reduced[j] < -TOL:
                entering = j
                break
        if entering < 0:
            return "optimal"
        column = tab[:, entering]
        best_row, best_ratio = -1, math.inf
        for i in range(tab.shape[0]):
            if column[i] > TOL:
                ratio = tab[i, -1] / column[i]
                if ratio < best_ratio - TOL or (abs(ratio - best_ratio) <= TOL and basis[i] < basis[best_row]):
                    best_row, best_ratio = i, ratio
        if best_row < 0:
            return "unbounded"
        _pivot(tab, best_row, entering)
        basis[best_row] = entering


def solve_lp(c, A, senses, b, lo, hi) -> LPResult:
    """Minimize ``c @ x`` s.t. ``A[i] @ x (senses[i]) b[i]`` and ``lo <= x <= hi``.

    ``senses`` holds ``"<="``, ``"="`` or ``">="``; bounds may be infinite.
    """
    c = np.asarray(c, dtype=float)
    A = np.asarray(A, dtype=float).reshape(len(b), len(c))
    b = np.asarray(b, dtype=float)
    n = len(c)

    # x = T @ y + offset with y >= 0
    cols: list[np.ndarray] = []
    offset = np.zeros(n)
    extra_rows: list[tuple[int, float]] = []  # (y index, upper bound)
    for j in range(n):
        e = np.zeros(n)
        if lo[j] > -math.inf:
            offset[j] = lo[j]
            e[j] = 1.0
            cols.append(e)
            if hi[j] < math.inf:
                extra_rows.append((len(cols) - 1, hi[j] - lo[j]))
        elif hi[j] < math.inf:
            offset[j] = hi[j]
            e[j] = -1.0
            cols.append(e)
        else:
            e[j] = 1.0
            cols.append(e)
            cols.append(-e)
    T = np.array(cols).T if cols else np.zeros((n, 0))
    ny = T.shape[1]

    rows = [A @ T] if len(b) else []
    rhs = list(b - A @ offset) if len(b) else []
    sense_list = list(senses)
    for k, ub in extra_rows:
        row = np.zeros(ny)
        row[k] = 1.0
        rows.append(row[None, :])
        rhs.append(ub)
        sense_list.append("<=")
    M = np.vstack(rows) if rows else np.zeros((0, ny))
    m = M.shape[0]
    cost_y = c @ T
    const = float(c @ offset)

    if m == 0:
        if np.any(cost_y < -TOL):
            return LPResult("unbounded")
        return LPResult("optimal", offset.copy(), const)

    n_slack = sum(1 for s in sense_list if s != "=")
    ncols = ny + n_slack + m
    tab = np.zeros((m, ncols + 1))
    tab[:, :ny] = M
    k = ny
    for i, s in enumerate(sense_list):
        if s == "<=":
            tab[i, k] = 1.0
            k += 1
        elif s == ">=":
            tab[i, k] = -1.0
            k += 1
        elif s != "=":
            raise ValueError(f"bad sense {s!r}")
    tab[:, -1] = rhs
    neg = tab[:, -1] < 0
    tab[neg] *= -1.0
    art0 = ny + n_slack
    for i in range(m):
        tab[i, art0 + i] = 1.0
    basis = list(range(art0, art0 + m))

    phase1 = np.zeros(ncols)
    phase1[art0:] = 1.0
    allowed = np.ones(ncols, dtype=bool)
    _run(tab, basis, phase1, allowed)
    infeas = float(tab[:, -1] @ phase1[basis])
    scale = max(1.0, float(np.abs(rhs).max()))
    if infeas > 1e-7 * scale:
        return LPResult("infeasible")

    # drive zero-level artificials out of the basis, dropping redundant rows
    keep = []
    for i in range(m):
        if basis[i] >= art0:
            candidates = np.flatnonzero(np.abs(tab[i, :art0]) > TOL)
            if len(candidates):
                j = int(candidates[0])
                _pivot(tab, i, j)
                basis[i] = j
                keep.append(i)
        else:
            keep.append(i)
    tab = tab[keep]
    basis = [basis[i] for i in keep]

    allowed[art0:] = False
    phase2 = np.zeros(ncols)
    phase2[:ny] = cost_y
    if _run(tab, basis, phase2, allowed) == "unbounded":
        return LPResult("unbounded")
    y = np.zeros(ncols)
    for i, j in enumerate(basis):
        y[j] = tab[i, -1]
    x = T @ y[:ny] + offset
    return LPResult("optimal", x, float(c @ x))
