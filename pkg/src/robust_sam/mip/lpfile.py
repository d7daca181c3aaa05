"""CPLEX LP file writer.

Output is byte-stable: names are sanitized to ``[A-Za-z0-9_]`` (made unique
by suffixing the variable id on collision) and every number is printed with
17 significant digits so that it round-trips exactly.
"""
from __future__ import annotations

import io
import math
import re
from pathlib import Path

from .model import Domain, LinearExpr, Model, Sense

_BAD = re.compile(r"[^A-Za-z0-9_]")
_SENSE = {Sense.LE: "<=", Sense.EQ: "=", Sense.GE: ">="}


def fmt_number(x: float) -> str:
    if x == math.inf:
        return "+inf"
    if x == -math.inf:
        return "-inf"
    return format(float(x), ".17g")


def sanitize(name: str) -> str:
    clean = _BAD.sub("_", name) or "_"
    if clean[0].isdigit():
        clean = "_" + clean
    return clean


def lp_names(names: list[str], prefix: str) -> list[str]:
    """Sanitized, unique names; collisions get ``_<prefix><index>`` appended."""
    seen: set[str] = set()
    out = []
    for i, name in enumerate(names):
        clean = sanitize(name)
        if clean in seen:
            clean = f"{clean}_{prefix}{i}"
        seen.add(clean)
        out.append(clean)
    return out


def _terms(expr: LinearExpr, names: list[str]) -> str:
    if not expr.terms:
        return f"0 {names[0]}"
    parts = []
    for k, (var, coef) in enumerate(expr.terms.items()):
        sign = "-" if coef < 0 else "+"
        mag = fmt_number(abs(coef))
        if k == 0:
            parts.append(f"{'-' if coef < 0 else ''}{mag} {names[var]}")
        else:
            parts.append(f"{sign} {mag} {names[var]}")
    return " ".join(parts)


def write_lp(m: Model, target: str | Path | io.TextIOBase | None = None) -> str:
    """Serialize ``m`` in LP format; returns the text and optionally writes it."""
    m.validate()
    vnames = lp_names([v.name for v in m.vars], "v")
    cnames = lp_names([c.name for c in m.constraints], "c")
    out = io.StringIO()
    out.write(f"\\ {sanitize(m.name or 'model')}\n")
    out.write("Minimize\n")
    obj = _terms(m.objective, vnames)
    if m.objective.constant != 0.0:
        c = m.objective.constant
        obj += f" {'-' if c < 0 else '+'} {fmt_number(abs(c))}"
    out.write(f" obj: {obj}\n")
    out.write("Subject To\n")
    for con, cname in zip(m.constraints, cnames):
        out.write(f" {cname}: {_terms(con.expr, vnames)} {_SENSE[con.sense]} {fmt_number(con.rhs)}\n")
    out.write("Bounds\n")
    for v, vname in zip(m.vars, vnames):
        if v.domain is Domain.BINARY:
            continue
        if v.lower == -math.inf and v.upper == math.inf:
            out.write(f" {vname} free\n")
        elif v.lower == 0.0 and v.upper == math.inf:
            continue
        else:
            out.write(f" {fmt_number(v.lower)} <= {vname} <= {fmt_number(v.upper)}\n")
    generals = [n for v, n in zip(m.vars, vnames) if v.domain is Domain.INTEGER]
    binaries = [n for v, n in zip(m.vars, vnames) if v.domain is Domain.BINARY]
    if generals:
        out.write("General\n")
        for name in generals:
            out.write(f" {name}\n")
    if binaries:
        out.write("Binary\n")
        for name in binaries:
            out.write(f" {name}\n")
    out.write("End\n")
    text = out.getvalue()
    if isinstance(target, (str, Path)):
        Path(target).write_text(text)
    elif target is not None:
        target.write(text)
    return text
