"""Session factory keyed by backend name."""
from __future__ import annotations

from ..mip.model import Assignment, Model
from .external import ExternalSession
from .highs_backend import HighsSession
from .session import SolveParams, SolveSession

BACKENDS = {"embedded": SolveSession, "highs": HighsSession, "external": ExternalSession}


def make_session(model: Model, params: SolveParams | None = None, start: Assignment | None = None,
                 backend: str = "embedded"):
    try:
        cls = BACKENDS[backend]
    except KeyError:
        raise ValueError(f"unknown backend {backend!r}; expected one of {sorted(BACKENDS)}") from None
    return cls(model, params, start)
