from .backends import BACKENDS, make_session
from .brute import BruteResult, LatticeTooLargeError, brute_force_solve
from .clock import CpuClock, WallClock, WorkClock, make_clock
from .external import ExternalSession, ExternalSolverError
from .highs_backend import HighsSession
from .session import (
    EventKind,
    SessionState,
    SolveEvent,
    SolveParams,
    SolveResult,
    SolveSession,
    SolverError,
    UnboundedModelError,
    open_session,
    solve,
    step,
)

__all__ = [
    "BACKENDS",
    "HighsSession",
    "make_session",
    "BruteResult",
    "CpuClock",
    "EventKind",
    "ExternalSession",
    "ExternalSolverError",
    "LatticeTooLargeError",
    "SessionState",
    "SolveEvent",
    "SolveParams",
    "SolveResult",
    "SolveSession",
    "SolverError",
    "UnboundedModelError",
    "WallClock",
    "WorkClock",
    "brute_force_solve",
    "make_clock",
    "open_session",
    "solve",
    "step",
]
