import math


class GapInconsistencyError(ValueError):
    """Lower bound exceeds upper bound beyond tolerance."""


def relative_gap(ub: float, lb: float, tol: float = 1e-9) -> float:
    """Relative optimality gap ``(ub - lb) / ub`` for non-negative objectives.

    ``lb`` slightly above ``ub`` (by at most ``tol``, relative to
    ``max(1, |ub|)``) is clamped to ``ub``. ``ub == 0`` gives 0, an infinite
    ``ub`` or a ``lb`` of ``-inf`` gives 1.
    """
    if math.isnan(ub) or math.isnan(lb):
        raise ValueError("bounds must not be NaN")
    if lb == -math.inf or ub == math.inf:
        return 1.0
    if lb > ub:
        if lb - ub > tol * max(1.0, abs(ub)):
            raise GapInconsistencyError(f"lower bound {lb} exceeds upper bound {ub}")
        lb = ub
    if lb < 0:
        if lb > -tol:
            lb = 0.0
        else:
            raise ValueError(f"relative gap needs a non-negative lower bound, got {lb}")
    if ub == 0:
        return 0.0
    return (ub - lb) / ub
