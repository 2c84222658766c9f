"""Error taxonomy shared across the package.

Argument errors are plain ``ValueError``; the classes below mark conditions
that callers (notably the CLI) treat differently from bad arguments.
"""

from __future__ import annotations


class CapacityError(RuntimeError):
    """An enumeration guard was exceeded (alphabet product, codebook size, ...)."""


class NumericError(ArithmeticError):
    """A numeric-consistency guard failed (negative information beyond noise,
    ill-conditioned covariance, non-positive determinant, ...)."""


class InfeasibleError(RuntimeError):
    """No feasible point was found for the requested constraints.

    Carries the best (least-distortion) candidate seen, so callers can report
    how far the search landed from feasibility.
    """

    def __init__(self, message: str, best=None):
        super().__init__(message)
        self.best = best
