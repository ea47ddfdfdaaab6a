"""Exception types shared across the package.

Two failure families are kept apart because the CLI maps them to different
exit codes: bad arguments or malformed inputs (:class:`UsageError`) versus
mathematical preconditions that do not hold for the given data
(:class:`PositivityError`).  Solver non-convergence gets its own type so the
failing iterate can be inspected.
"""

from __future__ import annotations


class UsageError(ValueError):
    """Malformed call: dimension mismatch, bad range, unknown option."""


class PositivityError(ValueError):
    """A positivity precondition fails (e.g. a base metric is not positive
    definite); the message names the offending eigenvalue or node."""


class SolverError(RuntimeError):
    """Monge-Ampere solve failed; carries the last iterate and residual."""

    def __init__(self, message, iterate=None, residual=None):
        super().__init__(message)
        self.iterate = iterate
        self.residual = residual
