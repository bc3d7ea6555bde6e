"""Exception hierarchy shared by every stage of the pipeline."""

from __future__ import annotations


class MLNError(Exception):
    """Base class for all errors raised by liftedrcr."""


class ParseError(MLNError):
    """Malformed model text. Carries 1-based line and column."""

    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.line = line
        self.column = column
        where = f"line {line}, column {column}: " if line else ""
        super().__init__(where + message)


class ModelError(MLNError):
    """Structurally invalid model (arity, undeclared symbols, typing)."""


class CapacityError(MLNError):
    """A configured size limit (ground atoms, cluster width, world count) was exceeded."""


class InconsistentModelError(MLNError):
    """Every world violates some hard formula, so the distribution is undefined."""


class NotCountNormalizedError(MLNError):
    """An equivalence whose original groundings occur in differing numbers of ground equivalences."""

    def __init__(self, message: str, witness=None):
        self.witness = witness
        super().__init__(message)


class EquivalenceStateError(MLNError):
    """Relax/recover requested on an unknown id or an equivalence already in that state."""
