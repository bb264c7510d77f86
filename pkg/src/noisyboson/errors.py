"""Exception types shared across the package.

The command line front end maps these onto exit codes: configuration and
input problems (the ``ValueError`` family below) exit with code 2, broken
numerical invariants exit with code 1.
"""


class DimensionError(ValueError):
    """Matrix or index-set shape does not match what the operation needs."""


class DomainError(ValueError):
    """A parameter lies outside the admissible range of the formula."""


class DeskScaleError(ValueError):
    """Refusal guard: the requested size would exceed the intended
    desk-scale cost envelope (exponential or factorial blowup)."""


class MatrixFormatError(ValueError):
    """Matrix JSON payload is malformed; the message carries line/field
    diagnostics."""


class InternalConsistencyError(RuntimeError):
    """A numerical invariant that should hold by construction was violated
    (e.g. a probability more negative than rounding can explain)."""
