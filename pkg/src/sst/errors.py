"""Exception hierarchy shared by all modules.

Two broad families matter for the CLI exit codes: problems with the
caller's input (``InputError``, exit 1) and failures of a solver on a
well-formed input (``SolverError``, exit 2).
"""


class SstError(Exception):
    """Base class for all package errors."""


class InputError(SstError):
    """The caller supplied an invalid or unsupported input."""


class InvalidSpecError(InputError):
    """A structure descriptor violates its invariants (bad k, malformed graph, ...)."""


class DimensionMismatchError(InputError):
    """A vector does not have the embedding dimension required by its structure."""


class UnsupportedPairError(InputError):
    """The requested (structure, regularizer) combination has no solver."""


class UnsupportedFamilyError(InputError):
    """The requested operation is not defined for this noise family."""


class OutOfSupportError(InputError):
    """A density was evaluated at a point outside the family's support."""


class EnumerationLimitError(InputError):
    """The vertex set is larger than the caller-supplied enumeration guard."""


class SolverError(SstError):
    """A solver failed on a structurally valid instance."""


class InfeasibleStructureError(SolverError):
    """The structure has no feasible point (disconnected graph, no arborescence)."""


class ConvergenceError(SolverError):
    """An iterative solver did not reach its tolerance within max_iter."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class NumericalError(SolverError):
    """A computation lost validity (singular matrix, overflow)."""
