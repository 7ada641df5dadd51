"""Exception types shared across the package.

Each class maps to a distinct CLI exit code (see cli.py), so numerical
guards can be told apart from configuration problems in scripts.
"""


class PhasefockError(Exception):
    """Base class for all package errors."""


class DimensionMismatchError(PhasefockError, ValueError):
    """Operands built over incompatible bases or phase spaces."""


class ConfigSchemaError(PhasefockError, ValueError):
    """Experiment configuration violates the schema."""


class TruncationError(PhasefockError, RuntimeError):
    """Tail mass above the guard threshold: the Fock cutoff is too small
    for the requested displacement or evolution."""


class SolverError(PhasefockError, RuntimeError):
    """An iterative or linear solver failed to converge."""


class NormalizationError(PhasefockError, ValueError):
    """A state that must be normalized is not."""
