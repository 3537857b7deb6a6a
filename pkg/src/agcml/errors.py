"""Exception types shared across the package.

The CLI maps UsageError (and argparse failures) to exit code 2 and
DataError subclasses to exit code 3; everything else is a bug.
"""


class UsageError(ValueError):
    """Caller passed arguments that can never be valid (bad axis, bad range)."""


class ContractViolation(RuntimeError):
    """An internal invariant was broken; indicates a programming error."""


class FrozenAgcError(ContractViolation):
    """Attempted to step an AGC loop whose index is already frozen."""


class DataError(RuntimeError):
    """Input data exists but cannot be used (bad format, missing stage output)."""


class StageDependencyError(DataError):
    """A pipeline stage was invoked before the stage it consumes."""


class CoverageError(DataError):
    """A generator band has no matching pool entries to draw from."""


class ModelFormatError(DataError):
    """A persisted model file is present but malformed."""


class DivergenceError(DataError):
    """Training produced a non-finite loss."""


class SizingError(UsageError):
    """A split or window request does not fit the available packet count."""
