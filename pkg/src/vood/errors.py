"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: configuration/format problems exit 2,
runtime/numeric failures exit 1.
"""


class VoodError(Exception):
    """Base class for all package errors."""


class ShapeError(VoodError):
    """Operand shapes are incompatible with the requested operation."""


class DomainError(VoodError):
    """Values outside an operation's mathematical domain (log of a
    nonpositive number, mixing coefficient outside [0, 1], metrics on a
    single-class sample set, ...)."""


class ConfigError(VoodError):
    """Inconsistent configuration: missing auxiliary class, unknown
    detector or scheme names, mismatched stats, bad experiment files."""


class NumericError(VoodError):
    """Numeric failure at runtime (non-finite gradient, covariance still
    singular after shrinkage)."""


class TapeError(VoodError):
    """Misuse of the gradient tape (loss not recorded, non-scalar loss)."""


class CheckpointFormatError(ConfigError):
    """Checkpoint file violates the binary layout or version contract."""


class IdxFormatError(ConfigError):
    """IDX container violates the binary format contract."""


class IdxBadMagicError(IdxFormatError):
    """IDX file starts with the wrong magic number."""


class IdxTruncatedError(IdxFormatError):
    """IDX payload is shorter than its header promises."""


class IdxCountMismatchError(IdxFormatError):
    """Image and label files disagree on the number of items."""
