"""Exception hierarchy for the bias-evaluation engine.

Errors are grouped by how the CLI maps them to exit codes: usage problems
(exit 1) are raised by argument handling, data problems (exit 2) derive from
:class:`DataError`, and :class:`InternalConsistencyError` (exit 3) signals a
bug-grade numerical breach rather than bad input.
"""


class GroundedBiasError(Exception):
    """Base class for all errors raised by this package."""


class DataError(GroundedBiasError):
    """Invalid input data: bad identifiers, malformed files, missing keys."""


class InvalidIdentifier(DataError):
    """Stimulus identifier is empty or collides with the key separator."""


class InvalidTest(DataError):
    """A bias-test definition violates a structural invariant."""


class DimensionMismatch(DataError):
    """Vectors of different dimensions were combined."""


class ZeroVector(DataError):
    """A zero-norm vector reached a similarity computation."""


class EmptyAttributeSet(DataError):
    """An attribute vector set required by a statistic is empty."""


class EmptyTargetSet(DataError):
    """A target vector set required by a statistic is empty."""


class DegenerateVariance(GroundedBiasError):
    """All per-target association values are identical (stddev below 1e-15).

    For the vision-contrast experiment this is a finding in its own right
    (the image category contributes nothing), so callers are expected to
    surface it as a distinguished outcome rather than a crash.
    """


class MissingEmbedding(DataError):
    """One or more stimulus keys could not be resolved in the store."""

    def __init__(self, keys):
        self.keys = sorted(str(k) for k in keys)
        super().__init__("unresolved embedding keys: " + ", ".join(self.keys))


class CategoryMismatch(DataError):
    """A stimulus is used in a group inconsistent with its image labels."""


class Overflow(GroundedBiasError):
    """Exact partition count exceeds the 64-bit range; use sampling."""


class InvalidPlan(DataError):
    """A permutation plan is not executable as specified."""


class BadMagic(DataError):
    """Store file does not start with the expected magic bytes."""


class UnsupportedVersion(DataError):
    """Store file declares a format version this reader does not support."""


class CorruptRecord(DataError):
    """Store file ended or became unreadable mid-record."""

    def __init__(self, message, offset):
        self.offset = offset
        super().__init__(f"{message} (at byte offset {offset})")


class InvariantViolation(DataError):
    """Store content violates a load-time invariant (NaN, zero norm, ...)."""

    def __init__(self, message, keys=()):
        self.keys = sorted(keys)
        if self.keys:
            message = f"{message}: " + ", ".join(self.keys)
        super().__init__(message)


class SchemaError(DataError):
    """Spec document is malformed; carries the path to the offending field."""

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")


class DanglingReference(DataError):
    """Spec references an image id absent from its image manifest."""


class InternalConsistencyError(GroundedBiasError):
    """Numerical result outside tolerances that only a bug can explain."""
