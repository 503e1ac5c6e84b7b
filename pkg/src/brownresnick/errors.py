"""Exception hierarchy shared across the package."""


class BrownResnickError(Exception):
    """Base class for all library errors."""


class AnchorCoincident(BrownResnickError):
    """The variogram anchor coincides with a site location."""


class NotPositiveDefinite(BrownResnickError):
    """A covariance matrix failed its Cholesky factorization."""


class DimensionTooLarge(BrownResnickError):
    """An exhaustive enumeration was requested above its feasibility guard."""


class PartitionMismatch(BrownResnickError):
    """A partition's ground set does not match the observed indices."""


class GroundMismatch(BrownResnickError):
    """Two partitions do not share the same ground set."""


class EmptyBlock(BrownResnickError):
    """A partial derivative was requested for an empty index block."""


class EmptyDays(BrownResnickError):
    """An occurrence record carries no occurrence days."""


class OutOfSupport(BrownResnickError):
    """A value lies outside the GEV support; the likelihood treats this as -inf."""


class ShapeTooLarge(BrownResnickError):
    """The GEV mean is undefined because the shape parameter is >= 1."""


class NonConvergence(BrownResnickError):
    """A numerical fit failed to converge after its restart schedule."""


class ConfigInvalid(BrownResnickError):
    """A run configuration violates its constraints."""


class ParseError(BrownResnickError):
    """A data file failed to parse.

    Carries the offending 1-based line number when known.
    """

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class SchemaError(BrownResnickError):
    """A data file is missing required columns or is structurally unusable."""
