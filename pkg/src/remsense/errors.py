"""Exception types raised across the package.

Everything derives from :class:`RemSenseError` so callers can catch the
package's failures with a single except clause.  Errors that indicate bad
input data additionally derive from ``ValueError``.
"""


class RemSenseError(Exception):
    """Base class for all errors raised by this package."""


class RangeError(RemSenseError, ValueError):
    """A coordinate or physical quantity is outside its valid range."""


class DegenerateLink(RemSenseError, ValueError):
    """Transmitter and receiver coincide; link geometry is undefined."""


class InsufficientData(RemSenseError, ValueError):
    """Too few samples (or bins) to carry out the requested estimate."""


class FitDiverged(RemSenseError):
    """Model fit ended with a residual too large to trust."""


class NoNeighbors(RemSenseError):
    """No sample falls inside the prediction radius around the target."""


class SingularSystem(RemSenseError):
    """A linear system could not be solved, even after a jitter retry."""


class DuplicateLocations(RemSenseError, ValueError):
    """Two samples share a location in a context that forbids it.

    Attributes:
        first, second: identifiers (``seq`` values) of the offending pair.
    """

    def __init__(self, first, second, message=None):
        self.first = first
        self.second = second
        if message is None:
            message = (
                f"samples {first} and {second} share a location; "
                "add measurement noise (sigma_gp > 0) or drop one"
            )
        super().__init__(message)


class TooManyPoints(RemSenseError, ValueError):
    """Point count exceeds the dense-factorization limit."""


class DegenerateExtent(RemSenseError, ValueError):
    """Samples do not span enough area to lay out a grid."""


class NoSupportedBins(RemSenseError):
    """No direction bin collected enough samples to calibrate."""


class ParseError(RemSenseError, ValueError):
    """A CSV or config document is malformed.

    Attributes:
        line: 1-based line number of the offending row, when known.
    """

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
