"""Exception types shared across the package."""


class TvflowError(Exception):
    """Base class for all library errors."""


class NonpositiveParameter(TvflowError):
    """A measure, weight, length, radius or step was not strictly positive."""


class DisconnectedGraph(TvflowError):
    """The edge list does not connect all vertices."""


class UnknownVertex(TvflowError):
    """A vertex id does not belong to the space."""


class AntisymmetryViolated(TvflowError):
    """An edge field is not antisymmetric."""


class InvalidParameter(TvflowError):
    """A parameter is outside its admissible range."""


class GridMismatch(TvflowError):
    """Two space-time objects live on different grids or spaces."""


class MaxIterationsExceeded(TvflowError):
    """A solver ran out of iterations before reaching its certificate."""


class InadmissibleTestFunction(TvflowError):
    """A perturbation violates the boundary or initial constraints."""


class IntervalOutOfRange(TvflowError):
    """A time interval is not node-aligned or lies outside [0, T]."""


class RingViolation(TvflowError):
    """A comparison map does not match the datum on the boundary ring."""


class SupportViolation(TvflowError):
    """A perturbation is not compactly supported in the cylinder."""


class DataNotOrdered(TvflowError):
    """Comparison data are not vertexwise ordered."""


class InvalidOrder(TvflowError):
    """Two-point data must be passed as (larger, smaller)."""


class DimensionTooLarge(TvflowError):
    """Brute-force search is limited to a handful of variables."""


class ParseError(TvflowError):
    """An input file could not be parsed."""


class ValidationError(TvflowError):
    """Parsed input violates a structural invariant."""
