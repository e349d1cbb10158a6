"""Exception types raised across the package."""


class AggTollError(Exception):
    """Base class for all package errors."""


class ValidationError(AggTollError, ValueError):
    """An input violates a documented invariant.

    ``field`` carries a dotted path to the offending scenario entry when the
    error originates from scenario loading.
    """

    def __init__(self, message, field=None):
        self.field = field
        if field:
            message = f"{field}: {message}"
        super().__init__(message)


class ParseError(AggTollError):
    """A scenario file could not be parsed."""


class EmptyPathSet(AggTollError):
    """No origin-destination path exists in the network."""


class SolverDidNotConverge(AggTollError):
    """Projected gradient refinement stalled above tolerance."""


class StateDrift(AggTollError):
    """Row sums drifted away from the group masses during integration."""


class UnsupportedDimension(AggTollError):
    """The operation is only defined for a restricted game size."""


class NotSymmetric(AggTollError, ValueError):
    pass


class NotARestPoint(AggTollError):
    pass


class DomainError(AggTollError, ValueError):
    """A logarithm was requested at a zero coordinate."""
