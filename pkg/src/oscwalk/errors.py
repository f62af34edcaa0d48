"""Exception types shared across the package."""


class OscWalkError(Exception):
    """Base class for package errors."""


class MeasureError(OscWalkError, ValueError):
    """Invalid measure definition or config."""


class TruncationError(OscWalkError):
    """A requested truncation cannot meet its mass budget."""


class PreconditionError(OscWalkError, ValueError):
    """An operation was called outside the setting it is defined for."""


class NotCovered(OscWalkError):
    """The analytic class description does not cover this pair of supports.

    Callers are expected to fall back on ``classes.reachability_oracle``.
    """


class SimulationOverflow(OscWalkError):
    """A sampled jump left the exactly representable integer range."""
