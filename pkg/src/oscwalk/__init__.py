"""Exact analysis and seeded simulation of oscillating random walks on Z."""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    MeasureError,
    NotCovered,
    OscWalkError,
    PreconditionError,
    SimulationOverflow,
    TruncationError,
)
from .measures import LatticeMeasure, ZMeasure  # noqa: F401
