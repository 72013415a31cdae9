"""Exception types shared across the package."""

from __future__ import annotations


class SpatialBootError(Exception):
    """Base class for all package-specific errors."""


class IngestionError(SpatialBootError):
    """An input file failed schema or referential validation.

    Carries optional file path and 1-based row number so the CLI can report
    the offending location.
    """

    def __init__(self, message: str, *, path: str | None = None, row: int | None = None):
        self.path = path
        self.row = row
        where = ""
        if path is not None:
            where = f" [{path}" + (f", row {row}" if row is not None else "") + "]"
        super().__init__(message + where)


class GeometryError(SpatialBootError):
    """A polygon is degenerate or otherwise unusable."""


class InsufficientDataError(SpatialBootError):
    """Too few observed regions (or variogram bins) to compute anything."""


class UndefinedStatisticError(SpatialBootError):
    """The requested statistic has no value (zero denominator)."""


class EmptyVariogramError(SpatialBootError):
    """No region pairs fall within the requested maximum lag."""


class GenerationError(SpatialBootError):
    """A synthetic field could not be generated (e.g. covariance not PD)."""
