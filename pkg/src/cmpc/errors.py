"""Exception types shared across the package."""

from __future__ import annotations


class CmpcError(Exception):
    """Base class for all package-specific errors."""


class UxTooSmallError(CmpcError):
    """Longitudinal speed below the floor where slip angles are well defined."""


class NonFiniteError(CmpcError):
    """A state, matrix, or solver iterate picked up a NaN or infinity."""


class OutOfRangeError(CmpcError):
    """Lookup outside the tolerated range of a sampled quantity."""


class InvalidGeometryError(CmpcError):
    """Track geometry that cannot be built (non-positive lengths, bad bounds)."""


class DimensionMismatchError(CmpcError):
    """Array or schedule sizes that do not line up."""


class InfeasibleBoxError(CmpcError):
    """Box constraint with empty interior (non-positive width)."""


class ScenarioParseError(CmpcError):
    """Scenario or vehicle file that cannot be parsed; names the offending field."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


class SchemaVersionError(ScenarioParseError):
    """Scenario file with a schema_version this build does not understand."""
