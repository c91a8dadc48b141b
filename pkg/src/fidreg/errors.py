"""Exception hierarchy shared across the toolkit.

Two branches matter to callers: :class:`FormatError` (malformed files or
configs; the CLI exits 2) and :class:`DomainError` (well-formed input on which
the requested operation is impossible; the CLI exits 1).
"""

from __future__ import annotations


class FidregError(Exception):
    """Root of all toolkit-specific errors."""


class FormatError(FidregError):
    """A file or config block could not be parsed."""


class VolumeFormatError(FormatError):
    """Malformed volume header."""


class TruncationError(VolumeFormatError):
    """Voxel payload size does not match the header."""

    def __init__(self, expected: int, actual: int):
        self.expected = expected
        self.actual = actual
        super().__init__(f"voxel payload size mismatch: expected {expected} bytes, got {actual}")


class ConfigError(FormatError):
    """Flat key/value config block is malformed or has bad values."""


class DomainError(FidregError):
    """Valid input, but the operation cannot produce a result."""


class InsufficientMarkersError(DomainError):
    """Fewer markers than a rigid registration needs."""

    def __init__(self, found: int):
        self.found = found
        super().__init__(f"insufficient markers: found {found}, need at least 3")


class DegenerateGeometryError(DomainError):
    """Point set is collinear (or otherwise rank-deficient)."""


class DegenerateTriangleError(DegenerateGeometryError):
    """Triangle is too thin to carry a shape key."""


class NoMatchError(DomainError):
    """No stored triangle survived shape and scale verification."""
