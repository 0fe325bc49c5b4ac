"""Exception types shared across the package."""


class TofwiError(Exception):
    """Base class for all package-specific errors."""


class GeometryError(TofwiError):
    """A position or rectangle falls outside the admissible region."""


class DegeneratePartitionError(GeometryError):
    """A target region captured no grid nodes."""


class AssemblyError(TofwiError):
    """Operator assembly received invalid physical inputs."""


class FactorizationError(TofwiError):
    """Sparse factorization failed (numerically singular system).

    ``pivot_index`` holds the offending pivot position when it could be
    determined, else None.
    """

    def __init__(self, message, pivot_index=None):
        super().__init__(message)
        self.pivot_index = pivot_index


class FormatError(TofwiError):
    """A binary file violates its declared layout.

    ``offset`` is the byte position at which the violation was detected.
    """

    def __init__(self, message, offset):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class ConfigError(TofwiError):
    """An experiment configuration is malformed."""
