"""Exception types shared across the package."""


class CdsimError(Exception):
    """Base class for all package-specific failures."""


class DegreeOverflow(CdsimError):
    """A polynomial product would exceed the configured total-degree cap."""


class OutOfRange(CdsimError):
    """A query point lies outside the valid domain (time or beta range)."""


class RejectionStall(CdsimError):
    """Shell rejection sampling acceptance rate fell below the viability floor."""


class SingularSystem(CdsimError):
    """The variational normal equations are numerically singular at mu = 0."""


class MomentMismatch(CdsimError):
    """Moment ensemble beta disagrees with the basis beta beyond tolerance."""


class NonFinite(CdsimError):
    """A trajectory left the finite range during integration."""

    def __init__(self, message: str, point_index: int | None = None):
        super().__init__(message)
        self.point_index = point_index


class ConfigError(CdsimError):
    """Run configuration failed validation."""
