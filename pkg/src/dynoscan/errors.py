"""Exception types shared across the toolkit."""


class DynoscanError(Exception):
    """Base class for all toolkit errors."""


class EmptyInputError(DynoscanError):
    """An operation received an input with no usable data."""


class FormatError(DynoscanError):
    """A file does not conform to its binary or text format.

    Carries the byte offset at which parsing failed, when known.
    """

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class ConfigError(DynoscanError):
    """A parameter or configuration file violates a precondition."""


class InsufficientFeaturesError(DynoscanError):
    """Too few corners detected to attempt matching."""


class InsufficientMatchesError(DynoscanError):
    """Too few 3D correspondences survived matching."""


class DegenerateGeometryError(DynoscanError):
    """Correspondences are geometrically degenerate (e.g. collinear)."""


class UnreliableMotionError(DynoscanError):
    """Motion estimate rejected: inlier ratio below the trust threshold."""
