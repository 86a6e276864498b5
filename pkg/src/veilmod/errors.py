"""Exception hierarchy shared across the platform."""


class VeilmodError(Exception):
    """Base class for all veilmod errors."""


class InvalidParameterError(VeilmodError):
    """A parameter is outside its documented domain (negative sigma, bad stage id, ...)."""


class InvalidImageError(VeilmodError):
    """A raster fails its structural invariants (length mismatch, bad channel count)."""


class OutOfBoundsError(VeilmodError):
    """A reveal region does not intersect the image it is applied to."""


class SchemaError(VeilmodError):
    """A corpus manifest violates the category/type schema."""


class ValidationError(VeilmodError):
    """A submitted response, reveal event, or survey violates its invariants."""


class ConflictError(VeilmodError):
    """The submission duplicates or contradicts previously recorded state."""


class NotFoundError(VeilmodError):
    """The referenced image, session, or experiment does not exist."""


class StateError(VeilmodError):
    """The operation is not meaningful in the current state (no data, missing response)."""


class LogCorruptionError(VeilmodError):
    """A non-final event log record failed to parse or sequence numbers have gaps."""


class AuthError(VeilmodError):
    """The request carries no token, or a token the server does not recognize."""


class ForbiddenError(VeilmodError):
    """The token is genuine but the action is not permitted (stage gating, role)."""


class ExpiredError(VeilmodError):
    """The session's time-to-live has elapsed."""


class TooLargeError(VeilmodError):
    """A requested reveal region exceeds the configured maximum size."""
