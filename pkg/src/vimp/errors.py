"""Exception types shared across the package."""


class VimpError(Exception):
    """Base class for all package-specific failures."""


class FormatError(VimpError):
    """A binary stream or header does not match its declared format."""


class TruncationError(FormatError):
    """A payload ended before the declared amount of data."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class RateControlError(VimpError):
    """The bitrate target cannot be met within the QP range."""

    def __init__(self, message, target_bits, min_achievable, max_achievable):
        super().__init__(message)
        self.target_bits = target_bits
        self.min_achievable = min_achievable
        self.max_achievable = max_achievable


class CapabilityError(VimpError):
    """A configured-off capability (e.g. external encoder) was requested."""


class AdapterError(VimpError):
    """The external encoder adapter failed or produced malformed output."""


class DegenerateRegionError(VimpError):
    """A metric region is empty at the requested threshold."""

    def __init__(self, side):
        super().__init__(f"region {side!r} is empty at the requested threshold")
        self.side = side


class NotFoundError(VimpError):
    """A referenced video or session does not exist."""


class PreconditionError(VimpError):
    """A required asset is missing; the message names the remedy."""


class SessionConflictError(VimpError):
    """Operation conflicts with current session state (finalized, job running)."""


class PolicyError(VimpError):
    """Server-side policy refused the operation."""

    def __init__(self, message, remaining_seconds=None):
        super().__init__(message)
        self.remaining_seconds = remaining_seconds
