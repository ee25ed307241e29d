"""Exception types shared across the package."""


class CompoundLabError(Exception):
    """Base class for all package errors."""


class InvalidArgument(CompoundLabError, ValueError):
    pass


class InvalidState(CompoundLabError, ValueError):
    pass


class InfeasibleSample(CompoundLabError, ValueError):
    """A sequence of probability zero was passed where a sampled one is required."""


class InsufficientData(CompoundLabError, ValueError):
    pass


class CapacityExceeded(CompoundLabError, RuntimeError):
    """Enumeration or decoding would exceed a configured size cap."""


class NotApplicable(CompoundLabError, RuntimeError):
    pass
