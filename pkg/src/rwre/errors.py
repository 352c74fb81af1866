"""Exceptions raised by the simulation and verification routines."""


class RwreError(Exception):
    """Base class for all package errors."""


class InvalidEnvironment(RwreError, ValueError):
    """Environment parameters that cannot define a positive stationary field."""


class EstimateOnly(RwreError):
    """The requested medium integral has no closed form for this family."""


class WindowTooSmall(RwreError):
    """Escaped mass prevents a certified answer within the requested tolerance."""


class RateOverflow(RwreError):
    """A jump rate exceeds the configured cap."""


class UnstableStep(RwreError):
    """An Euler-Maruyama path left the configured guard region."""


class Inconclusive(RwreError):
    """Statistical or discretisation error is too large for a verdict."""
