"""Exception hierarchy shared by every wardlab module."""


class WardLabError(Exception):
    """Base class for all errors raised by wardlab."""


class DomainError(WardLabError, ValueError):
    """A query falls outside the space-time hull of a sampled source."""

    def __init__(self, message, hull=None):
        super().__init__(message)
        self.hull = hull


class DegeneracyError(WardLabError, ValueError):
    """A matrix is too close to singular for a polar projection."""


class ConfigurationError(WardLabError, ValueError):
    """Parameters violate the preconditions of an operation."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class EvolutionBlowUpError(WardLabError, RuntimeError):
    """The evolved field lost rank (unitarization failed) at some step."""

    def __init__(self, message, step):
        super().__init__(message)
        self.step = step


class DataError(WardLabError, ValueError):
    """A transport coefficient sample was not finite."""

    def __init__(self, message, u=None):
        super().__init__(message)
        self.u = u


class MonodromyGateError(WardLabError):
    """The null-monodromy gate was exceeded for a frame direction."""

    def __init__(self, message, deviation):
        super().__init__(message)
        self.deviation = deviation


class DomainTooSmallError(WardLabError):
    """The estimated charge leaking past the grid boundary is too large."""

    def __init__(self, message, leak):
        super().__init__(message)
        self.leak = leak


class FormatError(WardLabError, ValueError):
    """A snapshot file is malformed; ``offset`` is the byte position at fault."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class InvariantError(WardLabError, ValueError):
    """A data invariant (e.g. unitarity) does not hold."""

    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class PreconditionError(WardLabError, ValueError):
    """An argument violates an operation's precondition."""


class SingularityError(WardLabError, ZeroDivisionError):
    """A formula is evaluated where its denominator vanishes."""
