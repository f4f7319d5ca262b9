"""Exception types raised across the package."""


class LeakageError(ValueError):
    """Base class for all input/contract errors raised by leastpriv."""


class NegativeMass(LeakageError):
    pass


class NotNormalized(LeakageError):
    pass


class ZeroEvent(LeakageError):
    """Conditioning on an event of probability zero."""


class AxisMismatch(LeakageError):
    pass


class UndefinedPosterior(LeakageError):
    """P(y|x) requested for an x with P(x) = 0."""


class ZeroMass(LeakageError):
    pass


class EmptySupport(LeakageError):
    """A maximum was requested over an empty support set."""


class DomainError(LeakageError):
    pass


class TooLarge(LeakageError):
    pass


class TooSmall(LeakageError):
    pass


class EmptyInput(LeakageError):
    pass


class NotBinary(LeakageError):
    pass


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss."""
