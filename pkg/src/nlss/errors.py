"""Exception hierarchy shared by every module."""


class NLSSError(Exception):
    """Base class for toolkit errors."""


class ConfigurationError(NLSSError, ValueError):
    """Invalid grid, operator or scenario configuration."""


class DomainError(NLSSError, ValueError):
    """An argument lies outside the domain of the operation."""


class ModeError(NLSSError, ValueError):
    """Operation not defined for the field's mode (finite or resonant)."""


class ConvergenceError(NLSSError, RuntimeError):
    """An iterative solver failed to converge.

    ``residuals`` carries the last residual (a float or an array).
    """

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class BlowupDetected(NLSSError, RuntimeError):
    """Non-finite values appeared during time stepping.

    ``state`` is the last state whose samples were all finite.
    """

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class MassDriftError(NLSSError, RuntimeError):
    """Relative mass drift exceeded the abort threshold."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class SnapshotFormatError(NLSSError, ValueError):
    """Malformed snapshot file; ``offset`` is the byte position of the fault."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class PrecisionWarning(UserWarning):
    """A result was computed but a precondition for its stated accuracy failed."""
