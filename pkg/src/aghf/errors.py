"""Exception hierarchy for the planner pipeline."""


class AghfError(Exception):
    """Base class for all planner errors."""


class DimensionError(AghfError):
    """An input's shape does not match the system's declared dimensions."""


class UnknownSystemError(AghfError, KeyError):
    """Requested builtin system name is not registered."""


class FrameCompletionError(AghfError):
    """The control matrix could not be completed to an invertible frame."""


class SingularFrameError(AghfError):
    """The completed frame is numerically singular at some state."""

    def __init__(self, message, condition=None, node=None, s=None):
        super().__init__(message)
        self.condition = condition
        self.node = node
        self.s = s


class StiffnessError(AghfError):
    """The flow step size underflowed while every candidate step was rejected."""

    def __init__(self, message, s=None, ds=None, diagnostics=None):
        super().__init__(message)
        self.s = s
        self.ds = ds
        self.diagnostics = diagnostics or {}


class IntegrationDivergedError(AghfError):
    """Forward integration produced a non-finite state."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class ConstraintViolationError(AghfError):
    """A barrier constraint was evaluated at (or crossed into) an infeasible point."""

    def __init__(self, message, constraint=None, value=None):
        super().__init__(message)
        self.constraint = constraint
        self.value = value


class BoundPreconditionError(AghfError):
    """Supplied bound constants do not dominate the measured quantities."""


class ConfigError(AghfError):
    """A run configuration failed validation."""
