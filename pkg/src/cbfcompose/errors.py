"""Exception hierarchy shared by every module of the package."""


class CbfError(Exception):
    """Base class for all errors raised by cbfcompose."""


class NegativeRadicand(CbfError):
    """A square-root safety function was evaluated outside its domain."""


class DegenerateGradient(CbfError):
    """A square-root safety function was differentiated at a zero radicand."""


class InvalidManeuver(CbfError):
    """An evading maneuver violates its invariants or does not fit the barrier."""


class DegenerateRelativeMotion(CbfError):
    """Two vehicles share the same velocity vector under a straight maneuver."""


class NonUniqueMinimizer(CbfError):
    """The rollout minimum is attained at more than one state, so h is not smooth."""


class Infeasible(CbfError):
    """No input satisfies every QP constraint."""

    def __init__(self, message, certificate=None):
        super().__init__(message)
        self.certificate = certificate


class IterationLimit(CbfError):
    """The active-set iteration cap was reached."""


class UnsafeState(CbfError):
    """A filter was called from outside the safe set."""

    def __init__(self, message, h_values=None):
        super().__init__(message)
        self.h_values = h_values


class UnsafeStart(CbfError):
    """A scenario's initial condition lies outside the safe set."""


class ConfigError(CbfError):
    """Invalid scenario or command-line configuration."""
