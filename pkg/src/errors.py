"""
Exception types shared across the toolkit.

Each error subclasses the built-in exception callers would already catch for
the same kind of failure, so ``except ValueError`` keeps working.
"""


class DomainError(ValueError):
    """An argument lies outside the domain an operation is defined on."""


class SingularityError(DomainError):
    """The schedule's alpha vanishes, so the forward rate diverges."""


class UnreachableStateError(DomainError):
    """The conditioning state has zero forward probability."""


class SimulationError(RuntimeError):
    """A rate became non-finite while simulating a path."""


class DegenerateRecoveryError(ValueError):
    """Every entry of a recovered clean-token vector was clipped to zero."""


class UnsupportedScheduleError(ValueError):
    """The operation is only defined for a different schedule kind."""


class ConfigError(ValueError):
    """Invalid experiment configuration (unknown key, bad enum, missing seed)."""
