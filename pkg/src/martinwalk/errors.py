"""Exception types shared across the package."""


class MartinWalkError(Exception):
    """Base class for all errors raised by this package."""


class BudgetExceededError(MartinWalkError):
    """A level budget or atom budget was exceeded."""


class NonStochasticError(MartinWalkError):
    """A transition row does not sum to one."""


class UnreachableStateError(MartinWalkError):
    """Conditioning on (or targeting) a state of probability zero."""


class NotHarmonicError(MartinWalkError):
    """A function fails the mean-value property needed for a transform."""


class CotransitionMismatchError(MartinWalkError):
    """Two chains expected to share cotransitions do not."""


class ConfigError(MartinWalkError):
    """A run configuration failed to parse or validate."""
