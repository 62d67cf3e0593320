"""Exception types shared across the package."""


class TreeflowError(Exception):
    """Base class for all package errors."""


class InfeasibleSpec(TreeflowError):
    pass


class NoConvergence(TreeflowError):
    pass


class BudgetExceeded(TreeflowError):
    pass


class InvalidCuts(TreeflowError):
    pass


class DomainMismatch(TreeflowError):
    pass


class OutOfRange(TreeflowError):
    pass


class OutOfDomain(TreeflowError):
    pass


class DegenerateRun(TreeflowError):
    pass


class LevelOutOfRange(TreeflowError):
    pass


class EmptySample(TreeflowError):
    pass


class ConfigError(TreeflowError):
    pass
