"""Exception hierarchy shared by all modules."""


class DisplabError(Exception):
    """Base class for every error raised by this package."""


class DomainError(DisplabError, ValueError):
    """Argument outside the domain where a quantity is defined."""


class RangeError(DisplabError, ArithmeticError):
    """Result would leave the representable floating-point range."""


class DivergenceError(DisplabError, ArithmeticError):
    """An improper integral does not converge for the given data."""


class AccuracyError(DisplabError, ArithmeticError):
    """A quadrature could not reach its accuracy target."""

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class BudgetError(DisplabError, RuntimeError):
    """Estimated work exceeds the configured budget."""


class PreconditionError(DisplabError, ValueError):
    """A hypothesis of the estimate under test is violated."""


class DependencyError(DisplabError, RuntimeError):
    """A required upstream object (e.g. the operator T) is unavailable."""


class UsageError(DisplabError, ValueError):
    """Invalid user input (configuration, CLI arguments, empty samples)."""
