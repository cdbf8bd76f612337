"""Exception types raised across the package."""


class MultirailError(Exception):
    """Base class for all package errors."""


class EigensolverError(MultirailError, ArithmeticError):
    """A dense eigensolver failed to converge."""


class BudgetExceeded(MultirailError, MemoryError):
    """A dense object would exceed the configured element budget."""

    def __init__(self, size, budget, hint=""):
        msg = f"dense size {size} exceeds budget {budget}"
        if hint:
            msg += f"; {hint}"
        super().__init__(msg)
        self.size = size
        self.budget = budget


class SuccessCertain(MultirailError):
    """The success probability is 1 to round-off; a failure projection is undefined."""

    def __init__(self, p, gamma=None):
        super().__init__(f"success probability {p!r} is 1 to round-off; nothing left to project")
        self.p = p
        self.gamma = gamma


class NormViolation(MultirailError, ValueError):
    """A joint state is not normalized."""
