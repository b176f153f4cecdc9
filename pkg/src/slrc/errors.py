"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """Raised when inputs or parameters violate a documented precondition."""


class NumericError(RuntimeError):
    """Raised when a numerical computation cannot proceed (non-finite data,
    factorization failure)."""


class DivergenceError(NumericError):
    """Raised when a solver produces a non-finite iterate.

    Carries the 1-based outer iteration index at which divergence was
    detected.
    """

    def __init__(self, message, iteration):
        super().__init__(message)
        self.iteration = iteration
