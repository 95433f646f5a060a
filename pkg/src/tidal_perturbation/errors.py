"""Exception types shared by the solvers and the command-line harness."""


class DomainError(ValueError):
    """Input outside the domain of an operation (bad units, sizes, signs)."""


class NumericError(FloatingPointError):
    """Non-finite values encountered in a field."""


class SolverAbort(RuntimeError):
    """Time integration stopped early.

    ``last_state`` holds the last valid state so callers can flag partial
    outputs instead of losing them.
    """

    def __init__(self, message, last_state=None):
        super().__init__(message)
        self.last_state = last_state
