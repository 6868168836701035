"""Exception hierarchy shared by all modules."""


class BregsaddleError(Exception):
    """Base class for every error raised by the package."""


class InvalidArgument(BregsaddleError, ValueError):
    pass


class InconsistentDual(BregsaddleError, ValueError):
    """A dual vector is not a subgradient of the generator at its primal."""


class UnsupportedOperation(BregsaddleError):
    pass


class DegenerateSample(BregsaddleError, ValueError):
    pass


class NoSaddlePoint(BregsaddleError, ValueError):
    """The first-order conditions of a saddle problem have no solution."""


class NumericalBreakdown(BregsaddleError, ArithmeticError):
    """A solver produced a non-finite value.

    Attributes
    ----------
    k : int
        Iteration at which the breakdown was detected.
    """

    def __init__(self, message, k):
        super().__init__(f"{message} (iteration {k})")
        self.k = k


class ScheduleViolation(BregsaddleError, ValueError):
    """A step schedule fails one of the feasibility conditions.

    Attributes
    ----------
    condition : str
        Name of the violated condition.
    k : int
        First iteration index where it fails.
    """

    def __init__(self, condition, k, detail=""):
        msg = f"schedule violates {condition} at k={k}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)
        self.condition = condition
        self.k = k
