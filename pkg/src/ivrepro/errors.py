"""Exception and warning types shared across the library."""


class DomainError(ValueError):
    """Input outside an operation's domain (NaN, infinity, or zero where forbidden)."""


class ProbeFailedError(RuntimeError):
    """Hardware rounding requested but the environment probe did not pass."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class UnderflowWarning(Warning):
    """A product's roundoff term was not exactly representable (deep subnormal range)."""


class WidenedToReals(Warning):
    """A mid-rad conversion of an unbounded interval had to cover the whole real line."""


class ContainsZeroError(ArithmeticError):
    """Division by an interval that contains zero."""


class BisectError(ValueError):
    """Interval cannot be split at a strictly interior point."""


class UnsupportedExpression(TypeError):
    """Expression node kind not handled by the evaluator."""


class EmptyIntervalError(ValueError):
    """Arithmetic attempted on the empty interval."""


class PlanError(ValueError):
    """Invalid chunked-summation plan."""


class CapacityError(ValueError):
    """Input too long for exact slice sums at binary64 precision.

    ``max_n`` carries the largest admissible input length.
    """

    def __init__(self, message, max_n):
        super().__init__(message)
        self.max_n = max_n


class SingularError(ArithmeticError):
    """Matrix is singular at working precision (zero pivot after pivoting)."""


class DivergenceError(ArithmeticError):
    """Iterative refinement diverged.  ``best`` carries the best iterate seen."""

    def __init__(self, message, best=None, steps_used=0):
        super().__init__(message)
        self.best = best
        self.steps_used = steps_used


class BoundInvalidError(ValueError):
    """Error-bound formula is meaningless at this dimension."""
