from typing import Optional, Tuple


class ObservationError(ValueError):
    """A loss vector or gradient failed validation."""


class DimensionMismatchError(ObservationError):
    """An observation or comparator has the wrong length."""

    def __init__(self, expected: int, got: int, what: str = "observation"):
        super().__init__(f"{what} has length {got}, expected {expected}")
        self.expected = expected
        self.got = got


class ComparatorError(ValueError):
    """A comparator is not a valid distribution or lies outside the domain."""


class IncompatibleAlgorithmError(ValueError):
    """An algorithm was paired with an environment of the other setting."""


class ProjectionError(RuntimeError):
    """The Mahalanobis projection onto the ball could not be computed."""

    def __init__(self, message: str, condition_number: Optional[float] = None):
        if condition_number is not None:
            message = f"{message} (metric condition number {condition_number:.3e})"
        super().__init__(message)
        self.condition_number = condition_number


class NewtonConvergenceError(ProjectionError):
    """Newton's method did not reach the residual tolerance."""

    def __init__(
        self,
        bracket: Tuple[float, float],
        residual: float,
        iterations: int,
        condition_number: Optional[float] = None,
    ):
        super().__init__(
            f"Newton solve did not converge after {iterations} iterations: "
            f"bracket [{bracket[0]!r}, {bracket[1]!r}], residual {residual:.3e}",
            condition_number=condition_number,
        )
        self.bracket = bracket
        self.residual = residual
        self.iterations = iterations
