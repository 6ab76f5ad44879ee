"""Exception types raised by the cyfence library."""

from typing import Any


class PoleEvaluationError(ValueError):
    """A transfer function was evaluated exactly at one of its poles."""


class NoCrossoverError(ValueError):
    """The loop magnitude never crosses unity inside the search range."""


class InactiveDomainError(ValueError):
    """Vehicle speed is outside the domain where slip is defined (ABS inactive)."""


class CorruptedFeedbackError(ArithmeticError):
    """The controller received a non-finite error sample."""


class SimulationAborted(RuntimeError):
    """The simulation state became non-finite.

    :param message: Diagnostic message.
    :param row_index: Index of the loop iteration that produced the invalid state.
    :param partial: The partial scenario result collected up to the failure.
    """

    def __init__(self, message: str, row_index: int, partial: Any = None):
        super().__init__(message, row_index)
        self.row_index = row_index
        self.partial = partial


class IsolationViolation(PermissionError):
    """Non-secure code tried to modify the secure parameter store."""
