"""Error codes, the exception hierarchy, and CLI exit codes."""

from __future__ import annotations

from typing import Any


# Error code constants
INVALID_INPUT = "INVALID_INPUT"
INVARIANT_FAILED = "INVARIANT_FAILED"
BUDGET_EXHAUSTED = "BUDGET_EXHAUSTED"
SOLVER_FAILED = "SOLVER_FAILED"
BLOW_UP = "BLOW_UP"
COVARIANCE_NOT_PD = "COVARIANCE_NOT_PD"
DRIVER_REJECTED = "DRIVER_REJECTED"
INTERNAL_ERROR = "INTERNAL_ERROR"

# Process exit codes
EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_INVARIANT = 2
EXIT_BUDGET = 3


def error_response(code: str, message: str, **details: Any) -> dict[str, Any]:
    """Build a structured error dict for manifests and CLI output."""
    response: dict[str, Any] = {
        "error": True,
        "error_code": code,
        "error_message": message,
    }
    if details:
        response["details"] = details
    return response


class RoughDevError(Exception):
    """Base class for every error raised by roughdev."""

    code: str = INTERNAL_ERROR
    exit_code: int = EXIT_FAILURE

    def __init__(self, message: str, **details: Any) -> None:
        super().__init__(message)
        self.message = message
        self.details = details

    def to_response(self) -> dict[str, Any]:
        return error_response(self.code, self.message, **self.details)


class InvalidInputError(RoughDevError, ValueError):
    """Shapes, exponents, grids or parameters outside their admissible range."""

    code = INVALID_INPUT


class InvariantError(RoughDevError):
    """A structural identity (Chen, shuffle, sewing bound, ...) failed beyond tolerance."""

    code = INVARIANT_FAILED
    exit_code = EXIT_INVARIANT


class BudgetExhaustedError(RoughDevError):
    """A subinterval / run / iteration budget ran out; ``partial`` holds what was computed."""

    code = BUDGET_EXHAUSTED
    exit_code = EXIT_BUDGET

    def __init__(self, message: str, partial: Any = None, **details: Any) -> None:
        super().__init__(message, **details)
        self.partial = partial


class SolverError(RoughDevError):
    """Fixed-point or refinement iteration did not converge."""

    code = SOLVER_FAILED


class BlowUpError(SolverError):
    """A simulated trajectory exceeded its numeric cap."""

    code = BLOW_UP


class CovarianceError(RoughDevError):
    """The Gaussian covariance is not numerically positive definite."""

    code = COVARIANCE_NOT_PD


class DriverRejectedError(InvalidInputError):
    """The driver fails the finite-variation check required by the Young solver."""

    code = DRIVER_REJECTED


def exit_code_for(exc: BaseException) -> int:
    """Map an exception to the process exit code."""
    if isinstance(exc, RoughDevError):
        return exc.exit_code
    return EXIT_FAILURE


__all__ = [
    "INVALID_INPUT",
    "INVARIANT_FAILED",
    "BUDGET_EXHAUSTED",
    "SOLVER_FAILED",
    "BLOW_UP",
    "COVARIANCE_NOT_PD",
    "DRIVER_REJECTED",
    "INTERNAL_ERROR",
    "EXIT_OK",
    "EXIT_FAILURE",
    "EXIT_INVARIANT",
    "EXIT_BUDGET",
    "error_response",
    "RoughDevError",
    "InvalidInputError",
    "InvariantError",
    "BudgetExhaustedError",
    "SolverError",
    "BlowUpError",
    "CovarianceError",
    "DriverRejectedError",
    "exit_code_for",
]
