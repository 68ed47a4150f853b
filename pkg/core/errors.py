"""
Error Types
Exception hierarchy shared by the market model, solvers and CLI
"""

from typing import Optional


class WalrusError(Exception):
    """Base class for every error raised by this package."""


class DomainError(WalrusError, ValueError):
    """A bundle, price vector or instance lies outside an operation's domain."""


class MalformedInstanceError(WalrusError, ValueError):
    """Instance or valuation data is incomplete or invalid."""

    def __init__(self, message: str, field: Optional[str] = None):
        self.field = field
        if field:
            message = f"{field}: {message}"
        super().__init__(message)


class BudgetExceededError(WalrusError):
    """An enumeration would exceed its configured budget."""

    def __init__(self, budget_name: str, required: int, budget: int):
        self.budget_name = budget_name
        self.required = required
        self.budget = budget
        super().__init__(
            f"{budget_name} exceeded: enumeration needs {required} steps, budget is {budget}"
        )


class CheckLimitExceededError(BudgetExceededError):
    """The gross-substitutes checker was asked about too many items."""


class NumericFailure(WalrusError, ArithmeticError):
    """Floating point state became non-finite or lost positive definiteness."""


class AmbiguousRoundingError(WalrusError):
    """No unique rational lies within the rounding radius of a coordinate."""

    def __init__(self, coordinate: int, value, message: str):
        self.coordinate = coordinate
        self.value = value
        super().__init__(f"coordinate {coordinate + 1} ({value}): {message}")


class PreconditionError(WalrusError, ValueError):
    """An operation was called outside its precondition."""


class CertificateError(WalrusError):
    """A local optimality certificate failed after a solver phase."""

    def __init__(self, phase: int, buyer: int, condition: str, detail: str = ""):
        self.phase = phase
        self.buyer = buyer
        self.condition = condition
        message = f"phase {phase}: buyer {buyer + 1} violates {condition}"
        if detail:
            message += f" ({detail})"
        super().__init__(message)


class NonOptimalAllocationError(WalrusError):
    """The exchange graph of an allocation has a negative cycle."""

    def __init__(self, cycle):
        self.cycle = cycle
        super().__init__(f"allocation not optimal: negative cycle through {cycle}")


class InvariantViolation(WalrusError, AssertionError):
    """Internal contract broken; indicates a bug or an invalid valuation."""
