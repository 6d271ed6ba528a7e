"""Typed errors raised by the fddkit engine.

Every error derives from :class:`FddkitError` so commands can map the whole
family to exit codes, and most also derive from the matching builtin so plain
``except ValueError`` callers keep working.
"""

from typing import Optional, Tuple


class FddkitError(Exception):
    """Base class for all engine errors"""


class InvalidArgumentError(FddkitError, ValueError):
    """An argument violates the documented precondition"""


class DimensionError(InvalidArgumentError):
    """Array shapes of related inputs do not agree"""


class ConfigError(FddkitError):
    """A configuration document is malformed or names unknown keys"""


class ZeroPilotError(FddkitError, ZeroDivisionError):
    """A pilot symbol with zero amplitude cannot be divided out"""

    def __init__(self, index: int, frequency: float):
        self.index = index
        self.frequency = frequency
        super().__init__(f"Pilot symbol at subcarrier {index} ({frequency:.6g} Hz) is zero")


class IllConditionedError(FddkitError, ArithmeticError):
    """A matrix that must be inverted is numerically singular"""

    def __init__(self, message: str, condition_number: float):
        self.condition_number = condition_number
        super().__init__(f"{message} (condition number {condition_number:.3e})")


class IllConditionedFisherError(IllConditionedError):
    """The Fisher information matrix is singular, usually two paths too close to resolve"""

    def __init__(self, condition_number: float, closest_pair: Optional[Tuple[int, int]] = None,
                 correlation: Optional[float] = None):
        self.closest_pair = closest_pair
        self.correlation = correlation
        message = "Fisher information matrix is ill-conditioned"
        if closest_pair is not None:
            message += f"; closest paths {closest_pair[0]} and {closest_pair[1]}"
            if correlation is not None:
                message += f" (signature correlation {correlation:.6f})"
        super().__init__(message, condition_number)


class OverParameterizedError(FddkitError, ValueError):
    """More real parameters requested than there are observations"""


class ExtrapolationDomainError(FddkitError, ValueError):
    """No extrapolation range exists for the requested tolerance"""


__all__ = [
    "FddkitError",
    "InvalidArgumentError",
    "DimensionError",
    "ConfigError",
    "ZeroPilotError",
    "IllConditionedError",
    "IllConditionedFisherError",
    "OverParameterizedError",
    "ExtrapolationDomainError",
]
