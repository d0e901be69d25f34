"""Exceptions raised by econform's numeric routines."""

from __future__ import annotations

from typing import Sequence, Tuple


class EconformError(Exception):
    """Base class for every error raised by this package."""


class DomainError(EconformError, ValueError):
    """Raised when an argument lies outside of its mathematical domain."""


class ScoreValidationError(DomainError):
    """Raised when a score is not strictly positive and finite."""

    def __init__(self, index: int, value: float) -> None:
        super().__init__(
            "Scores must be strictly positive and finite. |"
            f" index={index} value={value!r}"
        )
        self.index = index
        self.value = value


class PreconditionError(DomainError):
    """Raised when an experiment's documented precondition does not hold."""


class SelectionInfeasibleError(EconformError):
    """Raised when no candidate level yields a small enough conformal set."""

    def __init__(
        self, target_size: int, profile: Sequence[Tuple[float, int]]
    ) -> None:
        smallest = min((size for _, size in profile), default=None)
        super().__init__(
            "No candidate alpha yields a conformal set of the requested"
            f" size. | target_size={target_size} smallest_size={smallest}"
        )
        self.target_size = target_size
        self.profile = tuple(profile)
