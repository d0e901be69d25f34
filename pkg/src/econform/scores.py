"""Score transforms and the validated score containers.

Everything downstream of this module assumes negatively-oriented scores
(smaller means a better fit) that are strictly positive and finite. The
transforms below turn model probabilities or positively-oriented scores
into such values, and the containers enforce the contract at ingestion.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
import math
from typing import Callable, Iterable, Iterator, Sequence

from logrus import Logger
import numpy as np
import numpy.typing as npt

from .common import DEFAULT_EPSILON, DEFAULT_EXPONENT, POSITIVITY_GUARD
from .errors import DomainError, ScoreValidationError


logger = Logger(__name__)

FloatArray = npt.NDArray[np.float64]
ScoreTransform = Callable[[float], float]


def _check_prob(prob: float) -> None:
    if not 0.0 < prob <= 1.0 or math.isnan(prob):
        raise DomainError(f"Probability must lie in (0, 1]. | prob={prob!r}")


def _check_exponent(exponent: float) -> None:
    if not exponent > 0.0 or math.isinf(exponent):
        raise DomainError(
            f"Exponent must be positive and finite. | exponent={exponent!r}"
        )


def cross_entropy_score(prob: float) -> float:
    """Returns the cross-entropy score -log(prob).

    The result is 0 when prob == 1; use `positivity_guard()` before feeding
    it to anything that needs strictly positive scores.

    Examples:
        >>> cross_entropy_score(1.0)
        0.0
        >>> round(cross_entropy_score(0.5), 6)
        0.693147
    """
    _check_prob(prob)
    return -math.log(prob) + 0.0


def inverse_power_score(
    prob: float, exponent: float = DEFAULT_EXPONENT
) -> float:
    """Returns 1 / prob**exponent.

    Examples:
        >>> inverse_power_score(1 / 16)
        2.0
        >>> round(inverse_power_score(0.0001), 9)
        10.0
    """
    _check_prob(prob)
    _check_exponent(exponent)
    return 1.0 / prob**exponent


def inverse_power_scores(
    probs: FloatArray, exponent: float = DEFAULT_EXPONENT
) -> FloatArray:
    """Elementwise inverse_power_score() over an array of any shape."""
    probs = np.asarray(probs, dtype=np.float64)
    bad = ~((probs > 0.0) & (probs <= 1.0))
    if bad.any():
        _check_prob(float(probs[bad].flat[0]))
    _check_exponent(exponent)
    return 1.0 / probs**exponent


def positive_orientation(
    pos_score: float, epsilon: float = DEFAULT_EPSILON
) -> float:
    """Flips a positively-oriented score via 1 / (pos_score + epsilon)."""
    if not pos_score >= 0.0:
        raise DomainError(
            "Positively-oriented score must be >= 0. |"
            f" pos_score={pos_score!r}"
        )
    if not epsilon > 0.0:
        raise DomainError(f"Epsilon must be positive. | epsilon={epsilon!r}")
    return 1.0 / (pos_score + epsilon)


def positivity_guard(score: float, guard: float = POSITIVITY_GUARD) -> float:
    """Shifts a nonnegative score away from zero."""
    return score + guard


def _validated_array(raw: Iterable[float] | FloatArray) -> FloatArray:
    values = np.array(raw, dtype=np.float64).ravel()
    bad = np.flatnonzero(~(np.isfinite(values) & (values > 0.0)))
    if bad.size:
        index = int(bad[0])
        raise ScoreValidationError(index, float(values[index]))
    values.setflags(write=False)
    return values


@dataclass(frozen=True, eq=False)
class ScoreVector:
    """An ordered collection of strictly positive, finite scores."""

    values: FloatArray

    def __len__(self) -> int:
        """Number of scores."""
        return int(self.values.size)

    def __iter__(self) -> Iterator[float]:
        """Iterates over the scores as python floats."""
        return iter(self.values.tolist())

    def __eq__(self, other: object) -> bool:
        """Two vectors are equal when they hold the same scores in order."""
        if not isinstance(other, ScoreVector):
            return NotImplemented
        return bool(np.array_equal(self.values, other.values))

    def __repr__(self) -> str:
        """Readable representation."""
        return f"ScoreVector({self.values.tolist()!r})"

    @cached_property
    def total(self) -> float:
        """Sum of all scores."""
        return math.fsum(self.values.tolist())

    def tolist(self) -> list[float]:
        """Returns the scores as a plain list."""
        return self.values.tolist()


@dataclass(frozen=True, eq=False)
class LabelScoreRow:
    """Candidate scores S(x, y) for label indices y = 0, ..., K-1."""

    per_label: FloatArray

    def __post_init__(self) -> None:
        if self.per_label.size < 1:
            raise DomainError("A label score row needs at least one label.")

    def __len__(self) -> int:
        """Number of candidate labels K."""
        return int(self.per_label.size)

    def __getitem__(self, label: int) -> float:
        """Score of a single label."""
        return float(self.per_label[label])

    def __repr__(self) -> str:
        """Readable representation."""
        return f"LabelScoreRow({self.per_label.tolist()!r})"


def validate_scores(raw: Iterable[float] | FloatArray) -> ScoreVector:
    """Builds a ScoreVector, rejecting any nonpositive or non-finite entry.

    Examples:
        >>> validate_scores([1.0, 2.0])
        ScoreVector([1.0, 2.0])
        >>> validate_scores([])
        ScoreVector([])
    """
    return ScoreVector(_validated_array(raw))


def validate_row(raw: Sequence[float] | FloatArray) -> LabelScoreRow:
    """Builds a LabelScoreRow under the same rules as `validate_scores()`."""
    return LabelScoreRow(_validated_array(raw))


def label_scores(
    probs: Sequence[float] | FloatArray,
    transform: ScoreTransform = cross_entropy_score,
    *,
    guard: bool = True,
) -> LabelScoreRow:
    """Maps a row of model probabilities onto a LabelScoreRow.

    When `guard` is set, scores that come out as exactly zero (a label with
    probability one under the cross-entropy transform) are nudged upward.
    """
    scores = [transform(float(p)) for p in probs]
    if guard:
        scores = [positivity_guard(s) if s == 0.0 else s for s in scores]
    logger.debug("Transformed probabilities.", labels=len(scores))
    return validate_row(scores)
