"""E-variables and rank p-variables for a single exchangeable block."""

from __future__ import annotations

import math
from typing import FrozenSet, Sequence

from logrus import Logger

from .common import admits, check_alpha
from .errors import DomainError
from .scores import LabelScoreRow, ScoreVector
from .types import Bound, EValue, PValue, Threshold


logger = Logger(__name__)


def check_test_score(test_score: float) -> None:
    """Raises DomainError unless the test score is positive and finite."""
    if not (test_score > 0.0 and math.isfinite(test_score)):
        raise DomainError(
            "Test score must be strictly positive and finite. |"
            f" test_score={test_score!r}"
        )


def e_value(test_score: float, calib: ScoreVector) -> EValue:
    """Returns the conformal e-value of `test_score` against `calib`.

    This is the test score divided by the average of all n + 1 scores, so
    its average over every choice of test point in an exchangeable block is
    exactly one.

    Examples:
        >>> from econform.scores import validate_scores
        >>> e_value(4.0, validate_scores([1.0, 2.0, 3.0]))
        1.6
        >>> e_value(5.0, validate_scores([]))
        1.0
    """
    check_test_score(test_score)
    n = len(calib)
    if n == 0:
        return EValue(1.0)
    return EValue(test_score * (n + 1) / (calib.total + test_score))


def p_value_rank(test_score: float, calib: ScoreVector) -> PValue:
    """Returns (#{i : S_i > test_score} + 1) / (n + 1).

    Ties count against the test point, which makes this conservative.
    """
    check_test_score(test_score)
    larger = int((calib.values > test_score).sum())
    return PValue((larger + 1) / (len(calib) + 1))


def mean_e(values: Sequence[float]) -> EValue:
    """Arithmetic mean of e-values (itself an e-value)."""
    if not values:
        raise DomainError("Cannot average an empty list of e-values.")
    if any(v < 0.0 or not math.isfinite(v) for v in values):
        raise DomainError(f"E-values must be nonnegative. | values={values!r}")
    return EValue(math.fsum(values) / len(values))


def e_set_threshold(calib: ScoreVector, alpha: float) -> Threshold:
    """Score threshold of the fixed-alpha conformal e-set.

    A candidate score s belongs to the set iff s < threshold, which is the
    closed-form inversion of e_value(s, calib) < 1 / alpha.
    """
    check_alpha(alpha)
    n = len(calib)
    denom = (n + 1) * alpha - 1.0
    if denom <= 0.0:
        return Bound.UNBOUNDED
    threshold = calib.total / denom
    logger.debug("Computed e-set threshold.", n=n, threshold=threshold)
    return threshold


def label_set_from_threshold(
    row: LabelScoreRow, threshold: Threshold, *, inclusive: bool = False
) -> FrozenSet[int]:
    """Returns every label index whose score the threshold admits."""
    return frozenset(
        y
        for y, score in enumerate(row.per_label.tolist())
        if admits(threshold, score, inclusive=inclusive)
    )
