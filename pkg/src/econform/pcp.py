"""Classical split conformal prediction (the p-value baseline)."""

from __future__ import annotations

from typing import FrozenSet

from logrus import Logger
import numpy as np

from .common import check_alpha, exact_ceil
from .core import label_set_from_threshold
from .errors import DomainError
from .scores import LabelScoreRow, ScoreVector
from .types import Bound, Threshold


logger = Logger(__name__)


def order_statistic(values: np.ndarray, k: int) -> float:
    """Returns the k-th smallest (1-indexed) entry of `values`.

    Selection runs on a copy, so `values` may be read-only.
    """
    if not 1 <= k <= values.size:
        raise DomainError(
            f"Order statistic out of range. | k={k} size={values.size}"
        )
    return float(np.partition(values.copy(), k - 1)[k - 1])


def baseline_rank(n: int, alpha: float) -> int:
    """Returns k = ceil((1 - alpha)(n + 1)).

    Examples:
        >>> baseline_rank(3, 0.5)
        2
        >>> baseline_rank(3, 0.1)
        4
    """
    return exact_ceil((1.0 - alpha) * (n + 1))


def p_conformal_threshold(calib: ScoreVector, alpha: float) -> Threshold:
    """Returns the k-th smallest calibration score, k = ceil((1-alpha)(n+1)).

    Membership is inclusive (s <= threshold). When k exceeds n the empirical
    quantile is +infinity and UNBOUNDED is returned.
    """
    check_alpha(alpha)
    n = len(calib)
    if n == 0:
        raise DomainError(
            "The split conformal baseline needs calibration data."
        )

    k = baseline_rank(n, alpha)
    if k > n:
        return Bound.UNBOUNDED
    threshold = order_statistic(calib.values, k)
    logger.debug("Computed baseline threshold.", n=n, k=k, threshold=threshold)
    return threshold


def p_conformal_set(
    row: LabelScoreRow, calib: ScoreVector, alpha: float
) -> FrozenSet[int]:
    """Labels whose score is at most the baseline threshold."""
    threshold = p_conformal_threshold(calib, alpha)
    return label_set_from_threshold(row, threshold, inclusive=True)
