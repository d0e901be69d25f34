"""Monte Carlo conformal prediction when every example carries m expert labels.

Column j of an ExpertScoreMatrix holds the scores S(X_i, Y_i^j) of the
j-th sampled label for each calibration example. Each column is an
exchangeable block with the test point, so per-column p-values and
e-values can be merged across experts.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
import math
from typing import Final, FrozenSet, Sequence

from logrus import Logger
import numpy as np
import numpy.typing as npt
from scipy import optimize

from .common import check_alpha, exact_ceil
from .core import check_test_score, label_set_from_threshold, mean_e
from .errors import DomainError, ScoreValidationError
from .pcp import order_statistic
from .scores import LabelScoreRow, ScoreVector
from .types import Bound, EValue, PValue, Threshold


logger = Logger(__name__)

# relative tolerance of the bisection for the e-variant threshold
BISECT_RTOL: Final = 1e-9

# iteration cap of that bisection
BISECT_MAXITER: Final = 200

# cap on how many times the bisection bracket may double
_MAX_DOUBLINGS: Final = 2000


@dataclass(frozen=True, eq=False)
class ExpertScoreMatrix:
    """An n x m matrix of strictly positive, finite scores."""

    scores: npt.NDArray[np.float64]

    def __post_init__(self) -> None:
        if self.scores.ndim != 2:
            raise DomainError(
                f"Expert scores must form a matrix. | ndim={self.scores.ndim}"
            )
        if self.m < 1:
            raise DomainError(
                "An expert score matrix needs at least one expert."
            )

    @classmethod
    def from_rows(
        cls, rows: Sequence[Sequence[float]] | np.ndarray
    ) -> ExpertScoreMatrix:
        """Validates and wraps a rectangular nested sequence of scores.

        Rows are calibration examples and columns are experts.
        """
        try:
            scores = np.array(rows, dtype=np.float64)
        except ValueError as e:
            raise DomainError(
                f"Expert scores must be rectangular. | error={e}"
            ) from e
        if scores.ndim != 2:
            raise DomainError(
                f"Expert scores must form a matrix. | ndim={scores.ndim}"
            )
        flat = scores.ravel()
        bad = np.flatnonzero(~(np.isfinite(flat) & (flat > 0.0)))
        if bad.size:
            index = int(bad[0])
            raise ScoreValidationError(index, float(flat[index]))
        scores.setflags(write=False)
        return cls(scores)

    @classmethod
    def from_column(cls, calib: ScoreVector) -> ExpertScoreMatrix:
        """The single-expert matrix holding `calib`."""
        return cls(calib.values.reshape(-1, 1))

    @property
    def n(self) -> int:
        """Number of calibration examples."""
        return int(self.scores.shape[0])

    @property
    def m(self) -> int:
        """Number of experts."""
        return int(self.scores.shape[1])

    @cached_property
    def column_sums(self) -> npt.NDArray[np.float64]:
        """Per-expert calibration sums."""
        return np.array([math.fsum(col) for col in self.scores.T.tolist()])

    def first_experts(self, m: int) -> ExpertScoreMatrix:
        """Keeps only the first `m` columns."""
        if not 1 <= m <= self.m:
            raise DomainError(f"Cannot keep {m} of {self.m} experts.")
        return ExpertScoreMatrix(self.scores[:, :m])


def mc_p_rank(n: int, m: int, alpha: float) -> int:
    """Pooled order statistic used by the p-variant: ceil(m(1-alpha)(n+1)) - 1.

    Examples:
        >>> mc_p_rank(4, 1, 0.5)
        2
        >>> mc_p_rank(2, 2, 0.5)
        2
    """
    return exact_ceil(m * (1.0 - alpha) * (n + 1)) - 1


def mc_p_threshold(matrix: ExpertScoreMatrix, alpha: float) -> Threshold:
    """Quantile of all m * n pooled scores (membership is inclusive).

    The level is (ceil(m(1-alpha)(n+1)) - 1) / (mn). At m = 1 this picks one
    order statistic below the split conformal baseline and is EMPTY when the
    baseline would pick the smallest score.
    """
    check_alpha(alpha)
    n, m = matrix.n, matrix.m
    if n < 1:
        raise DomainError("The Monte Carlo p-variant needs calibration data.")

    rank = mc_p_rank(n, m, alpha)
    if rank >= m * n:
        return Bound.UNBOUNDED
    if rank <= 0:
        logger.warning(
            "Monte Carlo p-variant level is zero.", n=n, m=m, alpha=alpha
        )
        return Bound.EMPTY

    threshold = order_statistic(matrix.scores.ravel(), rank)
    logger.debug(
        "Computed pooled threshold.",
        n=n,
        m=m,
        rank=rank,
        threshold=threshold,
    )
    return threshold


def mc_p_value(matrix: ExpertScoreMatrix, test_score: float) -> PValue:
    """Mean over experts of the rank p-values (#{S_i^j > s} + 1) / (n + 1)."""
    check_test_score(test_score)
    larger = (matrix.scores > test_score).sum(axis=0)
    return PValue(float(np.mean((larger + 1) / (matrix.n + 1))))


def mc_p_set(
    matrix: ExpertScoreMatrix, row: LabelScoreRow, alpha: float
) -> FrozenSet[int]:
    """Labels whose score is at most the pooled threshold."""
    threshold = mc_p_threshold(matrix, alpha)
    return label_set_from_threshold(row, threshold, inclusive=True)


def _per_expert_e(
    column_sums: npt.NDArray[np.float64],
    n: int,
    scores: npt.NDArray[np.float64],
) -> npt.NDArray[np.float64]:
    """E-values of each score (rows) against each expert column."""
    s = scores[:, None]
    if n == 0:
        return np.ones((s.shape[0], column_sums.size))
    return s * (n + 1) / (column_sums[None, :] + s)


def _mean_e(
    column_sums: npt.NDArray[np.float64],
    n: int,
    scores: npt.NDArray[np.float64],
) -> npt.NDArray[np.float64]:
    return _per_expert_e(column_sums, n, scores).mean(axis=1)


def mc_e_value(matrix: ExpertScoreMatrix, test_score: float) -> EValue:
    """Arithmetic mean over experts of the per-column conformal e-values."""
    check_test_score(test_score)
    per_expert = _per_expert_e(
        matrix.column_sums, matrix.n, np.array([test_score])
    )
    return mean_e(per_expert[0].tolist())


def mc_e_threshold(matrix: ExpertScoreMatrix, alpha: float) -> Threshold:
    """The score s* at which the mean e-value reaches 1 / alpha.

    Membership is s < s*. The mean e-value is continuous and strictly
    increasing in s with supremum n + 1, so s* exists iff (n + 1) alpha > 1.
    """
    check_alpha(alpha)
    n = matrix.n
    if (n + 1) * alpha <= 1.0:
        return Bound.UNBOUNDED

    target = 1.0 / alpha
    sums = matrix.column_sums

    def gap(s: float) -> float:
        return float(_mean_e(sums, n, np.array([s]))[0]) - target

    upper = float(sums.max())
    for _ in range(_MAX_DOUBLINGS):
        if gap(upper) > 0.0:
            break
        upper *= 2.0
    else:
        raise DomainError(
            f"Could not bracket the e-variant threshold. | n={n} alpha={alpha}"
        )

    result = optimize.root_scalar(
        gap,
        bracket=[0.0, upper],
        method="bisect",
        rtol=BISECT_RTOL,
        maxiter=BISECT_MAXITER,
    )
    threshold = float(result.root)
    logger.debug(
        "Bisected e-variant threshold.",
        threshold=threshold,
        upper=upper,
        iterations=result.iterations,
    )
    return threshold


def mc_e_value_grid(
    matrix: ExpertScoreMatrix, test_scores: npt.NDArray[np.float64]
) -> npt.NDArray[np.float64]:
    """mc_e_value() applied elementwise to an array of candidate scores."""
    scores = np.asarray(test_scores, dtype=np.float64)
    values = _mean_e(matrix.column_sums, matrix.n, scores.ravel())
    return values.reshape(scores.shape)


def mc_e_set(
    matrix: ExpertScoreMatrix, row: LabelScoreRow, alpha: float
) -> FrozenSet[int]:
    """Labels whose mean e-value stays below 1 / alpha, evaluated directly."""
    check_alpha(alpha)
    values = mc_e_value_grid(matrix, row.per_label)
    return frozenset(int(y) for y in np.flatnonzero(values < 1.0 / alpha))
