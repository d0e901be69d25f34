"""Fixed-size conformal sets with data-dependent coverage levels."""

from __future__ import annotations

from dataclasses import dataclass
import math
from typing import Final, FrozenSet, Iterable, List, Sequence, Tuple

from eris import ErisResult, Err, Ok
from logrus import Logger
import numpy as np

from .common import check_alpha
from .core import e_set_threshold, label_set_from_threshold
from .errors import DomainError, SelectionInfeasibleError
from .scores import LabelScoreRow, ScoreVector


logger = Logger(__name__)

Profile = Tuple[Tuple[float, int], ...]

# candidates are generated with this much slack at the upper endpoint
_GRID_ATOL: Final = 1e-12

# decimals kept when materializing a start:stop:step grid
_GRID_DECIMALS: Final = 12

_GRID_MAX_SIZE: Final = 100_000


@dataclass(frozen=True)
class AlphaGrid:
    """Strictly increasing candidate levels in (0, 1)."""

    candidates: Tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.candidates:
            raise DomainError("An alpha grid needs at least one candidate.")
        for alpha in self.candidates:
            check_alpha(alpha)
        for lo, hi in zip(self.candidates, self.candidates[1:]):
            if not lo < hi:
                raise DomainError(
                    "Alpha grid candidates must be strictly increasing. |"
                    f" lo={lo!r} hi={hi!r}"
                )

    def __len__(self) -> int:
        """Number of candidate levels."""
        return len(self.candidates)

    @classmethod
    def default(cls) -> AlphaGrid:
        """The grid {0.01, 0.02, ..., 0.30}."""
        return cls(tuple(round(0.01 * i, 2) for i in range(1, 31)))

    @classmethod
    def from_spec(cls, spec: str) -> ErisResult[AlphaGrid]:
        """Parses a `start:stop:step` grid (both endpoints included).

        Examples:
            >>> AlphaGrid.from_spec("0.1:0.5:0.1").unwrap().candidates
            (0.1, 0.2, 0.3, 0.4, 0.5)
            >>> AlphaGrid.from_spec("0.2").err() is not None
            True
        """
        parts = spec.split(":")
        if len(parts) != 3:
            return Err(
                f"Grid must have the form start:stop:step. | spec={spec!r}"
            )

        try:
            start, stop, step = (float(p) for p in parts)
        except ValueError:
            return Err(f"Grid bounds must be numbers. | spec={spec!r}")

        if not step > 0.0:
            return Err(f"Grid step must be positive. | spec={spec!r}")
        if stop < start:
            return Err(
                f"Grid stop must not precede its start. | spec={spec!r}"
            )

        if (stop - start) / step > _GRID_MAX_SIZE:
            return Err(f"Grid has too many candidates. | spec={spec!r}")

        candidates: List[float] = []
        while (value := start + len(candidates) * step) <= stop + _GRID_ATOL:
            candidates.append(round(value, _GRID_DECIMALS))
        try:
            return Ok(cls(tuple(candidates)))
        except DomainError as e:
            return Err(f"Invalid alpha grid: {e} | spec={spec!r}")


@dataclass(frozen=True)
class AlphaSelection:
    """The chosen level alpha~ together with the profile that produced it."""

    alpha_tilde: float
    target_size: int
    profile: Profile
    achieved_size: int


@dataclass(frozen=True)
class RatioEstimate:
    """Monte Carlo estimate of E[1{miss} / alpha~] and its standard error."""

    value: float
    se: float
    trials: int


def _check_target_size(target_size: int) -> None:
    if target_size < 1:
        raise DomainError(
            "Target set size must be at least one. |"
            f" target_size={target_size}"
        )


def set_size_at_alpha(
    calib: ScoreVector, row: LabelScoreRow, alpha: float
) -> int:
    """Number of labels in the fixed-alpha conformal e-set."""
    return len(label_set_from_threshold(row, e_set_threshold(calib, alpha)))


def size_profile(
    calib: ScoreVector, row: LabelScoreRow, grid: AlphaGrid
) -> Profile:
    """Set size at every grid candidate, computed in one pass."""
    n = len(calib)
    alphas = np.asarray(grid.candidates)
    denom = (n + 1) * alphas - 1.0
    with np.errstate(divide="ignore"):
        thresholds = np.where(denom > 0.0, calib.total / denom, np.inf)
    sizes = (row.per_label[None, :] < thresholds[:, None]).sum(axis=1)
    return tuple(
        (float(alpha), int(size))
        for alpha, size in zip(grid.candidates, sizes)
    )


def select_alpha(
    calib: ScoreVector,
    row: LabelScoreRow,
    target_size: int,
    grid: AlphaGrid,
) -> AlphaSelection:
    """Smallest grid level whose e-set holds at most `target_size` labels.

    Raises:
        SelectionInfeasibleError: If no grid candidate is small enough.
    """
    _check_target_size(target_size)
    profile = size_profile(calib, row, grid)
    for alpha, size in profile:
        if size <= target_size:
            logger.debug(
                "Selected data-dependent alpha.",
                alpha_tilde=alpha,
                size=size,
                target_size=target_size,
            )
            return AlphaSelection(
                alpha_tilde=alpha,
                target_size=target_size,
                profile=profile,
                achieved_size=size,
            )

    logger.warning(
        "No alpha on the grid yields a small enough set.",
        target_size=target_size,
        smallest_size=min(size for _, size in profile),
    )
    raise SelectionInfeasibleError(target_size, profile)


def fixed_size_set(
    calib: ScoreVector,
    row: LabelScoreRow,
    target_size: int,
    grid: AlphaGrid,
) -> Tuple[AlphaSelection, FrozenSet[int]]:
    """Selects alpha~ and returns the e-set at that level."""
    selection = select_alpha(calib, row, target_size, grid)
    labels = label_set_from_threshold(
        row, e_set_threshold(calib, selection.alpha_tilde)
    )
    return selection, labels


def posthoc_ratio_estimate(
    trials: Iterable[Tuple[bool, float]]
) -> RatioEstimate:
    """Averages 1{miss} / alpha~ over trials.

    A value at most one (up to noise) is the empirical form of post-hoc
    validity: the expected ratio of miscoverage to the chosen level.
    """
    pairs = list(trials)
    if not pairs:
        raise DomainError("Cannot estimate a ratio from zero trials.")

    ratios = np.empty(len(pairs))
    for i, (covered, alpha_tilde) in enumerate(pairs):
        if not alpha_tilde > 0.0:
            raise DomainError(
                "alpha~ must be positive. |"
                f" trial={i} alpha_tilde={alpha_tilde!r}"
            )
        ratios[i] = 0.0 if covered else 1.0 / alpha_tilde

    n = len(pairs)
    se = float(ratios.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return RatioEstimate(value=float(ratios.mean()), se=se, trials=n)


def subgaussian_bound(
    alpha_tilde_observed: float, sigma: float, delta: float
) -> float:
    """High-probability coverage bound when alpha~ is sigma-sub-Gaussian.

    The result may be nonpositive, in which case the bound is vacuous.

    Examples:
        >>> subgaussian_bound(0.1, 0.0, 0.05)
        0.9
        >>> round(subgaussian_bound(0.1, 0.01, 0.05), 6)
        0.875523
    """
    if sigma < 0.0:
        raise DomainError(f"sigma must be nonnegative. | sigma={sigma!r}")
    if not 0.0 < delta < 1.0:
        raise DomainError(f"delta must lie in (0, 1). | delta={delta!r}")
    slack = sigma * math.sqrt(2.0 * math.log(1.0 / delta))
    return 1.0 - alpha_tilde_observed - slack


def taylor_coverage(alpha_tildes: Sequence[float]) -> float:
    """First-order approximation 1 - mean(alpha~) of the achieved coverage."""
    if not alpha_tildes:
        raise DomainError("Cannot average an empty list of levels.")
    return 1.0 - math.fsum(alpha_tildes) / len(alpha_tildes)


def profile_rows(profile: Profile) -> List[dict]:
    """Profile as records, ready for CSV output."""
    return [{"alpha": alpha, "set_size": size} for alpha, size in profile]
