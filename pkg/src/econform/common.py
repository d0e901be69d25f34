"""Common code used throughout this package."""

from __future__ import annotations

import math
from typing import Final

from .errors import DomainError
from .types import Bound, Threshold


# default epsilon used when flipping positively-oriented scores
DEFAULT_EPSILON: Final = 1e-6

# added to a score that may be exactly zero (e.g. -log(1))
POSITIVITY_GUARD: Final = 1e-12

# default exponent of the inverse-power score
DEFAULT_EXPONENT: Final = 0.25

# default cap on the GRAPA betting fraction
DEFAULT_GAMMA: Final = 0.5

# defaults of the synthetic classifier: Dirichlet concentration of the true
# label distributions, log-normal model noise and the score exponent
DEFAULT_CONCENTRATION: Final = 0.05
DEFAULT_NOISE: Final = 0.2
DEFAULT_MODEL_EXPONENT: Final = 1.0

# smallest latent probability the synthetic classifier works with
PROB_FLOOR: Final = 1e-12

# relative slack used when taking the ceiling of a computed product
_CEIL_RTOL: Final = 1e-12

# tokens used to serialize non-numeric thresholds
UNBOUNDED_TOKEN: Final = "inf"
EMPTY_TOKEN: Final = "empty"


def check_alpha(alpha: float) -> float:
    """Raises DomainError unless 0 < alpha < 1."""
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1). | alpha={alpha!r}")
    return alpha


def exact_ceil(x: float) -> int:
    """Ceiling that forgives floating-point noise just above an integer.

    Examples:
        >>> exact_ceil((1 - 0.7) * 10)
        3
        >>> exact_ceil(2.5)
        3
        >>> exact_ceil(4.0)
        4
    """
    nearest = round(x)
    if abs(x - nearest) <= _CEIL_RTOL * max(1.0, abs(x)):
        return int(nearest)
    return math.ceil(x)


def admits(threshold: Threshold, score: float, *, inclusive: bool) -> bool:
    """Returns True if `score` belongs to the set described by `threshold`.

    Examples:
        >>> admits(2.0, 2.0, inclusive=True)
        True
        >>> admits(2.0, 2.0, inclusive=False)
        False
        >>> admits(Bound.UNBOUNDED, 1e300, inclusive=False)
        True
        >>> admits(Bound.EMPTY, 1e-300, inclusive=True)
        False
    """
    if threshold is Bound.UNBOUNDED:
        return True
    if threshold is Bound.EMPTY:
        return False
    if inclusive:
        return score <= threshold
    return score < threshold


def threshold_token(threshold: Threshold) -> float | str:
    """Converts a threshold into something JSON and CSV can carry."""
    if threshold is Bound.UNBOUNDED:
        return UNBOUNDED_TOKEN
    if threshold is Bound.EMPTY:
        return EMPTY_TOKEN
    return float(threshold)
