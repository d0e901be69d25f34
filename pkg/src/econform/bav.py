"""Batch anytime-valid conformal prediction.

Each batch contributes one conformal e-value. Multiplying them (or mixing
them with a betting fraction) yields a nonnegative test martingale, and
Ville's inequality turns the running wealth into a sequence of conformal
sets that hold simultaneously over every batch with probability 1 - alpha.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
import math
from typing import (
    ClassVar,
    Final,
    Hashable,
    Iterable,
    List,
    Optional,
    Sequence,
    Tuple,
    Union,
)

from logrus import Logger
import numpy as np
from scipy import optimize

from .common import DEFAULT_GAMMA, admits, check_alpha
from .core import e_value
from .errors import DomainError
from .scores import ScoreVector
from .types import Bound, EValue, StrategyName, Threshold


logger = Logger(__name__)

# absolute tolerance (in lambda) of the GRAPA maximizer
LAMBDA_XTOL: Final = 1e-9

# log-wealth above which exp() is no longer representable
_MAX_EXP_ARG: Final = 700.0


@dataclass(frozen=True)
class MartingaleState:
    """Snapshot of a test martingale after `t` batches.

    Wealth lives in log space. A zero increment sets `bankrupt`, after which
    the wealth stays zero forever and `log_wealth` is -inf.
    """

    log_wealth: float = 0.0
    t: int = 0
    e_history: Tuple[float, ...] = ()
    bankrupt: bool = False
    max_log_wealth: float = 0.0

    @classmethod
    def from_wealth(cls, wealth: float, t: int = 0) -> MartingaleState:
        """Builds a state with the given wealth and a blank history.

        Only useful for resuming a stream or for tests; `t` must be zero
        unless the caller does not care about the history invariant.
        """
        if wealth < 0.0 or math.isnan(wealth):
            raise DomainError(
                f"Wealth must be nonnegative. | wealth={wealth!r}"
            )
        if wealth == 0.0:
            return cls(log_wealth=-math.inf, t=t, bankrupt=True)
        log_wealth = math.log(wealth)
        return cls(
            log_wealth=log_wealth, t=t, max_log_wealth=max(0.0, log_wealth)
        )

    @property
    def wealth(self) -> float:
        """M_t in linear space (inf if it no longer fits in a float)."""
        if self.bankrupt:
            return 0.0
        if self.log_wealth > _MAX_EXP_ARG:
            return math.inf
        return math.exp(self.log_wealth)

    @property
    def running_max(self) -> float:
        """max_{s <= t} M_s, the quantity Ville's inequality controls."""
        if self.max_log_wealth > _MAX_EXP_ARG:
            return math.inf
        return math.exp(self.max_log_wealth)

    def crossed(self, alpha: float) -> bool:
        """True if the wealth has ever reached 1 / alpha."""
        return self.max_log_wealth >= -math.log(alpha)

    def _advance(self, e: float, log_increment: float) -> MartingaleState:
        history = self.e_history + (e,)
        if self.bankrupt or log_increment == -math.inf:
            return replace(
                self,
                log_wealth=-math.inf,
                t=self.t + 1,
                e_history=history,
                bankrupt=True,
            )
        log_wealth = self.log_wealth + log_increment
        return replace(
            self,
            log_wealth=log_wealth,
            t=self.t + 1,
            e_history=history,
            max_log_wealth=max(self.max_log_wealth, log_wealth),
        )


@dataclass(frozen=True)
class AllIn:
    """Bet everything on every batch: M_t = prod_s E_s."""

    name: ClassVar[StrategyName] = "all-in"


@dataclass(frozen=True)
class Grapa:
    """Bet a fraction lambda_t in [0, gamma] chosen from past e-values."""

    gamma: float = DEFAULT_GAMMA
    name: ClassVar[StrategyName] = "grapa"

    def __post_init__(self) -> None:
        if not 0.0 < self.gamma <= 1.0:
            raise DomainError(
                f"gamma must lie in (0, 1]. | gamma={self.gamma!r}"
            )


Strategy = Union[AllIn, Grapa]
ALL_IN: Final = AllIn()


def strategy_from_name(
    name: StrategyName, gamma: float = DEFAULT_GAMMA
) -> Strategy:
    """Maps a command-line strategy name onto a Strategy."""
    if name == "all-in":
        return ALL_IN
    if name == "grapa":
        return Grapa(gamma)
    raise DomainError(f"Unknown betting strategy. | name={name!r}")


@dataclass(frozen=True)
class BatchOutcome:
    """What happened to a single batch's test point."""

    batch_id: Hashable
    n_t: int
    threshold: Threshold
    e_value_observed: EValue
    covered: bool
    lam: float = 1.0
    log_wealth: float = 0.0


def bav_threshold(
    state: MartingaleState, calib: ScoreVector, alpha: float
) -> Threshold:
    """Score threshold of the all-in batch anytime-valid set.

    With K = M_{t-1} (n_t + 1) alpha and S the calibration sum, the test
    score v is covered iff v (K - 1) < S.
    """
    check_alpha(alpha)
    n = len(calib)
    k = state.wealth * (n + 1) * alpha
    if k <= 1.0:
        return Bound.UNBOUNDED
    if calib.total == 0.0:
        return Bound.EMPTY
    return calib.total / (k - 1.0)


def grapa_threshold(
    state: MartingaleState, calib: ScoreVector, alpha: float, lam: float
) -> Threshold:
    """Score threshold when the wealth grows by 1 - lam + lam * E.

    The covered region is E(v) < c with c = (1 / (alpha M) - (1 - lam)) / lam,
    which inverts in closed form because E(v) = v (n + 1) / (S + v) is
    increasing in v and bounded by n + 1.
    """
    check_alpha(alpha)
    _check_lambda(lam)
    wealth = state.wealth
    if wealth == 0.0:
        return Bound.UNBOUNDED

    slack = 1.0 / (alpha * wealth) - (1.0 - lam)
    if slack <= 0.0:
        return Bound.EMPTY
    if lam == 0.0:
        return Bound.UNBOUNDED

    n = len(calib)
    c = slack / lam
    if c >= n + 1:
        return Bound.UNBOUNDED
    if calib.total == 0.0:
        return Bound.EMPTY
    return c * calib.total / (n + 1 - c)


def product_update(state: MartingaleState, e: float) -> MartingaleState:
    """Multiplies the wealth by `e`."""
    if e < 0.0 or math.isnan(e):
        raise DomainError(f"E-values must be nonnegative. | e={e!r}")
    log_increment = math.log(e) if e > 0.0 else -math.inf
    return state._advance(e, log_increment)


def _check_lambda(lam: float) -> None:
    if not 0.0 <= lam <= 1.0:
        raise DomainError(f"lambda must lie in [0, 1]. | lambda={lam!r}")


def mixture_update(
    state: MartingaleState, e: float, lam: float
) -> MartingaleState:
    """Multiplies the wealth by 1 - lam + lam * e.

    `lam` must be computed from `state.e_history` alone.
    """
    _check_lambda(lam)
    if lam == 1.0:
        return product_update(state, e)
    if e < 0.0 or math.isnan(e):
        raise DomainError(f"E-values must be nonnegative. | e={e!r}")
    return state._advance(e, math.log1p(lam * (e - 1.0)))


def grapa_lambda(e_history: Sequence[float], gamma: float) -> float:
    """Betting fraction maximizing the average past log-wealth over [0, gamma].

    The objective is concave in lambda, so the maximizer is an endpoint
    unless the derivative changes sign inside the interval. A flat
    objective resolves to zero.
    """
    if not 0.0 < gamma <= 1.0:
        raise DomainError(f"gamma must lie in (0, 1]. | gamma={gamma!r}")
    if not e_history:
        return 0.0

    e = np.asarray(e_history, dtype=np.float64)

    def slope(lam: float) -> float:
        with np.errstate(divide="ignore"):
            return float(np.mean((e - 1.0) / (1.0 - lam + lam * e)))

    if slope(0.0) <= 0.0:
        return 0.0

    upper = gamma
    slope_at_upper = slope(upper)
    if slope_at_upper >= 0.0:
        return gamma
    if not math.isfinite(slope_at_upper):
        # a zero e-value sends the slope to -inf at lambda = 1
        upper = gamma - LAMBDA_XTOL / 10

    result = optimize.root_scalar(
        slope, bracket=[0.0, upper], method="brentq", xtol=LAMBDA_XTOL
    )
    lam = min(max(float(result.root), 0.0), gamma)
    logger.debug("Chose GRAPA betting fraction.", lam=lam, t=len(e_history))
    return lam


def process_batch(
    state: MartingaleState,
    calib: ScoreVector,
    test_score: float,
    alpha: float,
    strategy: Strategy = ALL_IN,
    *,
    batch_id: Optional[Hashable] = None,
) -> Tuple[BatchOutcome, MartingaleState]:
    """Builds batch t's set from the pre-update state, then bets on the batch.

    The threshold depends only on past batches and on this batch's
    calibration scores; the test score is looked at afterwards.
    """
    if isinstance(strategy, Grapa):
        lam = grapa_lambda(state.e_history, strategy.gamma)
        threshold = grapa_threshold(state, calib, alpha, lam)
    else:
        lam = 1.0
        threshold = bav_threshold(state, calib, alpha)

    covered = admits(threshold, test_score, inclusive=False)
    e = e_value(test_score, calib)
    new_state = mixture_update(state, e, lam)

    if threshold is Bound.EMPTY:
        logger.warning(
            "Batch produced an empty conformal set.",
            batch_id=batch_id,
            t=new_state.t,
            log_wealth=state.log_wealth,
        )
    if new_state.bankrupt and not state.bankrupt:
        logger.warning(
            "Martingale wealth hit zero.", batch_id=batch_id, t=new_state.t
        )

    outcome = BatchOutcome(
        batch_id=new_state.t if batch_id is None else batch_id,
        n_t=len(calib),
        threshold=threshold,
        e_value_observed=e,
        covered=covered,
        lam=lam,
        log_wealth=new_state.log_wealth,
    )
    return outcome, new_state


@dataclass(frozen=True)
class StreamResult:
    """Outcomes of every batch in a stream plus the final martingale state."""

    outcomes: List[BatchOutcome] = field(default_factory=list)
    state: MartingaleState = field(default_factory=MartingaleState)

    @property
    def all_covered(self) -> bool:
        """True if every batch's test point was covered."""
        return all(outcome.covered for outcome in self.outcomes)


def run_stream(
    batches: Iterable[Tuple[Hashable, ScoreVector, float]],
    alpha: float,
    strategy: Strategy = ALL_IN,
    state: Optional[MartingaleState] = None,
) -> StreamResult:
    """Feeds (batch_id, calib, test_score) triples through process_batch()."""
    check_alpha(alpha)
    state = MartingaleState() if state is None else state
    outcomes: List[BatchOutcome] = []
    for batch_id, calib, test_score in batches:
        outcome, state = process_batch(
            state, calib, test_score, alpha, strategy, batch_id=batch_id
        )
        outcomes.append(outcome)

    logger.debug(
        "Processed batch stream.",
        batches=len(outcomes),
        strategy=strategy.name,
        log_wealth=state.log_wealth,
    )
    return StreamResult(outcomes=outcomes, state=state)
