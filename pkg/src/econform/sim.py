"""Synthetic data generators and the coverage experiments built on them.

Every experiment takes a master seed. Repetition (or split) number `i`
draws from its own substream, so reports are reproducible bit for bit and
repetitions never share random numbers.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
import math
from typing import (
    Any,
    ClassVar,
    Dict,
    Iterator,
    List,
    Mapping,
    Optional,
    Tuple,
    Union,
)

from eris import ErisResult, Err, Ok
from logrus import Logger
import numpy as np
import numpy.typing as npt

from .bav import ALL_IN, Grapa, MartingaleState, Strategy, process_batch
from .common import (
    DEFAULT_CONCENTRATION,
    DEFAULT_MODEL_EXPONENT,
    DEFAULT_NOISE,
    PROB_FLOOR,
    admits,
    check_alpha,
)
from .core import label_set_from_threshold
from .errors import DomainError, PreconditionError, SelectionInfeasibleError
from .mccp import ExpertScoreMatrix, mc_e_value_grid, mc_p_threshold
from .pcp import p_conformal_threshold
from .posthoc import (
    AlphaGrid,
    fixed_size_set,
    posthoc_ratio_estimate,
    taylor_coverage,
)
from .scores import (
    LabelScoreRow,
    ScoreVector,
    inverse_power_scores,
    validate_row,
    validate_scores,
)
from .types import Bound


logger = Logger(__name__)

FloatArray = npt.NDArray[np.float64]

# how many sample log-wealth paths a BAV report keeps
SAMPLE_PATHS = 3

# an ambiguous example has at least this many plausible labels...
MIN_PLAUSIBLE_LABELS = 2
# ...where a label is plausible if its probability reaches this value
PLAUSIBLE_PROB = 0.1


###############################################################################
# Score distributions
###############################################################################
@dataclass(frozen=True)
class LogNormal:
    """exp(N(mu, sigma^2)) scores."""

    mu: float = 0.0
    sigma: float = 1.0
    name: ClassVar[str] = "lognormal"

    def __post_init__(self) -> None:
        if not self.sigma > 0.0:
            raise DomainError(f"sigma must be positive. | sigma={self.sigma}")

    def draw(
        self, rng: np.random.Generator, size: int, scale: float = 1.0
    ) -> FloatArray:
        """Draws `size` scores multiplied by `scale`."""
        return scale * rng.lognormal(self.mu, self.sigma, size)


@dataclass(frozen=True)
class Exponential:
    """Exponential scores with the given rate."""

    rate: float = 1.0
    name: ClassVar[str] = "exponential"

    def __post_init__(self) -> None:
        if not self.rate > 0.0:
            raise DomainError(f"rate must be positive. | rate={self.rate}")

    def draw(
        self, rng: np.random.Generator, size: int, scale: float = 1.0
    ) -> FloatArray:
        """Draws `size` scores multiplied by `scale`."""
        return scale * rng.exponential(1.0 / self.rate, size)


@dataclass(frozen=True)
class Pareto:
    """Pareto scores with tail index `shape`, supported on [xm, inf)."""

    shape: float = 3.0
    xm: float = 1.0
    name: ClassVar[str] = "pareto"

    def __post_init__(self) -> None:
        if not (self.shape > 0.0 and self.xm > 0.0):
            raise DomainError(
                "Pareto parameters must be positive. |"
                f" shape={self.shape} xm={self.xm}"
            )

    def draw(
        self, rng: np.random.Generator, size: int, scale: float = 1.0
    ) -> FloatArray:
        """Draws `size` scores multiplied by `scale`."""
        return scale * self.xm * (1.0 + rng.pareto(self.shape, size))


@dataclass(frozen=True)
class Constant:
    """Degenerate scores that all equal `value`."""

    value: float = 1.0
    name: ClassVar[str] = "constant"

    def __post_init__(self) -> None:
        if not (self.value > 0.0 and math.isfinite(self.value)):
            raise DomainError(f"value must be positive. | value={self.value}")

    def draw(
        self, rng: np.random.Generator, size: int, scale: float = 1.0
    ) -> FloatArray:
        """Returns `size` copies of the constant (the rng is untouched)."""
        del rng
        return np.full(size, scale * self.value)


ScoreDist = Union[LogNormal, Exponential, Pareto, Constant]

_DIST_TYPES: Dict[str, Any] = {
    cls.name: cls for cls in (LogNormal, Exponential, Pareto, Constant)
}


def parse_dist(spec: str) -> ErisResult[ScoreDist]:
    """Parses distribution specs like "exponential:1" or "lognormal:0:1".

    Examples:
        >>> parse_dist("pareto:3:2").unwrap()
        Pareto(shape=3.0, xm=2.0)
        >>> parse_dist("exponential").unwrap()
        Exponential(rate=1.0)
        >>> parse_dist("gamma:1").err() is not None
        True
    """
    name, *raw_params = spec.split(":")
    dist_type = _DIST_TYPES.get(name.strip().lower())
    if dist_type is None:
        return Err(
            f"Unknown score distribution. | name={name!r}"
            f" known={sorted(_DIST_TYPES)}"
        )

    try:
        params = [float(p) for p in raw_params]
    except ValueError:
        return Err(f"Distribution parameters must be numbers. | spec={spec!r}")

    try:
        return Ok(dist_type(*params))
    except (DomainError, TypeError) as e:
        return Err(f"Bad distribution parameters: {e} | spec={spec!r}")


def dist_label(dist: ScoreDist) -> str:
    """Inverse of parse_dist()."""
    if isinstance(dist, LogNormal):
        params = [dist.mu, dist.sigma]
    elif isinstance(dist, Exponential):
        params = [dist.rate]
    elif isinstance(dist, Pareto):
        params = [dist.shape, dist.xm]
    else:
        params = [dist.value]
    return ":".join([dist.name] + [repr(float(p)) for p in params])


def substream(seed: int, index: int) -> np.random.Generator:
    """Independent generator number `index` derived from a master seed."""
    return np.random.default_rng(
        np.random.SeedSequence(seed, spawn_key=(index,))
    )


def gen_exchangeable_scores(
    dist: ScoreDist,
    n: int,
    rng: np.random.Generator,
    scale: float = 1.0,
) -> ScoreVector:
    """Draws `n` i.i.d. positive scores."""
    if n < 0:
        raise DomainError(f"Cannot draw a negative number of scores. | n={n}")
    if not scale > 0.0:
        raise DomainError(f"scale must be positive. | scale={scale}")
    return validate_scores(dist.draw(rng, n, scale))


###############################################################################
# Synthetic classifier
###############################################################################
def model_probs(
    latent: FloatArray, noise: float, rng: np.random.Generator
) -> FloatArray:
    """A miscalibrated model: latent probabilities times log-normal noise.

    Latent probabilities are floored at PROB_FLOOR first, so every label
    keeps a positive model probability.
    """
    weights = np.maximum(latent, PROB_FLOOR) * np.exp(
        noise * rng.standard_normal(latent.shape)
    )
    return weights / weights.sum(axis=-1, keepdims=True)


def sample_labels(probs: FloatArray, rng: np.random.Generator) -> np.ndarray:
    """One categorical draw per row of `probs`."""
    cdf = np.cumsum(probs, axis=-1)
    u = rng.random(probs.shape[:-1])
    labels = (u[..., None] > cdf).sum(axis=-1)
    return np.minimum(labels, probs.shape[-1] - 1)


@dataclass(frozen=True)
class ClassifierModel:
    """Synthetic classification data scored by a noisy model.

    True labels follow Dirichlet(concentration) label distributions. The
    model sees those distributions through multiplicative log-normal
    noise, and the score of label y is 1 / p_model(y)**exponent.
    """

    K: int = 10
    concentration: float = DEFAULT_CONCENTRATION
    noise: float = DEFAULT_NOISE
    exponent: float = DEFAULT_MODEL_EXPONENT

    def __post_init__(self) -> None:
        if self.K < 2:
            raise DomainError(f"Need at least two labels. | K={self.K}")
        if not (
            self.concentration > 0.0
            and self.noise >= 0.0
            and self.exponent > 0.0
        ):
            raise DomainError(
                "Bad classifier parameters. |"
                f" concentration={self.concentration} noise={self.noise}"
                f" exponent={self.exponent}"
            )

    def latent(self, size: int, rng: np.random.Generator) -> FloatArray:
        """Draws `size` label distributions."""
        return rng.dirichlet(np.full(self.K, self.concentration), size)

    def ambiguous_latent(
        self, size: int, rng: np.random.Generator
    ) -> FloatArray:
        """Draws label distributions with several plausible labels."""
        kept: List[FloatArray] = []
        count = 0
        while count < size:
            draws = self.latent(size, rng)
            plausible = (draws >= PLAUSIBLE_PROB).sum(axis=1)
            draws = draws[plausible >= MIN_PLAUSIBLE_LABELS]
            kept.append(draws)
            count += len(draws)
        return np.concatenate(kept)[:size]

    def score_rows(
        self, latent: FloatArray, rng: np.random.Generator
    ) -> FloatArray:
        """Label scores (one row per example) the model assigns."""
        probs = model_probs(latent, self.noise, rng)
        return inverse_power_scores(probs, self.exponent)

    def draw(
        self, size: int, rng: np.random.Generator
    ) -> Tuple[FloatArray, np.ndarray]:
        """Draws `size` examples as (label score rows, true labels)."""
        latent = self.latent(size, rng)
        labels = sample_labels(latent, rng)
        return self.score_rows(latent, rng), labels

    def params(self) -> Dict[str, Any]:
        """Parameters for reports."""
        return {
            "concentration": self.concentration,
            "noise": self.noise,
            "exponent": self.exponent,
        }


###############################################################################
# Reports
###############################################################################
@dataclass(frozen=True)
class CoverageReport:
    """Empirical coverage of a method plus its diagnostics.

    Coverage and its standard error are None when no trial counted.
    """

    method: str
    params: Mapping[str, Any]
    trials: int
    empirical_coverage: Optional[float]
    coverage_se: Optional[float]
    set_size_histogram: Mapping[int, int] = field(default_factory=dict)
    extras: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.empirical_coverage is None:
            return
        if not 0.0 <= self.empirical_coverage <= 1.0:
            raise DomainError(
                "Coverage must be a fraction. |"
                f" coverage={self.empirical_coverage}"
            )

    def to_dict(self) -> Dict[str, Any]:
        """Plain-data view with a stable key layout."""
        return {
            "method": self.method,
            "params": dict(self.params),
            "trials": self.trials,
            "coverage": self.empirical_coverage,
            "se": self.coverage_se,
            "histogram": {
                str(size): count
                for size, count in sorted(self.set_size_histogram.items())
            },
            "extras": dict(self.extras),
        }


def binomial_se(p: float, trials: int) -> float:
    """Standard error sqrt(p (1 - p) / trials) of an estimated fraction."""
    if trials <= 0:
        return 0.0
    return math.sqrt(max(p * (1.0 - p), 0.0) / trials)


def _histogram(sizes: List[int]) -> Dict[int, int]:
    return dict(sorted(Counter(sizes).items()))


###############################################################################
# Batch streams
###############################################################################
@dataclass(frozen=True)
class BatchSpec:
    """Shape of a synthetic batch stream.

    Batch t draws `n_t + 1` examples from the classifier (`model`, or a
    default ClassifierModel with `K` labels): the first `n_t` give the
    calibration scores of their true labels and the last one the test row.
    When `dist` is set, calibration scores and the `K` candidate scores are
    instead i.i.d. draws from `dist` and the true label is uniform. Either
    way every score of batch t is multiplied by 1 + shift * sin(t), so
    scores are exchangeable within a batch while the scale drifts across
    batches.
    """

    n_t: int = 100
    T: int = 50
    dist: Optional[ScoreDist] = None
    shift: float = 0.0
    K: int = 10
    model: Optional[ClassifierModel] = None

    def __post_init__(self) -> None:
        if self.n_t < 0 or self.T < 0:
            raise DomainError(
                f"Batch sizes must be nonnegative. | n_t={self.n_t} T={self.T}"
            )
        if self.K < 1:
            raise DomainError(f"Need at least one label. | K={self.K}")
        if not 0.0 <= self.shift < 1.0:
            raise DomainError(
                f"shift must lie in [0, 1). | shift={self.shift}"
            )
        if self.dist is None and self.classifier().K != self.K:
            raise DomainError(
                "Model label count differs. |"
                f" K={self.K} model={self.model}"
            )

    def classifier(self) -> ClassifierModel:
        """The classifier that scores this stream's examples."""
        return ClassifierModel(K=self.K) if self.model is None else self.model

    def scale(self, t: int) -> float:
        """Score scale multiplier of batch t."""
        return 1.0 + self.shift * math.sin(t)

    def params(self) -> Dict[str, Any]:
        """Parameters for reports."""
        params: Dict[str, Any] = {
            "n_t": self.n_t,
            "T": self.T,
            "shift": self.shift,
            "K": self.K,
        }
        if self.dist is None:
            params["dist"] = "classifier"
            params.update(self.classifier().params())
        else:
            params["dist"] = dist_label(self.dist)
        return params


@dataclass(frozen=True)
class SyntheticBatch:
    """One batch: calibration scores and a test row with its true label."""

    t: int
    calib: ScoreVector
    row: LabelScoreRow
    label: int

    @property
    def test_score(self) -> float:
        """Score of the true label."""
        return self.row[self.label]


def draw_stream(
    spec: BatchSpec, rng: np.random.Generator
) -> Iterator[SyntheticBatch]:
    """Draws batches t = 1, ..., T from `rng`."""
    for t in range(1, spec.T + 1):
        scale = spec.scale(t)
        if spec.dist is not None:
            calib = gen_exchangeable_scores(spec.dist, spec.n_t, rng, scale)
            row = validate_row(spec.dist.draw(rng, spec.K, scale))
            label = int(rng.integers(spec.K))
        else:
            scores, labels = spec.classifier().draw(spec.n_t + 1, rng)
            scores = scale * scores
            calib = validate_scores(
                scores[np.arange(spec.n_t), labels[: spec.n_t]]
            )
            row = validate_row(scores[spec.n_t])
            label = int(labels[spec.n_t])
        yield SyntheticBatch(t=t, calib=calib, row=row, label=label)


@dataclass
class _BavRun:
    covered: List[bool] = field(default_factory=list)
    sizes: List[int] = field(default_factory=list)
    log_wealth: List[float] = field(default_factory=list)
    state: MartingaleState = field(default_factory=MartingaleState)


def _run_bav_once(
    spec: BatchSpec,
    alpha: float,
    strategy: Strategy,
    rng: np.random.Generator,
) -> _BavRun:
    run = _BavRun()
    for batch in draw_stream(spec, rng):
        outcome, run.state = process_batch(
            run.state,
            batch.calib,
            batch.test_score,
            alpha,
            strategy,
            batch_id=batch.t,
        )
        run.covered.append(outcome.covered)
        run.sizes.append(
            len(label_set_from_threshold(batch.row, outcome.threshold))
        )
        run.log_wealth.append(outcome.log_wealth)
    return run


def _strategy_label(strategy: Strategy) -> Dict[str, Any]:
    label: Dict[str, Any] = {"strategy": strategy.name}
    if isinstance(strategy, Grapa):
        label["gamma"] = strategy.gamma
    return label


def run_bav_experiment(
    spec: BatchSpec,
    alpha: float,
    strategy: Strategy = ALL_IN,
    repetitions: int = 1000,
    seed: int = 0,
) -> CoverageReport:
    """Joint coverage of batch anytime-valid sets over T batches.

    A repetition is covered when every one of its T test points is. The
    report also carries the Ville violation rate (how often the wealth
    ever reached 1 / alpha), per-position coverage and set sizes, and a
    few sample log-wealth paths.
    """
    check_alpha(alpha)
    _check_repetitions(repetitions)

    joint_hits = 0
    violations = 0
    empty_sets = 0
    sizes: List[int] = []
    per_t_hits = np.zeros(spec.T)
    per_t_sizes = np.zeros(spec.T)
    max_log_wealth: List[float] = []
    paths: List[List[float]] = []
    for i in range(repetitions):
        run = _run_bav_once(spec, alpha, strategy, substream(seed, i))
        joint_hits += all(run.covered)
        violations += run.state.crossed(alpha)
        empty_sets += run.sizes.count(0)
        sizes.extend(run.sizes)
        per_t_hits += np.asarray(run.covered, dtype=float)
        per_t_sizes += np.asarray(run.sizes, dtype=float)
        max_log_wealth.append(run.state.max_log_wealth)
        if i < SAMPLE_PATHS:
            paths.append(run.log_wealth)

    coverage = joint_hits / repetitions
    violation_rate = violations / repetitions
    report = CoverageReport(
        method=f"bav-{strategy.name}",
        params={
            "alpha": alpha,
            "repetitions": repetitions,
            "seed": seed,
            **spec.params(),
            **_strategy_label(strategy),
        },
        trials=repetitions,
        empirical_coverage=coverage,
        coverage_se=binomial_se(coverage, repetitions),
        set_size_histogram=_histogram(sizes),
        extras={
            "ville_violation_rate": violation_rate,
            "ville_se": binomial_se(violation_rate, repetitions),
            "mean_max_log_wealth": float(np.mean(max_log_wealth)),
            "per_batch_coverage": (per_t_hits / repetitions).tolist(),
            "per_batch_mean_size": (per_t_sizes / repetitions).tolist(),
            "empty_sets": empty_sets,
            "sample_log_wealth_paths": paths,
        },
    )
    logger.info(
        "Finished BAV experiment.",
        strategy=strategy.name,
        coverage=coverage,
        violation_rate=violation_rate,
    )
    return report


def ville_violation_rate(
    spec: BatchSpec,
    alpha: float,
    strategy: Strategy = ALL_IN,
    repetitions: int = 1000,
    seed: int = 0,
) -> float:
    """Fraction of repetitions whose wealth ever reached 1 / alpha."""
    check_alpha(alpha)
    _check_repetitions(repetitions)
    violations = sum(
        _run_bav_once(spec, alpha, strategy, substream(seed, i)).state.crossed(
            alpha
        )
        for i in range(repetitions)
    )
    return violations / repetitions


def naive_horizon(alpha: float) -> int:
    """Number of batches after which naive per-batch sets must fail jointly.

    Examples:
        >>> naive_horizon(0.15)
        3
        >>> naive_horizon(0.5)
        3
    """
    check_alpha(alpha)
    return math.ceil(math.log(1.0 - alpha) / math.log(1.0 - alpha / 2.0))


def run_naive_sequential(
    alpha: float,
    n_t: int,
    repetitions: int = 1000,
    seed: int = 0,
    dist: Optional[ScoreDist] = None,
) -> CoverageReport:
    """Joint coverage of independent split conformal sets over T batches.

    T is the smallest horizon at which the joint coverage provably drops
    below 1 - alpha. The same batches are also run through the all-in BAV
    procedure so that the two methods can be compared pair by pair.

    Raises:
        PreconditionError: If n_t < 2 / alpha - 1.
    """
    check_alpha(alpha)
    _check_repetitions(repetitions)
    if n_t < 2.0 / alpha - 1.0:
        raise PreconditionError(
            "Naive sequential batches need n_t >= 2 / alpha - 1. |"
            f" n_t={n_t} alpha={alpha}"
        )

    horizon = naive_horizon(alpha)
    spec = BatchSpec(
        n_t=n_t, T=horizon, dist=Exponential() if dist is None else dist
    )
    joint_hits = 0
    paired_hits = 0
    sizes: List[int] = []
    per_t_hits = np.zeros(horizon)
    for i in range(repetitions):
        batches = list(draw_stream(spec, substream(seed, i)))
        covered = []
        for batch in batches:
            threshold = p_conformal_threshold(batch.calib, alpha)
            covered.append(
                admits(threshold, batch.test_score, inclusive=True)
            )
            sizes.append(
                len(
                    label_set_from_threshold(
                        batch.row, threshold, inclusive=True
                    )
                )
            )
        joint_hits += all(covered)
        per_t_hits += np.asarray(covered, dtype=float)

        state = MartingaleState()
        paired = True
        for batch in batches:
            outcome, state = process_batch(
                state, batch.calib, batch.test_score, alpha, ALL_IN
            )
            paired = paired and outcome.covered
        paired_hits += paired

    coverage = joint_hits / repetitions
    report = CoverageReport(
        method="naive-sequential",
        params={
            "alpha": alpha,
            "repetitions": repetitions,
            "seed": seed,
            **spec.params(),
        },
        trials=repetitions,
        empirical_coverage=coverage,
        coverage_se=binomial_se(coverage, repetitions),
        set_size_histogram=_histogram(sizes),
        extras={
            "horizon": horizon,
            "nominal_coverage": 1.0 - alpha,
            "coverage_gap": coverage - (1.0 - alpha),
            "per_batch_coverage": (per_t_hits / repetitions).tolist(),
            "paired_bav_coverage": paired_hits / repetitions,
        },
    )
    logger.info(
        "Finished naive sequential experiment.",
        horizon=horizon,
        coverage=coverage,
    )
    return report


def _check_repetitions(repetitions: int) -> None:
    if repetitions < 1:
        raise DomainError(
            f"Need at least one repetition. | repetitions={repetitions}"
        )


###############################################################################
# Post-hoc experiment
###############################################################################
def run_posthoc_experiment(
    n: int,
    K: int,
    C: int,
    grid: Optional[AlphaGrid] = None,
    repetitions: int = 1000,
    seed: int = 0,
    model: Optional[ClassifierModel] = None,
) -> CoverageReport:
    """Coverage of fixed-size sets whose level alpha~ is chosen per trial.

    alpha~ depends on the calibration scores and the test point's label
    scores, never on its true label. Trials with no feasible grid level are
    counted separately and excluded from coverage and the ratio estimate.
    """
    _check_repetitions(repetitions)
    if n < 1:
        raise DomainError(f"Need calibration data. | n={n}")
    grid = AlphaGrid.default() if grid is None else grid
    model = ClassifierModel(K=K) if model is None else model
    if model.K != K:
        raise DomainError(f"Model label count differs. | K={K} model={model}")

    trials: List[Tuple[bool, float]] = []
    sizes: List[int] = []
    infeasible = 0
    for i in range(repetitions):
        rng = substream(seed, i)
        scores, labels = model.draw(n + 1, rng)

        calib = validate_scores(scores[np.arange(n), labels[:n]])
        row = validate_row(scores[n])
        try:
            selection, label_set = fixed_size_set(calib, row, C, grid)
        except SelectionInfeasibleError:
            infeasible += 1
            continue

        trials.append((int(labels[n]) in label_set, selection.alpha_tilde))
        sizes.append(len(label_set))

    feasible = len(trials)
    extras: Dict[str, Any] = {
        "infeasible": infeasible,
        "target_size": C,
    }
    coverage: Optional[float] = None
    coverage_se: Optional[float] = None
    if trials:
        coverage = sum(covered for covered, _ in trials) / feasible
        coverage_se = binomial_se(coverage, feasible)
        alpha_tildes = [alpha for _, alpha in trials]
        ratio = posthoc_ratio_estimate(trials)
        extras.update(
            {
                "ratio_estimate": ratio.value,
                "ratio_se": ratio.se,
                "mean_alpha_tilde": float(np.mean(alpha_tildes)),
                "taylor_coverage": taylor_coverage(alpha_tildes),
                "alpha_tilde_histogram": {
                    repr(alpha): count
                    for alpha, count in sorted(Counter(alpha_tildes).items())
                },
            }
        )
    else:
        logger.warning(
            "No trial reached the target size on the grid.",
            target_size=C,
            infeasible=infeasible,
        )

    report = CoverageReport(
        method="posthoc",
        params={
            "n": n,
            "K": K,
            "C": C,
            "grid": list(grid.candidates),
            "repetitions": repetitions,
            "seed": seed,
            **model.params(),
        },
        trials=feasible,
        empirical_coverage=coverage,
        coverage_se=coverage_se,
        set_size_histogram=_histogram(sizes),
        extras=extras,
    )
    logger.info(
        "Finished post-hoc experiment.",
        coverage=coverage,
        trials=feasible,
        infeasible=infeasible,
    )
    return report


###############################################################################
# Monte Carlo conformal prediction experiment
###############################################################################
@dataclass
class _SplitStats:
    coverage: List[float] = field(default_factory=list)
    sizes: List[int] = field(default_factory=list)
    mean_sizes: List[float] = field(default_factory=list)

    def add(self, label_sets: np.ndarray, test_latent: FloatArray) -> None:
        """Records one split's membership matrix (test points x labels)."""
        self.coverage.append(
            float((label_sets * test_latent).sum(axis=1).mean())
        )
        split_sizes = label_sets.sum(axis=1)
        self.sizes.extend(int(s) for s in split_sizes)
        self.mean_sizes.append(float(split_sizes.mean()))


def _p_membership(
    matrix: ExpertScoreMatrix, test_scores: FloatArray, alpha: float
) -> np.ndarray:
    threshold = mc_p_threshold(matrix, alpha)
    if threshold is Bound.UNBOUNDED:
        return np.ones(test_scores.shape, dtype=bool)
    if threshold is Bound.EMPTY:
        return np.zeros(test_scores.shape, dtype=bool)
    return test_scores <= threshold


def _e_membership(
    matrix: ExpertScoreMatrix, test_scores: FloatArray, alpha: float
) -> np.ndarray:
    return mc_e_value_grid(matrix, test_scores) < 1.0 / alpha


def _split_report(
    method: str,
    params: Dict[str, Any],
    stats: _SplitStats,
    single: _SplitStats,
    guarantee: float,
    alpha: float,
) -> CoverageReport:
    splits = len(stats.coverage)
    coverage = float(np.mean(stats.coverage))
    std = float(np.std(stats.coverage, ddof=1)) if splits > 1 else 0.0
    single_std = (
        float(np.std(single.coverage, ddof=1)) if splits > 1 else 0.0
    )
    return CoverageReport(
        method=method,
        params=params,
        trials=splits,
        empirical_coverage=coverage,
        coverage_se=std / math.sqrt(splits),
        set_size_histogram=_histogram(stats.sizes),
        extras={
            "coverage_std": std,
            "mean_set_size": float(np.mean(stats.mean_sizes)),
            "guaranteed_coverage": guarantee,
            "nominal_gap": coverage - (1.0 - alpha),
            "single_expert_coverage": float(np.mean(single.coverage)),
            "single_expert_coverage_std": single_std,
            "single_expert_mean_set_size": float(np.mean(single.mean_sizes)),
        },
    )


def run_mccp_experiment(
    n: int,
    m: int,
    K: int,
    alpha: float,
    repetitions: int = 200,
    seed: int = 0,
    n_test: int = 100,
    p_alpha: Optional[float] = None,
    model: Optional[ClassifierModel] = None,
) -> Tuple[CoverageReport, CoverageReport]:
    """Coverage of the Monte Carlo p-variant and e-variant over random splits.

    Every example has an ambiguous latent label distribution. Each
    calibration example carries `m` expert labels drawn from it, and a test
    point's coverage is the latent probability mass of its set. Both
    variants are also evaluated with only the first expert on the same
    splits. The p-variant runs at level `p_alpha` (default `alpha`).

    Returns:
        The (p-variant, e-variant) reports.
    """
    check_alpha(alpha)
    p_alpha = alpha if p_alpha is None else check_alpha(p_alpha)
    _check_repetitions(repetitions)
    if n < 1 or m < 1 or n_test < 1:
        raise DomainError(
            f"Sizes must be positive. | n={n} m={m} n_test={n_test}"
        )
    model = ClassifierModel(K=K) if model is None else model
    if model.K != K:
        raise DomainError(f"Model label count differs. | K={K} model={model}")

    p_stats, p_single = _SplitStats(), _SplitStats()
    e_stats, e_single = _SplitStats(), _SplitStats()
    for i in range(repetitions):
        rng = substream(seed, i)
        latent = model.ambiguous_latent(n + n_test, rng)
        scores = model.score_rows(latent, rng)

        experts = sample_labels(
            np.repeat(latent[:n, None, :], m, axis=1), rng
        )
        matrix = ExpertScoreMatrix.from_rows(
            np.take_along_axis(scores[:n], experts, axis=1)
        )
        single = matrix.first_experts(1)
        test_scores, test_latent = scores[n:], latent[n:]

        p_stats.add(_p_membership(matrix, test_scores, p_alpha), test_latent)
        p_single.add(_p_membership(single, test_scores, p_alpha), test_latent)
        e_stats.add(_e_membership(matrix, test_scores, alpha), test_latent)
        e_single.add(_e_membership(single, test_scores, alpha), test_latent)

    params: Dict[str, Any] = {
        "n": n,
        "m": m,
        "K": K,
        "alpha": alpha,
        "p_alpha": p_alpha,
        "n_test": n_test,
        "splits": repetitions,
        "seed": seed,
        **model.params(),
    }
    p_report = _split_report(
        "mccp-p", params, p_stats, p_single, 1.0 - 2.0 * p_alpha, p_alpha
    )
    e_report = _split_report(
        "mccp-e", params, e_stats, e_single, 1.0 - alpha, alpha
    )
    logger.info(
        "Finished Monte Carlo conformal experiment.",
        p_coverage=p_report.empirical_coverage,
        e_coverage=e_report.empirical_coverage,
        m=m,
    )
    return p_report, e_report
