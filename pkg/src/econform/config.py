"""Contains this project's clack.Config classes."""

from __future__ import annotations

from pathlib import Path
from typing import Any, Callable, List, Literal, Optional, Sequence

import clack
from eris import ErisResult, Err, Ok
from typist import literal_to_list

from .common import (
    DEFAULT_CONCENTRATION,
    DEFAULT_GAMMA,
    DEFAULT_MODEL_EXPONENT,
    DEFAULT_NOISE,
)
from .types import ExperimentName, Format, StrategyName


Command = Literal["baseline", "bav", "posthoc", "mccp", "simulate"]

DEFAULT_GRID = "0.01:0.30:0.01"


class Config(clack.Config):
    """Shared clack configuration class."""

    command: Command

    # ----- CONFIG
    format: Format = "json"
    out: Optional[Path] = None


class BaselineConfig(Config):
    """Config for the 'baseline' subcommand."""

    command: Literal["baseline"]

    # ----- ARGUMENTS
    alpha: float
    calib: Path
    row: Path


class BavConfig(Config):
    """Config for the 'bav' subcommand."""

    command: Literal["bav"]

    # ----- ARGUMENTS
    alpha: float
    stream: Path

    # ----- CONFIG
    strategy: StrategyName = "all-in"
    gamma: float = DEFAULT_GAMMA


class PosthocConfig(Config):
    """Config for the 'posthoc' subcommand."""

    command: Literal["posthoc"]

    # ----- ARGUMENTS
    calib: Path
    row: Path
    target_size: int

    # ----- CONFIG
    grid: str = DEFAULT_GRID


class MccpConfig(Config):
    """Config for the 'mccp' subcommand."""

    command: Literal["mccp"]

    # ----- ARGUMENTS
    alpha: float
    matrix: Path
    row: Path

    # ----- CONFIG
    m: Optional[int] = None
    p_alpha: Optional[float] = None


class SimulateConfig(Config):
    """Config for the 'simulate' subcommand."""

    command: Literal["simulate"]

    # ----- ARGUMENTS
    experiment: ExperimentName
    seed: int

    # ----- CONFIG
    alpha: float = 0.15
    reps: int = 1000
    strategy: StrategyName = "all-in"
    gamma: float = DEFAULT_GAMMA
    dist: Optional[str] = None
    concentration: float = DEFAULT_CONCENTRATION
    noise: float = DEFAULT_NOISE
    exponent: float = DEFAULT_MODEL_EXPONENT
    n: int = 100
    T: int = 50
    K: int = 10
    shift: float = 0.0
    target_size: int = 3
    grid: str = DEFAULT_GRID
    m: int = 20
    n_test: int = 100
    p_alpha: Optional[float] = None


def check_ranges(cfg: Config) -> ErisResult[None]:
    """Checks that every numeric option lies within its documented range."""
    problems: List[str] = []

    def check(name: str, ok: Callable[[Any], bool]) -> None:
        value = getattr(cfg, name, None)
        if value is not None and not ok(value):
            problems.append(f"{name}={value!r}")

    check("alpha", lambda x: 0.0 < x < 1.0)
    check("p_alpha", lambda x: 0.0 < x < 1.0)
    check("gamma", lambda x: 0.0 < x <= 1.0)
    check("reps", lambda x: x >= 1)
    check("target_size", lambda x: x >= 1)
    check("m", lambda x: x >= 1)
    check("n", lambda x: x >= 1)
    check("T", lambda x: x >= 0)
    check("K", lambda x: x >= 1)
    check("n_test", lambda x: x >= 1)
    check("shift", lambda x: 0.0 <= x < 1.0)
    check("concentration", lambda x: x > 0.0)
    check("noise", lambda x: x >= 0.0)
    check("exponent", lambda x: 0.0 < x < float("inf"))

    if problems:
        return Err(
            "Option values out of range. | " + " ".join(sorted(problems))
        )
    return Ok(None)


def clack_parser(argv: Sequence[str]) -> dict[str, Any]:
    """Parser we pass to the `main_factory()` `parser` kwarg."""
    parser = clack.Parser(
        description=(
            "Conformal e-prediction: batch anytime-valid sets, fixed-size"
            " sets with data-dependent coverage and Monte Carlo conformal"
            " prediction, next to the split conformal baseline."
        )
    )

    new_command = clack.new_command_factory(parser)

    def add_common(cmd_parser: Any) -> None:
        cmd_parser.add_argument(
            "--format",
            choices=literal_to_list(Format),
            help="Format of the report printed on stdout (default: json).",
        )
        cmd_parser.add_argument(
            "--out",
            type=Path,
            help="Directory that every output artifact is written into.",
        )

    def add_alpha(cmd_parser: Any, *, required: bool = True) -> None:
        cmd_parser.add_argument(
            "--alpha",
            type=float,
            required=required,
            help="Miscoverage level in (0, 1).",
        )

    # ----- 'baseline' command
    baseline_parser = new_command(
        "baseline", help="Split conformal (p-value) prediction set."
    )
    add_alpha(baseline_parser)
    baseline_parser.add_argument(
        "--calib",
        type=Path,
        required=True,
        help="Calibration CSV with a 'score' column.",
    )
    baseline_parser.add_argument(
        "--row",
        type=Path,
        required=True,
        help="Candidate CSV with 'label,score' columns.",
    )
    add_common(baseline_parser)

    # ----- 'bav' command
    bav_parser = new_command(
        "bav", help="Batch anytime-valid conformal sets over a batch stream."
    )
    add_alpha(bav_parser)
    bav_parser.add_argument(
        "--stream",
        type=Path,
        required=True,
        help="Batch stream CSV with 'batch_id,role,score' columns.",
    )
    bav_parser.add_argument(
        "--strategy",
        choices=literal_to_list(StrategyName),
        help="Betting strategy of the test martingale (default: all-in).",
    )
    bav_parser.add_argument(
        "--gamma",
        type=float,
        help="Cap on the GRAPA betting fraction, in (0, 1] (default: 0.5).",
    )
    add_common(bav_parser)

    # ----- 'posthoc' command
    posthoc_parser = new_command(
        "posthoc", help="Fixed-size set with a data-dependent alpha."
    )
    posthoc_parser.add_argument(
        "--calib",
        type=Path,
        required=True,
        help="Calibration CSV with a 'score' column.",
    )
    posthoc_parser.add_argument(
        "--row",
        type=Path,
        required=True,
        help="Candidate CSV with 'label,score' columns.",
    )
    posthoc_parser.add_argument(
        "--C",
        dest="target_size",
        type=int,
        required=True,
        help="Largest acceptable set size.",
    )
    posthoc_parser.add_argument(
        "--grid",
        help=f"Candidate levels as start:stop:step (default: {DEFAULT_GRID}).",
    )
    add_common(posthoc_parser)

    # ----- 'mccp' command
    mccp_parser = new_command(
        "mccp", help="Monte Carlo conformal sets from expert label samples."
    )
    add_alpha(mccp_parser)
    mccp_parser.add_argument(
        "--matrix",
        type=Path,
        required=True,
        help="Expert score CSV with 'expert_1,...,expert_m' columns.",
    )
    mccp_parser.add_argument(
        "--row",
        type=Path,
        required=True,
        help="Candidate CSV with 'label,score' columns.",
    )
    mccp_parser.add_argument(
        "--m",
        type=int,
        help="Only use the first M experts (default: all of them).",
    )
    mccp_parser.add_argument(
        "--p-alpha",
        type=float,
        help="Level of the p-variant (default: --alpha).",
    )
    add_common(mccp_parser)

    # ----- 'simulate' command
    sim_parser = new_command(
        "simulate", help="Run a synthetic coverage experiment."
    )
    sim_parser.add_argument(
        "experiment",
        choices=literal_to_list(ExperimentName),
        help="The experiment to run.",
    )
    sim_parser.add_argument(
        "--seed",
        type=int,
        required=True,
        help="Master seed. Identical seeds yield identical reports.",
    )
    add_alpha(sim_parser, required=False)
    sim_parser.add_argument(
        "--reps", type=int, help="Repetitions (or splits) to run."
    )
    sim_parser.add_argument(
        "--strategy",
        choices=literal_to_list(StrategyName),
        help="Betting strategy used by the 'bav' and 'ville' experiments.",
    )
    sim_parser.add_argument(
        "--gamma", type=float, help="Cap on the GRAPA betting fraction."
    )
    sim_parser.add_argument(
        "--dist",
        help=(
            "Score distribution of the batch experiments, e.g."
            " exponential:1, lognormal:0:1, pareto:3:1 or constant:1"
            " (default: the synthetic classifier; naive-sequential"
            " defaults to exponential:1)."
        ),
    )
    sim_parser.add_argument(
        "--concentration",
        type=float,
        help="Dirichlet concentration of the classifier's label"
        f" distributions (default: {DEFAULT_CONCENTRATION}).",
    )
    sim_parser.add_argument(
        "--noise",
        type=float,
        help="Log-normal noise on the classifier's probabilities"
        f" (default: {DEFAULT_NOISE}).",
    )
    sim_parser.add_argument(
        "--exponent",
        type=float,
        help="Classifier scores are 1 / prob**EXPONENT"
        f" (default: {DEFAULT_MODEL_EXPONENT}).",
    )
    sim_parser.add_argument(
        "--n",
        type=int,
        help="Calibration size (per batch for the batch experiments).",
    )
    sim_parser.add_argument("--T", type=int, help="Number of batches.")
    sim_parser.add_argument("--K", type=int, help="Number of labels.")
    sim_parser.add_argument(
        "--shift",
        type=float,
        help="Amplitude of the 1 + shift * sin(t) batch scale, in [0, 1).",
    )
    sim_parser.add_argument(
        "--C",
        dest="target_size",
        type=int,
        help="Largest acceptable set size (posthoc experiment).",
    )
    sim_parser.add_argument(
        "--grid", help="Candidate levels as start:stop:step."
    )
    sim_parser.add_argument("--m", type=int, help="Number of experts.")
    sim_parser.add_argument(
        "--n-test", type=int, help="Test points per split (mccp experiment)."
    )
    sim_parser.add_argument(
        "--p-alpha", type=float, help="Level of the Monte Carlo p-variant."
    )
    add_common(sim_parser)

    args = parser.parse_args(argv[1:])
    kwargs = clack.filter_cli_args(args)

    return kwargs
