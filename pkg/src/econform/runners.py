"""Contains this project's clack runners."""

from __future__ import annotations

import sys
from typing import (
    Any,
    Callable,
    Dict,
    Final,
    List,
    Optional,
    Sequence,
    Tuple,
)

from clack.types import ClackRunner
from eris import Err
from logrus import Logger
import metaman

from .bav import run_stream, strategy_from_name
from .common import threshold_token
from .config import (
    BaselineConfig,
    BavConfig,
    Config,
    MccpConfig,
    PosthocConfig,
    SimulateConfig,
    check_ranges,
)
from .errors import EconformError, SelectionInfeasibleError
from .ingest import (
    read_batch_stream,
    read_expert_matrix,
    read_label_row,
    read_scores,
)
from .mccp import mc_e_set, mc_e_threshold, mc_p_set, mc_p_threshold
from .pcp import p_conformal_set, p_conformal_threshold
from .posthoc import AlphaGrid, fixed_size_set, profile_rows
from .report import (
    Artifact,
    dump_csv,
    dump_json,
    flat_report_csv,
    render,
    write_artifacts,
)
from .sim import (
    BatchSpec,
    ClassifierModel,
    CoverageReport,
    ScoreDist,
    parse_dist,
    run_bav_experiment,
    run_mccp_experiment,
    run_naive_sequential,
    run_posthoc_experiment,
    ville_violation_rate,
)


RUNNERS: List[ClackRunner] = []
runner = metaman.register_function_factory(RUNNERS)

Experiment = Callable[[SimulateConfig], Dict[str, Any]]
EXPERIMENTS: List[Experiment] = []
experiment = metaman.register_function_factory(EXPERIMENTS)

logger = Logger(__name__)

# exit status for bad input, bad options and domain errors
EXIT_INPUT: Final = 2

# exit status when no alpha on the grid yields a small enough set
EXIT_INFEASIBLE: Final = 3


def _fail(log: Any, message: str, code: int = EXIT_INPUT) -> int:
    """Reports a failure on stderr and in the logs."""
    log.error("Command failed.", error=message, exit_status=code)
    print(f"econform: error: {message}", file=sys.stderr)
    return code


def _finish(
    log: Any,
    cfg: Config,
    primary: str,
    artifacts: Sequence[Artifact],
    code: int = 0,
) -> int:
    """Prints the primary report, or writes every artifact under --out."""
    if cfg.out is None:
        sys.stdout.write(primary)
        return code

    written_r = write_artifacts(cfg.out, artifacts)
    if isinstance(written_r, Err):
        return _fail(log, str(written_r.err()))
    log.info("Wrote artifacts.", out=str(cfg.out), files=len(artifacts))
    return code


@runner
def run_baseline(cfg: BaselineConfig) -> int:
    """Runner for the 'baseline' subcommand."""
    log = logger.bind_fargs(locals())

    ranges_r = check_ranges(cfg)
    if isinstance(ranges_r, Err):
        return _fail(log, str(ranges_r.err()))

    calib_r = read_scores(cfg.calib)
    if isinstance(calib_r, Err):
        return _fail(log, str(calib_r.err()))
    row_r = read_label_row(cfg.row)
    if isinstance(row_r, Err):
        return _fail(log, str(row_r.err()))
    calib, labelled = calib_r.ok(), row_r.ok()

    try:
        threshold = p_conformal_threshold(calib, cfg.alpha)
        label_set = p_conformal_set(labelled.row, calib, cfg.alpha)
    except EconformError as e:
        return _fail(log, str(e))

    summary = {
        "method": "baseline",
        "alpha": cfg.alpha,
        "n": len(calib),
        "threshold": threshold_token(threshold),
        "set": labelled.select(label_set),
    }
    records = [
        {"label": label, "score": score, "in_set": i in label_set}
        for i, (label, score) in enumerate(
            zip(labelled.labels, labelled.row.per_label.tolist())
        )
    ]
    columns = ["label", "score", "in_set"]
    log.info("Built baseline set.", size=len(label_set))
    return _finish(
        log,
        cfg,
        render(cfg.format, summary, records, columns),
        [
            Artifact("baseline.json", dump_json(summary)),
            Artifact("baseline.csv", dump_csv(records, columns)),
        ],
    )


@runner
def run_bav(cfg: BavConfig) -> int:
    """Runner for the 'bav' subcommand."""
    log = logger.bind_fargs(locals())

    ranges_r = check_ranges(cfg)
    if isinstance(ranges_r, Err):
        return _fail(log, str(ranges_r.err()))

    stream_r = read_batch_stream(cfg.stream)
    if isinstance(stream_r, Err):
        return _fail(log, str(stream_r.err()))

    try:
        strategy = strategy_from_name(cfg.strategy, cfg.gamma)
        result = run_stream(stream_r.ok(), cfg.alpha, strategy)
    except EconformError as e:
        return _fail(log, str(e))

    records = [
        {
            "t": t,
            "log_wealth": outcome.log_wealth,
            "threshold": threshold_token(outcome.threshold),
            "covered": outcome.covered,
        }
        for t, outcome in enumerate(result.outcomes, start=1)
    ]
    columns = ["t", "log_wealth", "threshold", "covered"]
    state = result.state
    summary = {
        "method": f"bav-{strategy.name}",
        "alpha": cfg.alpha,
        "strategy": strategy.name,
        "gamma": cfg.gamma if cfg.strategy == "grapa" else None,
        "batches": state.t,
        "covered": sum(outcome.covered for outcome in result.outcomes),
        "all_covered": result.all_covered,
        "final_log_wealth": state.log_wealth,
        "max_log_wealth": state.max_log_wealth,
        "ville_crossed": state.crossed(cfg.alpha),
        "bankrupt": state.bankrupt,
    }
    log.info(
        "Processed batch stream.",
        batches=state.t,
        all_covered=result.all_covered,
    )
    return _finish(
        log,
        cfg,
        render(cfg.format, summary, records, columns),
        [
            Artifact("path.csv", dump_csv(records, columns)),
            Artifact("summary.json", dump_json(summary)),
        ],
    )


@runner
def run_posthoc(cfg: PosthocConfig) -> int:
    """Runner for the 'posthoc' subcommand."""
    log = logger.bind_fargs(locals())

    ranges_r = check_ranges(cfg)
    if isinstance(ranges_r, Err):
        return _fail(log, str(ranges_r.err()))

    grid_r = AlphaGrid.from_spec(cfg.grid)
    if isinstance(grid_r, Err):
        return _fail(log, str(grid_r.err()))
    calib_r = read_scores(cfg.calib)
    if isinstance(calib_r, Err):
        return _fail(log, str(calib_r.err()))
    row_r = read_label_row(cfg.row)
    if isinstance(row_r, Err):
        return _fail(log, str(row_r.err()))
    calib, labelled = calib_r.ok(), row_r.ok()

    columns = ["alpha", "set_size"]
    try:
        selection, label_set = fixed_size_set(
            calib, labelled.row, cfg.target_size, grid_r.ok()
        )
    except SelectionInfeasibleError as e:
        profile_csv = dump_csv(profile_rows(e.profile), columns)
        _finish(
            log, cfg, profile_csv, [Artifact("profile.csv", profile_csv)]
        )
        return _fail(log, str(e), EXIT_INFEASIBLE)
    except EconformError as e:
        return _fail(log, str(e))

    summary = {
        "alpha_tilde": selection.alpha_tilde,
        "target_size": selection.target_size,
        "achieved_size": selection.achieved_size,
        "set": labelled.select(label_set),
    }
    records = profile_rows(selection.profile)
    log.info(
        "Selected fixed-size set.",
        alpha_tilde=selection.alpha_tilde,
        size=selection.achieved_size,
    )
    return _finish(
        log,
        cfg,
        render(cfg.format, summary, records, columns),
        [
            Artifact("profile.csv", dump_csv(records, columns)),
            Artifact("selection.json", dump_json(summary)),
        ],
    )


@runner
def run_mccp(cfg: MccpConfig) -> int:
    """Runner for the 'mccp' subcommand."""
    log = logger.bind_fargs(locals())

    ranges_r = check_ranges(cfg)
    if isinstance(ranges_r, Err):
        return _fail(log, str(ranges_r.err()))

    matrix_r = read_expert_matrix(cfg.matrix)
    if isinstance(matrix_r, Err):
        return _fail(log, str(matrix_r.err()))
    row_r = read_label_row(cfg.row)
    if isinstance(row_r, Err):
        return _fail(log, str(row_r.err()))
    matrix, labelled = matrix_r.ok(), row_r.ok()
    p_alpha = cfg.alpha if cfg.p_alpha is None else cfg.p_alpha

    try:
        if cfg.m is not None:
            matrix = matrix.first_experts(cfg.m)
        p_threshold = mc_p_threshold(matrix, p_alpha)
        p_set = mc_p_set(matrix, labelled.row, p_alpha)
        e_threshold = mc_e_threshold(matrix, cfg.alpha)
        e_set = mc_e_set(matrix, labelled.row, cfg.alpha)
    except EconformError as e:
        return _fail(log, str(e))

    summary = {
        "method": "mccp",
        "alpha": cfg.alpha,
        "p_alpha": p_alpha,
        "n": matrix.n,
        "m": matrix.m,
        "p_variant": {
            "threshold": threshold_token(p_threshold),
            "set": labelled.select(p_set),
        },
        "e_variant": {
            "threshold": threshold_token(e_threshold),
            "set": labelled.select(e_set),
        },
    }
    records = [
        {
            "label": label,
            "score": score,
            "in_p_set": i in p_set,
            "in_e_set": i in e_set,
        }
        for i, (label, score) in enumerate(
            zip(labelled.labels, labelled.row.per_label.tolist())
        )
    ]
    columns = ["label", "score", "in_p_set", "in_e_set"]
    log.info(
        "Built Monte Carlo sets.", p_size=len(p_set), e_size=len(e_set)
    )
    return _finish(
        log,
        cfg,
        render(cfg.format, summary, records, columns),
        [Artifact("mccp.json", dump_json(summary))],
    )


###############################################################################
# simulate experiments
###############################################################################
def _model(cfg: SimulateConfig) -> ClassifierModel:
    return ClassifierModel(
        K=cfg.K,
        concentration=cfg.concentration,
        noise=cfg.noise,
        exponent=cfg.exponent,
    )


def _dist(cfg: SimulateConfig) -> Optional[ScoreDist]:
    if cfg.dist is None:
        return None
    dist = parse_dist(cfg.dist)
    if isinstance(dist, Err):
        raise EconformError(str(dist.err()))
    return dist.ok()


def _batch_spec(cfg: SimulateConfig) -> BatchSpec:
    dist = _dist(cfg)
    return BatchSpec(
        n_t=cfg.n,
        T=cfg.T,
        dist=dist,
        shift=cfg.shift,
        K=cfg.K,
        model=_model(cfg) if dist is None else None,
    )


def _grid(cfg: SimulateConfig) -> AlphaGrid:
    grid = AlphaGrid.from_spec(cfg.grid)
    if isinstance(grid, Err):
        raise EconformError(str(grid.err()))
    return grid.ok()


def _reports(*reports: CoverageReport) -> Tuple[Dict[str, Any], ...]:
    return tuple(report.to_dict() for report in reports)


@experiment
def bav(cfg: SimulateConfig) -> Dict[str, Any]:
    """Joint coverage of batch anytime-valid sets."""
    strategy = strategy_from_name(cfg.strategy, cfg.gamma)
    (report,) = _reports(
        run_bav_experiment(
            _batch_spec(cfg), cfg.alpha, strategy, cfg.reps, cfg.seed
        )
    )
    return report


@experiment
def naive_sequential(cfg: SimulateConfig) -> Dict[str, Any]:
    """Joint coverage of per-batch split conformal sets."""
    (report,) = _reports(
        run_naive_sequential(cfg.alpha, cfg.n, cfg.reps, cfg.seed, _dist(cfg))
    )
    return report


@experiment
def posthoc(cfg: SimulateConfig) -> Dict[str, Any]:
    """Coverage of fixed-size sets with a data-dependent level."""
    (report,) = _reports(
        run_posthoc_experiment(
            cfg.n,
            cfg.K,
            cfg.target_size,
            _grid(cfg),
            cfg.reps,
            cfg.seed,
            _model(cfg),
        )
    )
    return report


@experiment
def mccp(cfg: SimulateConfig) -> Dict[str, Any]:
    """Coverage of the Monte Carlo p-variant and e-variant."""
    p_report, e_report = _reports(
        *run_mccp_experiment(
            cfg.n,
            cfg.m,
            cfg.K,
            cfg.alpha,
            cfg.reps,
            cfg.seed,
            cfg.n_test,
            cfg.p_alpha,
            _model(cfg),
        )
    )
    return {"method": "mccp", "p_variant": p_report, "e_variant": e_report}


@experiment
def ville(cfg: SimulateConfig) -> Dict[str, Any]:
    """How often the test martingale ever reaches 1 / alpha."""
    spec = _batch_spec(cfg)
    strategy = strategy_from_name(cfg.strategy, cfg.gamma)
    rate = ville_violation_rate(spec, cfg.alpha, strategy, cfg.reps, cfg.seed)
    return {
        "method": f"ville-{strategy.name}",
        "params": {
            "alpha": cfg.alpha,
            "repetitions": cfg.reps,
            "seed": cfg.seed,
            **spec.params(),
        },
        "trials": cfg.reps,
        "violation_rate": rate,
        "bound": cfg.alpha,
    }


@runner
def run_simulate(cfg: SimulateConfig) -> int:
    """Runner for the 'simulate' subcommand."""
    log = logger.bind_fargs(locals())

    ranges_r = check_ranges(cfg)
    if isinstance(ranges_r, Err):
        return _fail(log, str(ranges_r.err()))

    name = cfg.experiment.replace("-", "_")
    func = {func.__name__: func for func in EXPERIMENTS}[name]
    try:
        data = func(cfg)
    except EconformError as e:
        return _fail(log, str(e))

    if "p_variant" in data:
        flat_csv = flat_report_csv([data["p_variant"], data["e_variant"]])
    else:
        flat_csv = flat_report_csv([data])
    json_text = dump_json(data)

    log.info("Finished simulation.", experiment=cfg.experiment)
    code = _finish(
        log,
        cfg,
        flat_csv if cfg.format == "csv" else json_text,
        [
            Artifact(f"{cfg.experiment}.json", json_text),
            Artifact(f"{cfg.experiment}.csv", flat_csv),
        ],
    )
    if code == 0 and cfg.experiment == "posthoc" and data["trials"] == 0:
        return _fail(
            log,
            "No trial reached the target size on the grid. |"
            f" experiment={cfg.experiment} target_size={cfg.target_size}",
            EXIT_INFEASIBLE,
        )
    return code
