"""Tests for econform's subcommands."""

from __future__ import annotations

import json
from pathlib import Path

from _pytest.capture import CaptureFixture
from pytest import approx, mark

from . import common as c


params = mark.parametrize


def _stream_file(path: Path, text: str) -> Path:
    path.write_text(text)
    return path


STREAM = """batch_id,role,score
a,calib,1
a,calib,2
a,test,2
a,calib,3
a,calib,4
b,calib,1
b,calib,2
b,calib,3
b,calib,4
b,test,3
"""


def test_baseline(
    capsys: CaptureFixture, main: c.MainType, calib_file: Path, row_file: Path
) -> None:
    """Tests the 'baseline' subcommand's JSON report."""
    args = ["--alpha", "0.5", "--calib", str(calib_file), "--row"]
    assert main("baseline", *args, str(row_file)) == 0

    report = json.loads(capsys.readouterr().out)
    assert report["threshold"] == 3.0
    assert report["set"] == ["cat", "dog"]
    assert report["n"] == 4


def test_baseline_unbounded_token(
    capsys: CaptureFixture, main: c.MainType, calib_file: Path, row_file: Path
) -> None:
    """Tests that an infinite threshold is written as "inf"."""
    args = ["--alpha", "0.1", "--calib", str(calib_file), "--row"]
    assert main("baseline", *args, str(row_file)) == 0

    report = json.loads(capsys.readouterr().out)
    assert report["threshold"] == "inf"
    assert report["set"] == ["cat", "dog", "fox", "owl"]


def test_baseline_csv(
    capsys: CaptureFixture, main: c.MainType, calib_file: Path, row_file: Path
) -> None:
    """Tests the 'baseline' subcommand's CSV report."""
    args = ["--alpha", "0.5", "--calib", str(calib_file), "--row"]
    assert main("baseline", *args, str(row_file), "--format", "csv") == 0

    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "label,score,in_set"
    assert lines[1:] == [
        "cat,0.5,true",
        "dog,2.5,true",
        "fox,3.5,false",
        "owl,9.0,false",
    ]


def test_baseline_out_dir(
    main: c.MainType, calib_file: Path, row_file: Path, tmp_path: Path
) -> None:
    """Tests that --out writes every artifact."""
    out = tmp_path / "out"
    args = ["--alpha", "0.5", "--calib", str(calib_file), "--row"]
    assert main("baseline", *args, str(row_file), "--out", str(out)) == 0

    assert sorted(p.name for p in out.iterdir()) == [
        "baseline.csv",
        "baseline.json",
    ]
    text = (out / "baseline.json").read_text()
    assert text.endswith("\n")
    assert json.loads(text)["set"] == ["cat", "dog"]


@params("scores", [[1.0, 0.0, 2.0], [1.0, -3.0]])
def test_baseline_rejects_bad_scores(
    capsys: CaptureFixture,
    main: c.MainType,
    row_file: Path,
    tmp_path: Path,
    scores: list[float],
) -> None:
    """Tests that a nonpositive calibration score exits with status 2."""
    calib_file = c.write_scores(tmp_path / "bad.csv", scores)
    args = ["--alpha", "0.5", "--calib", str(calib_file), "--row"]
    assert main("baseline", *args, str(row_file)) == 2
    assert "bad.csv" in capsys.readouterr().err


def test_missing_input_file(
    main: c.MainType, row_file: Path, tmp_path: Path
) -> None:
    """Tests that an unreadable input exits with status 2."""
    missing = tmp_path / "nope.csv"
    args = ["--alpha", "0.5", "--calib", str(missing), "--row"]
    assert main("baseline", *args, str(row_file)) == 2


@params("alpha", ["0", "1.5", "-0.1"])
def test_alpha_out_of_range(
    main: c.MainType, calib_file: Path, row_file: Path, alpha: str
) -> None:
    """Tests the range check on --alpha."""
    args = ["--alpha", alpha, "--calib", str(calib_file), "--row"]
    assert main("baseline", *args, str(row_file)) == 2


@params("strategy", ["all-in", "grapa"])
def test_bav(
    capsys: CaptureFixture, main: c.MainType, tmp_path: Path, strategy: str
) -> None:
    """Tests the 'bav' subcommand on a two-batch stream."""
    stream = _stream_file(tmp_path / "stream.csv", STREAM)
    args = ["--alpha", "0.5", "--stream", str(stream)]
    assert main("bav", *args, "--strategy", strategy) == 0

    summary = json.loads(capsys.readouterr().out)
    assert summary["batches"] == 2
    assert summary["covered"] == 2
    assert summary["all_covered"] is True
    assert summary["strategy"] == strategy


def test_bav_path_csv(main: c.MainType, tmp_path: Path) -> None:
    """Tests the per-batch path written by 'bav'."""
    stream = _stream_file(tmp_path / "stream.csv", STREAM)
    out = tmp_path / "out"
    args = ["--alpha", "0.5", "--stream", str(stream), "--out", str(out)]
    assert main("bav", *args) == 0

    lines = (out / "path.csv").read_text().splitlines()
    assert lines[0] == "t,log_wealth,threshold,covered"
    assert len(lines) == 3
    assert all(line.endswith(",true") for line in lines[1:])
    summary = json.loads((out / "summary.json").read_text())
    assert summary["final_log_wealth"] < 0.0


def test_bav_rejects_batch_without_test_row(
    capsys: CaptureFixture, main: c.MainType, tmp_path: Path
) -> None:
    """Tests that every batch needs exactly one test row."""
    stream = _stream_file(
        tmp_path / "stream.csv", "batch_id,role,score\na,calib,1\n"
    )
    assert main("bav", "--alpha", "0.5", "--stream", str(stream)) == 2
    assert "batch_id=a" in capsys.readouterr().err


def test_posthoc(
    capsys: CaptureFixture, main: c.MainType, calib_file: Path, row_file: Path
) -> None:
    """Tests the 'posthoc' subcommand's selection."""
    args = ["--calib", str(calib_file), "--row", str(row_file)]
    grid = ["--grid", "0.1:0.9:0.1"]
    assert main("posthoc", *args, "--C", "3", *grid) == 0

    selection = json.loads(capsys.readouterr().out)
    assert selection["alpha_tilde"] == 0.5
    assert selection["achieved_size"] == 3
    assert selection["set"] == ["cat", "dog", "fox"]


def test_posthoc_infeasible(
    capsys: CaptureFixture,
    main: c.MainType,
    calib_file: Path,
    row_file: Path,
    tmp_path: Path,
) -> None:
    """Tests that infeasibility exits with status 3 and keeps the profile."""
    out = tmp_path / "out"
    args = ["--calib", str(calib_file), "--row", str(row_file)]
    grid = ["--grid", "0.1:0.9:0.1", "--out", str(out)]
    assert main("posthoc", *args, "--C", "1", *grid) == 3

    lines = (out / "profile.csv").read_text().splitlines()
    assert lines[0] == "alpha,set_size"
    assert lines[-1] == "0.9,2"
    assert "target_size=1" in capsys.readouterr().err


def test_posthoc_bad_grid(
    main: c.MainType, calib_file: Path, row_file: Path
) -> None:
    """Tests that a malformed grid exits with status 2."""
    args = ["--calib", str(calib_file), "--row", str(row_file)]
    assert main("posthoc", *args, "--C", "2", "--grid", "0.1:0.5") == 2


def test_mccp_single_expert(
    capsys: CaptureFixture,
    main: c.MainType,
    calib_file: Path,
    row_file: Path,
    tmp_path: Path,
) -> None:
    """Tests 'mccp' with one expert against 'baseline' on the same column.

    The e-variant reproduces the fixed-alpha e-set. The p-variant takes
    the order statistic just below the baseline's.
    """
    matrix = c.write_matrix(tmp_path / "m.csv", [[s] for s in c.CALIB])
    args = ["--alpha", "0.5", "--row", str(row_file)]
    assert main("mccp", *args, "--matrix", str(matrix), "--m", "1") == 0
    report = json.loads(capsys.readouterr().out)

    assert main("baseline", *args, "--calib", str(calib_file)) == 0
    baseline = json.loads(capsys.readouterr().out)

    assert baseline["threshold"] == 3.0
    assert report["p_variant"]["threshold"] == 2.0
    assert report["p_variant"]["set"] == ["cat"]
    assert report["e_variant"]["threshold"] == approx(10.0 / 1.5, rel=1e-8)
    assert report["e_variant"]["set"] == ["cat", "dog", "fox"]
    assert report["m"] == 1


def test_mccp_pools_experts(
    capsys: CaptureFixture, main: c.MainType, row_file: Path, tmp_path: Path
) -> None:
    """Tests 'mccp' on a two-expert matrix."""
    matrix = c.write_matrix(tmp_path / "m.csv", [[4.0, 1.0], [2.0, 3.0]])
    args = ["--alpha", "0.5", "--row", str(row_file), "--matrix"]
    assert main("mccp", *args, str(matrix)) == 0

    report = json.loads(capsys.readouterr().out)
    assert report["m"] == 2
    assert report["p_variant"]["threshold"] == 2.0
    # the mean e-value reaches 2 near s = 9.9
    assert report["e_variant"]["threshold"] > 9.0
    assert report["e_variant"]["set"] == ["cat", "dog", "fox", "owl"]


def test_mccp_too_many_experts(
    main: c.MainType, row_file: Path, tmp_path: Path
) -> None:
    """Tests that --m may not exceed the number of columns."""
    matrix = c.write_matrix(tmp_path / "m.csv", [[s] for s in c.CALIB])
    args = ["--alpha", "0.5", "--row", str(row_file), "--matrix"]
    assert main("mccp", *args, str(matrix), "--m", "2") == 2


SMALL_RUNS = {
    "bav": ["--reps", "5", "--T", "3", "--n", "10"],
    "ville": ["--reps", "5", "--T", "3", "--n", "10"],
    "naive-sequential": ["--reps", "5", "--n", "20"],
    "posthoc": ["--reps", "5", "--n", "20", "--K", "4", "--C", "3"],
    "mccp": ["--reps", "3", "--n", "10", "--m", "2", "--n-test", "5"],
}


@params("experiment", sorted(SMALL_RUNS))
def test_simulate(
    capsys: CaptureFixture, main: c.MainType, experiment: str
) -> None:
    """Tests that every experiment runs and is reproducible."""
    args = ["simulate", experiment, "--seed", "7", *SMALL_RUNS[experiment]]
    assert main(*args) == 0
    first = capsys.readouterr().out
    assert main(*args) == 0
    assert capsys.readouterr().out == first

    report = json.loads(first)
    if experiment == "mccp":
        assert sorted(report) == ["e_variant", "method", "p_variant"]
    else:
        assert report["params"]["seed"] == 7


def test_simulate_out_dir(main: c.MainType, tmp_path: Path) -> None:
    """Tests the flattened CSV written next to the JSON report."""
    out = tmp_path / "out"
    args = ["--seed", "1", "--reps", "4", "--T", "2", "--n", "5"]
    assert main("simulate", "bav", *args, "--out", str(out)) == 0

    assert sorted(p.name for p in out.iterdir()) == ["bav.csv", "bav.json"]
    lines = (out / "bav.csv").read_text().splitlines()
    assert lines[0] == "method,key,value"
    assert "bav-all-in,trials,4" in lines


def test_simulate_precondition(main: c.MainType) -> None:
    """Tests that a violated experiment precondition exits with status 2."""
    args = ["--seed", "1", "--n", "5", "--alpha", "0.15"]
    assert main("simulate", "naive-sequential", *args) == 2


def test_simulate_classifier_options(
    capsys: CaptureFixture, main: c.MainType
) -> None:
    """Tests that classifier options reach the batch experiment's report."""
    args = ["--seed", "1", "--reps", "3", "--T", "2", "--n", "5"]
    model = ["--concentration", "0.5", "--noise", "0", "--exponent", "0.25"]
    assert main("simulate", "bav", *args, *model) == 0

    params = json.loads(capsys.readouterr().out)["params"]
    assert params["dist"] == "classifier"
    assert params["concentration"] == 0.5
    assert params["noise"] == 0.0
    assert params["exponent"] == 0.25

    assert main("simulate", "bav", *args, "--noise", "-1") == 2
    assert main("simulate", "posthoc", *args, "--K", "1") == 2


def test_simulate_posthoc_infeasible(
    capsys: CaptureFixture, main: c.MainType
) -> None:
    """Tests that a run without a single feasible trial exits with 3."""
    args = ["--seed", "0", "--reps", "4", "--n", "5", "--C", "1"]
    grid = ["--grid", "0.01:0.02:0.01"]
    assert main("simulate", "posthoc", *args, *grid) == 3

    captured = capsys.readouterr()
    report = json.loads(captured.out)
    assert report["trials"] == 0
    assert report["coverage"] is None
    assert "target size" in captured.err
