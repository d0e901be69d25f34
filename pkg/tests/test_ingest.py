"""Tests for the CSV readers in econform.ingest."""

from __future__ import annotations

from pathlib import Path

from eris import Err
from pytest import mark

from econform.ingest import (
    read_batch_stream,
    read_expert_matrix,
    read_label_row,
    read_scores,
)

from . import common as c


params = mark.parametrize


def test_read_scores(calib_file: Path) -> None:
    """Tests reading a calibration file."""
    assert read_scores(calib_file).unwrap().tolist() == list(c.CALIB)


def test_read_scores_errors(tmp_path: Path) -> None:
    """Tests that missing, empty and malformed files are Err values."""
    assert isinstance(read_scores(tmp_path / "missing.csv"), Err)

    empty = tmp_path / "empty.csv"
    empty.write_text("")
    assert isinstance(read_scores(empty), Err)

    wrong = tmp_path / "wrong.csv"
    wrong.write_text("value\n1.0\n")
    result = read_scores(wrong)
    assert isinstance(result, Err)
    assert "missing" in str(result.err())

    text = tmp_path / "text.csv"
    text.write_text("score\n1.0\nabc\n")
    result = read_scores(text)
    assert isinstance(result, Err)
    assert "row=2" in str(result.err())


def test_read_label_row(tmp_path: Path) -> None:
    """Tests that labels keep their order and integer labels are parsed."""
    path = c.write_row(tmp_path / "row.csv", [(2, 1.5), (0, 0.5), (1, 4.0)])
    labelled = read_label_row(path).unwrap()
    assert labelled.labels == (2, 0, 1)
    assert labelled.row.per_label.tolist() == [1.5, 0.5, 4.0]
    assert labelled.select([2, 0]) == [2, 1]


def test_read_label_row_rejects_duplicates(tmp_path: Path) -> None:
    """Tests that a label may only appear once."""
    path = c.write_row(tmp_path / "row.csv", [("a", 1.0), ("a", 2.0)])
    assert isinstance(read_label_row(path), Err)


def test_read_batch_stream(tmp_path: Path) -> None:
    """Tests grouping a stream into batches in order of appearance."""
    path = tmp_path / "stream.csv"
    path.write_text(
        "batch_id,role,score\n"
        "z,calib,1\nz,test,2\ny,test,5\ny,calib,3\ny,calib,4\n"
    )
    batches = read_batch_stream(path).unwrap()
    assert [batch_id for batch_id, _, _ in batches] == ["z", "y"]
    assert batches[1][1].tolist() == [3.0, 4.0]
    assert batches[1][2] == 5.0


def test_read_batch_stream_errors(tmp_path: Path) -> None:
    """Tests bad roles, duplicate test rows and empty streams."""
    path = tmp_path / "stream.csv"
    path.write_text("batch_id,role,score\na,train,1\na,test,1\n")
    assert isinstance(read_batch_stream(path), Err)

    path.write_text("batch_id,role,score\na,test,1\na,test,2\n")
    assert isinstance(read_batch_stream(path), Err)

    path.write_text("batch_id,role,score\n")
    assert isinstance(read_batch_stream(path), Err)


@params("blank", ["", "  "])
def test_read_batch_stream_rejects_missing_ids(
    tmp_path: Path, blank: str
) -> None:
    """Tests that a row without a batch_id is an error, not a dropped row."""
    path = tmp_path / "stream.csv"
    path.write_text(
        "batch_id,role,score\n"
        f"a,calib,1\na,test,2\n{blank},test,9\nb,test,3\n"
    )
    result = read_batch_stream(path)
    assert isinstance(result, Err)
    assert "row=3" in str(result.err())


def test_read_expert_matrix(tmp_path: Path) -> None:
    """Tests reading and validating an expert score matrix."""
    path = c.write_matrix(tmp_path / "m.csv", [[1.0, 2.0], [3.0, 4.0]])
    matrix = read_expert_matrix(path).unwrap()
    assert (matrix.n, matrix.m) == (2, 2)

    bad = c.write_matrix(tmp_path / "bad.csv", [[1.0, 2.0], [3.0, -4.0]])
    result = read_expert_matrix(bad)
    assert isinstance(result, Err)
    assert "column=expert_2" in str(result.err())

    path.write_text("a,b\n1,2\n")
    assert isinstance(read_expert_matrix(path), Err)
