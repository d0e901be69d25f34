"""Readers for the CSV files the command-line interface consumes."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Hashable, List, Sequence, Tuple, Union

from eris import ErisResult, Err, Ok
from logrus import Logger
import pandas as pd
from typist import PathLike

from .errors import DomainError, ScoreValidationError
from .mccp import ExpertScoreMatrix
from .scores import LabelScoreRow, ScoreVector, validate_row, validate_scores


logger = Logger(__name__)

Label = Union[int, str]
Batch = Tuple[Hashable, ScoreVector, float]

CALIB_ROLE = "calib"
TEST_ROLE = "test"


@dataclass(frozen=True)
class LabelledRow:
    """Candidate scores together with the labels they belong to."""

    labels: Tuple[Label, ...]
    row: LabelScoreRow

    def select(self, indices: Sequence[int]) -> List[Label]:
        """Maps label indices back onto the file's label values."""
        return [self.labels[i] for i in sorted(indices)]


def _read_csv(
    path: PathLike, columns: Sequence[str], **kwargs: object
) -> ErisResult[pd.DataFrame]:
    path = Path(path)
    try:
        frame = pd.read_csv(path, **kwargs)
    except FileNotFoundError:
        return Err(f"File does not exist. | path={path}")
    except pd.errors.EmptyDataError:
        return Err(f"File is empty. | path={path}")
    except (pd.errors.ParserError, UnicodeDecodeError, OSError) as e:
        return Err(f"Unable to parse CSV file. | path={path} error={e}")

    frame.columns = [str(col).strip() for col in frame.columns]
    missing = [col for col in columns if col not in frame.columns]
    if missing:
        return Err(
            f"CSV file is missing required columns. | path={path}"
            f" missing={missing} found={list(frame.columns)}"
        )
    logger.debug("Read CSV file.", path=str(path), rows=len(frame))
    return Ok(frame)


def _numeric(column: pd.Series) -> pd.Series:
    return pd.to_numeric(column, errors="coerce")


def read_scores(path: PathLike) -> ErisResult[ScoreVector]:
    """Reads a calibration file with a `score` column."""
    frame_r = _read_csv(path, ["score"])
    if isinstance(frame_r, Err):
        return frame_r
    frame = frame_r.ok()

    try:
        return Ok(validate_scores(_numeric(frame["score"]).to_numpy()))
    except ScoreValidationError as e:
        return Err(
            "Invalid calibration score. |"
            f" path={path} row={e.index + 1} value={e.value!r}"
        )


def _label(value: str) -> Label:
    try:
        return int(value)
    except ValueError:
        return value


def read_label_row(path: PathLike) -> ErisResult[LabelledRow]:
    """Reads a candidate row file with `label,score` columns."""
    frame_r = _read_csv(path, ["label", "score"], dtype={"label": str})
    if isinstance(frame_r, Err):
        return frame_r
    frame = frame_r.ok()

    labels = tuple(_label(str(v).strip()) for v in frame["label"])
    if len(set(labels)) != len(labels):
        return Err(f"Candidate labels must be unique. | path={path}")

    try:
        row = validate_row(_numeric(frame["score"]).to_numpy())
    except ScoreValidationError as e:
        return Err(
            "Invalid candidate score. |"
            f" path={path} label={labels[e.index]!r} value={e.value!r}"
        )
    except DomainError as e:
        return Err(f"Invalid candidate row: {e} | path={path}")
    return Ok(LabelledRow(labels=labels, row=row))


def read_batch_stream(path: PathLike) -> ErisResult[List[Batch]]:
    """Reads a `batch_id,role,score` stream into (batch_id, calib, test).

    Batches keep the order in which their ids first appear. Each batch
    needs exactly one test row and may have no calibration rows.
    """
    frame_r = _read_csv(
        path, ["batch_id", "role", "score"], dtype={"batch_id": str}
    )
    if isinstance(frame_r, Err):
        return frame_r
    frame = frame_r.ok()
    if frame.empty:
        return Err(f"Batch stream holds no batches. | path={path}")

    frame["batch_id"] = frame["batch_id"].str.strip()
    no_id = frame["batch_id"].isna() | (frame["batch_id"] == "")
    if no_id.any():
        return Err(
            "Every row needs a batch_id. |"
            f" path={path} row={int(no_id.idxmax()) + 1}"
        )

    frame["role"] = frame["role"].astype(str).str.strip().str.lower()
    bad_roles = sorted(set(frame["role"]) - {CALIB_ROLE, TEST_ROLE})
    if bad_roles:
        return Err(
            f"Unknown batch roles. | path={path} roles={bad_roles}"
            f" expected={[CALIB_ROLE, TEST_ROLE]}"
        )
    frame["score"] = _numeric(frame["score"])

    batches: List[Batch] = []
    for batch_id, group in frame.groupby("batch_id", sort=False):
        tests = group.loc[group["role"] == TEST_ROLE, "score"]
        if len(tests) != 1:
            return Err(
                "Every batch needs exactly one test row. |"
                f" path={path} batch_id={batch_id} test_rows={len(tests)}"
            )

        test_score = float(tests.iloc[0])
        calib_scores = group.loc[group["role"] == CALIB_ROLE, "score"]
        try:
            validate_scores([test_score])
            calib = validate_scores(calib_scores.to_numpy())
        except ScoreValidationError as e:
            return Err(
                "Invalid score in batch. |"
                f" path={path} batch_id={batch_id} value={e.value!r}"
            )
        batches.append((batch_id, calib, test_score))

    return Ok(batches)


def read_expert_matrix(path: PathLike) -> ErisResult[ExpertScoreMatrix]:
    """Reads an `expert_1,...,expert_m` file (one row per example)."""
    frame_r = _read_csv(path, [])
    if isinstance(frame_r, Err):
        return frame_r
    frame = frame_r.ok()

    if frame.shape[1] < 1 or frame.empty:
        return Err(f"Expert matrix holds no scores. | path={path}")
    unexpected = [c for c in frame.columns if not c.startswith("expert_")]
    if unexpected:
        return Err(
            "Expert matrix columns must be named expert_<j>. |"
            f" path={path} columns={unexpected}"
        )

    numeric = frame.apply(_numeric)
    try:
        return Ok(ExpertScoreMatrix.from_rows(numeric.to_numpy()))
    except ScoreValidationError as e:
        row, col = divmod(e.index, frame.shape[1])
        return Err(
            "Invalid expert score. |"
            f" path={path} row={row + 1} column={frame.columns[col]}"
            f" value={e.value!r}"
        )
