"""Serialization of results and atomic writes of output artifacts."""

from __future__ import annotations

from dataclasses import dataclass
import enum
import io
import json
import math
import os
from pathlib import Path
import tempfile
from typing import Any, Dict, Iterable, List, Mapping, Sequence

from eris import ErisResult, Err, Ok
from logrus import Logger
import numpy as np
import pandas as pd
from typist import PathLike

from .common import threshold_token
from .types import Bound, Format


logger = Logger(__name__)


def jsonable(obj: Any) -> Any:
    """Converts `obj` into data that json.dumps() renders deterministically.

    Non-finite floats become the strings "inf", "-inf" and "nan", threshold
    bounds become their tokens, and sets become sorted lists.

    Examples:
        >>> jsonable({"x": float("inf"), "y": (1, 2.5)})
        {'x': 'inf', 'y': [1, 2.5]}
        >>> jsonable(frozenset({3, 1}))
        [1, 3]
    """
    if isinstance(obj, Bound):
        return threshold_token(obj)
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    if isinstance(obj, Mapping):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (set, frozenset)):
        return sorted(jsonable(v) for v in obj)
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, Path):
        return str(obj)
    return obj


def dump_json(data: Any) -> str:
    """Sorted, indented JSON text ending in a newline."""
    return json.dumps(jsonable(data), sort_keys=True, indent=2) + "\n"


def _csv_cell(value: Any) -> Any:
    value = jsonable(value)
    if isinstance(value, bool):
        return "true" if value else "false"
    return value


def dump_csv(records: Sequence[Mapping[str, Any]], columns: List[str]) -> str:
    """CSV text with the given column order and a header row."""
    frame = pd.DataFrame(
        [{col: _csv_cell(rec.get(col)) for col in columns} for rec in records],
        columns=columns,
    )
    buffer = io.StringIO()
    frame.to_csv(buffer, index=False, lineterminator="\n")
    return buffer.getvalue()


def flatten(data: Any, prefix: str = "") -> Iterable[tuple[str, Any]]:
    """Yields (dotted.key, leaf) pairs of nested mappings and lists.

    Examples:
        >>> list(flatten({"a": {"b": 1}, "c": [2, 3]}))
        [('a.b', 1), ('c.0', 2), ('c.1', 3)]
    """
    if isinstance(data, Mapping):
        for key in sorted(data, key=str):
            sub = f"{prefix}.{key}" if prefix else str(key)
            yield from flatten(data[key], sub)
    elif isinstance(data, (list, tuple)):
        for i, item in enumerate(data):
            yield from flatten(item, f"{prefix}.{i}" if prefix else str(i))
    else:
        yield prefix, data


def flat_report_csv(reports: Sequence[Mapping[str, Any]]) -> str:
    """One `method,key,value` row per leaf of every report dictionary."""
    records = []
    for report in reports:
        method = report.get("method", "")
        for key, value in flatten(jsonable(report)):
            if key != "method":
                records.append({"method": method, "key": key, "value": value})
    return dump_csv(records, ["method", "key", "value"])


def render(
    fmt: Format,
    json_data: Any,
    csv_records: Sequence[Mapping[str, Any]],
    csv_columns: List[str],
) -> str:
    """Renders the primary report of a subcommand in the requested format."""
    if fmt == "csv":
        return dump_csv(csv_records, csv_columns)
    return dump_json(json_data)


def write_atomic(path: PathLike, text: str) -> ErisResult[Path]:
    """Writes `text` to `path` by renaming a finished temporary file."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, temp_name = tempfile.mkstemp(
            prefix=f".{path.name}.", suffix=".tmp", dir=path.parent
        )
    except OSError as e:
        return Err(f"Unable to create output file. | path={path} error={e}")

    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(temp_name, path)
    except OSError as e:
        if os.path.exists(temp_name):
            os.remove(temp_name)
        return Err(f"Unable to write output file. | path={path} error={e}")

    logger.info("Wrote output file.", path=str(path), size=len(text))
    return Ok(path)


@dataclass(frozen=True)
class Artifact:
    """A named output file of a subcommand."""

    name: str
    text: str


def write_artifacts(
    out_dir: PathLike, artifacts: Iterable[Artifact]
) -> ErisResult[Dict[str, Path]]:
    """Writes every artifact into `out_dir`."""
    written: Dict[str, Path] = {}
    for artifact in artifacts:
        path_r = write_atomic(Path(out_dir) / artifact.name, artifact.text)
        if isinstance(path_r, Err):
            return path_r
        written[artifact.name] = path_r.ok()
    return Ok(written)
