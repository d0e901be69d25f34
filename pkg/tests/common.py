"""Test utils used by multiple modules."""

from __future__ import annotations

from pathlib import Path
from typing import Any, Final, Iterable, Protocol, Sequence


# 3 standard errors: the tolerance of every Monte Carlo assertion
MC_SIGMAS: Final = 3.0

# calibration scores used by the closed-form oracles
CALIB: Final = (1.0, 2.0, 3.0, 4.0)

# label -> score rows fed to the CLI
ROW: Final = (("cat", 0.5), ("dog", 2.5), ("fox", 3.5), ("owl", 9.0))


class MainType(Protocol):
    """Type returned by main() fixture."""

    def __call__(self, *args: str, **kwargs: Any) -> int:
        """The signature of the main() function."""


def write_scores(path: Path, scores: Iterable[float]) -> Path:
    """Writes a calibration file with a single `score` column."""
    lines = ["score"] + [repr(float(s)) for s in scores]
    path.write_text("\n".join(lines) + "\n")
    return path


def write_row(path: Path, row: Sequence[tuple[Any, float]]) -> Path:
    """Writes a `label,score` candidate file."""
    lines = ["label,score"] + [f"{label},{score!r}" for label, score in row]
    path.write_text("\n".join(lines) + "\n")
    return path


def write_matrix(path: Path, rows: Sequence[Sequence[float]]) -> Path:
    """Writes an `expert_1,...,expert_m` file."""
    m = len(rows[0])
    header = ",".join(f"expert_{j}" for j in range(1, m + 1))
    lines = [header] + [",".join(repr(float(v)) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")
    return path
