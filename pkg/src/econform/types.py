"""Custom types used by econform."""

from __future__ import annotations

import enum
from typing import Literal, NewType, Union


EValue = NewType("EValue", float)
PValue = NewType("PValue", float)

Format = Literal["json", "csv"]
StrategyName = Literal["all-in", "grapa"]
ExperimentName = Literal["bav", "naive-sequential", "posthoc", "mccp", "ville"]


class Bound(enum.Enum):
    """Non-numeric conformal set thresholds."""

    # every candidate score is admitted
    UNBOUNDED = enum.auto()
    # no candidate score is admitted
    EMPTY = enum.auto()


# A score threshold is either a positive real or one of the Bound members.
Threshold = Union[float, Bound]
