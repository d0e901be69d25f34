"""This file contains shared fixtures and pytest hooks.

https://docs.pytest.org/en/6.2.x/fixture.html#conftest-py-sharing-fixtures-across-multiple-files
"""

from __future__ import annotations

from pathlib import Path
from typing import TYPE_CHECKING, Any

from pytest import fixture

from econform.__main__ import main as econform_main
from econform.scores import ScoreVector, validate_scores

from . import common as c


if TYPE_CHECKING:  # fixes pytest warning
    from clack.pytest_plugin import MakeConfigFile


pytest_plugins = ["clack.pytest_plugin"]


@fixture
def main(make_config_file: MakeConfigFile) -> c.MainType:
    """Returns a wrapper around econform's main() function."""

    def inner_main(*args: str, **kwargs: Any) -> int:
        cfg_kwargs = {k: str(v) for (k, v) in kwargs.items()}

        config_file = make_config_file("econform_test_config", **cfg_kwargs)
        argv = ["econform", "-c", str(config_file.path)] + list(args)
        return econform_main(argv)

    return inner_main


@fixture
def calib() -> ScoreVector:
    """The calibration scores 1, 2, 3, 4."""
    return validate_scores(c.CALIB)


@fixture
def calib_file(tmp_path: Path) -> Path:
    """A calibration CSV holding the scores 1, 2, 3, 4."""
    return c.write_scores(tmp_path / "calib.csv", c.CALIB)


@fixture
def row_file(tmp_path: Path) -> Path:
    """A candidate CSV with four labelled scores."""
    return c.write_row(tmp_path / "row.csv", c.ROW)
