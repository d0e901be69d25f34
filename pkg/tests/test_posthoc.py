"""Tests for fixed-size sets with data-dependent levels."""

from __future__ import annotations

import math

from eris import Err
import numpy as np
from pytest import approx, mark, raises

from econform.core import e_set_threshold, label_set_from_threshold
from econform.errors import DomainError, SelectionInfeasibleError
from econform.posthoc import (
    AlphaGrid,
    fixed_size_set,
    posthoc_ratio_estimate,
    profile_rows,
    select_alpha,
    set_size_at_alpha,
    size_profile,
    subgaussian_bound,
    taylor_coverage,
)
from econform.scores import ScoreVector, validate_row, validate_scores

from . import common as c


params = mark.parametrize

ROW = validate_row([score for _, score in c.ROW])
GRID = AlphaGrid.from_spec("0.1:0.9:0.1").unwrap()


def test_default_grid() -> None:
    """Tests the default grid and its start:stop:step spelling."""
    grid = AlphaGrid.default()
    assert len(grid) == 30
    assert grid.candidates[0] == 0.01
    assert grid.candidates[-1] == 0.3
    assert AlphaGrid.from_spec("0.01:0.30:0.01").unwrap() == grid


@params(
    "spec",
    ["0.2", "a:b:c", "0.1:0.5:0", "0.5:0.1:0.1", "0.5:1.5:0.5", "0:0.5:0.1"],
)
def test_bad_grid_specs(spec: str) -> None:
    """Tests that malformed or out-of-range grids are rejected."""
    assert isinstance(AlphaGrid.from_spec(spec), Err)


def test_grid_must_increase() -> None:
    """Tests the strictly-increasing invariant."""
    with raises(DomainError):
        AlphaGrid((0.2, 0.1))
    with raises(DomainError):
        AlphaGrid(())


def test_size_profile(calib: ScoreVector) -> None:
    """Tests the hand-computed size profile of the shared row."""
    profile = size_profile(calib, ROW, GRID)
    assert [size for _, size in profile] == [4, 4, 4, 4, 3, 3, 3, 2, 2]
    assert [alpha for alpha, _ in profile] == list(GRID.candidates)


def test_size_profile_matches_per_alpha_sizes() -> None:
    """Tests the one-pass profile against one e-set per candidate."""
    rng = np.random.default_rng(5)
    grid = AlphaGrid.default()
    for _ in range(30):
        calib = validate_scores(rng.exponential(size=40))
        row = validate_row(rng.exponential(scale=4.0, size=10))
        expected = tuple(
            (alpha, set_size_at_alpha(calib, row, alpha))
            for alpha in grid.candidates
        )
        assert size_profile(calib, row, grid) == expected


def test_size_profile_is_nonincreasing() -> None:
    """Tests that sets shrink as alpha grows."""
    rng = np.random.default_rng(6)
    calib = validate_scores(rng.exponential(size=25))
    row = validate_row(rng.exponential(scale=3.0, size=12))
    sizes = [size for _, size in size_profile(calib, row, AlphaGrid.default())]
    assert sizes == sorted(sizes, reverse=True)


@params(
    "target_size,alpha_tilde,size", [(4, 0.1, 4), (3, 0.5, 3), (2, 0.8, 2)]
)
def test_select_alpha(
    calib: ScoreVector, target_size: int, alpha_tilde: float, size: int
) -> None:
    """Tests that the smallest feasible level is chosen."""
    selection = select_alpha(calib, ROW, target_size, GRID)
    assert selection.alpha_tilde == alpha_tilde
    assert selection.achieved_size == size
    assert selection.target_size == target_size
    assert len(selection.profile) == len(GRID)


def test_select_alpha_infeasible(calib: ScoreVector) -> None:
    """Tests that infeasibility carries the whole profile."""
    with raises(SelectionInfeasibleError) as exc_info:
        select_alpha(calib, ROW, 1, GRID)
    assert exc_info.value.target_size == 1
    assert exc_info.value.profile == size_profile(calib, ROW, GRID)
    with raises(DomainError):
        select_alpha(calib, ROW, 0, GRID)


def test_fixed_size_set(calib: ScoreVector) -> None:
    """Tests the set built at the selected level."""
    selection, labels = fixed_size_set(calib, ROW, 3, GRID)
    assert labels == {0, 1, 2}
    assert len(labels) == selection.achieved_size


def test_posthoc_ratio_estimate() -> None:
    """Tests the mean and standard error of 1{miss} / alpha~."""
    estimate = posthoc_ratio_estimate(
        [(True, 0.1), (False, 0.5), (False, 0.25)]
    )
    assert estimate.value == approx(2.0)
    assert estimate.se == approx(2.0 / math.sqrt(3.0))
    assert estimate.trials == 3
    assert posthoc_ratio_estimate([(False, 0.5)]).se == 0.0
    with raises(DomainError):
        posthoc_ratio_estimate([])


def test_subgaussian_bound() -> None:
    """Tests the sub-Gaussian coverage bound."""
    assert subgaussian_bound(0.1, 0.0, 0.05) == approx(0.9)
    assert subgaussian_bound(0.1, 1.0, 0.01) < 0.0
    with raises(DomainError):
        subgaussian_bound(0.1, -1.0, 0.05)
    with raises(DomainError):
        subgaussian_bound(0.1, 0.1, 1.0)


def test_taylor_coverage() -> None:
    """Tests the first-order coverage diagnostic."""
    assert taylor_coverage([0.1, 0.2, 0.3]) == approx(0.8)
    with raises(DomainError):
        taylor_coverage([])


def test_profile_rows() -> None:
    """Tests the CSV records of a profile."""
    assert profile_rows(((0.1, 4), (0.2, 3))) == [
        {"alpha": 0.1, "set_size": 4},
        {"alpha": 0.2, "set_size": 3},
    ]


@params("alpha", [0.05, 0.2, 0.5])
def test_single_candidate_grid_is_fixed_alpha(alpha: float) -> None:
    """Tests that a one-level grid reproduces the fixed-alpha e-set.

    With alpha~ constant, the ratio estimate is the miss rate over alpha.
    """
    rng = np.random.default_rng(21)
    grid = AlphaGrid((alpha,))
    trials = []
    for _ in range(100):
        scores = rng.exponential(size=31)
        calib = validate_scores(scores[:30])
        row = validate_row(np.append(scores[30], rng.exponential(size=5)))
        plain = label_set_from_threshold(row, e_set_threshold(calib, alpha))

        selection, labels = fixed_size_set(calib, row, len(row), grid)
        assert selection.alpha_tilde == alpha
        assert labels == plain
        if len(plain) > 1:
            with raises(SelectionInfeasibleError):
                fixed_size_set(calib, row, len(plain) - 1, grid)
        trials.append((0 in labels, selection.alpha_tilde))

    misses = sum(not covered for covered, _ in trials)
    assert posthoc_ratio_estimate(trials).value == approx(
        misses / len(trials) / alpha
    )
