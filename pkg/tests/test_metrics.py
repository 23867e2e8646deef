from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import steps_from
from tracepat.detectors import PatternInstance
from tracepat.metrics import (
    EmptySegment,
    SegmentMetrics,
    aggregate_metrics,
    branching_factor,
    compute_metrics,
    describe,
    long_range_references,
    pruning_rate,
)

FILL = "The listing shows register setup in the prologue."


def decision_segment() -> list[str]:
    t = [FILL] * 10
    t[1] = "I need to decide between several options here."
    t[3] = "Time to choose; there are multiple paths to consider."
    t[5] = "The decision is to skip the cleanup routine."
    t[7] = "I will pick the loop body next."
    return t


def test_formula_fixture(lexicon):
    m = compute_metrics(steps_from(decision_segment()), "P1", lexicon)
    assert (m.L, m.F, m.B, m.P, m.R) == (10, 1.0, 1.75, 0.25, 0)
    assert (m.decision_points, m.multi_alt_points, m.prune_points) == (4, 2, 1)


def test_p3_backtrack_fixed(lexicon):
    for text in (FILL, "", "Going back to the start, revisit everything."):
        assert compute_metrics(steps_from([text] * 4), "P3", lexicon).R == 1


def test_no_decisions(lexicon):
    m = compute_metrics(steps_from([FILL] * 5), "P2", lexicon)
    assert (m.B, m.P) == (1.0, 0.0)


def test_forward_ratio_counts_continue(lexicon):
    m = compute_metrics(steps_from([FILL] * 4, statuses=["continue", "executed", "continue", "complete"]), "P4", lexicon)
    assert m.F == 0.5


def test_backtracks_and_long_range_references(lexicon):
    t = [FILL] * 14
    t[0] = "Reading handler_func."
    t[12] = "Again handler_func."
    t[13] = "Going back to the parser."
    steps = steps_from(t)
    flags = long_range_references(steps, 10)
    assert flags[12] and not flags[0] and not flags[13]
    assert compute_metrics(steps, "P2", lexicon, reference_flags=flags).R == 2
    # judged within a short segment the earlier mention is invisible
    assert compute_metrics(steps[11:], "P2", lexicon).R == 1


def test_empty_segment(lexicon):
    with pytest.raises(EmptySegment):
        compute_metrics([], "P1", lexicon)


@pytest.mark.parametrize("r, expected", [(0, 1.0), (0.25, 1.375), (0.5, 1.75), (0.75, 2.125), (1, 2.5)])
def test_branching_sweep(r, expected):
    assert branching_factor(int(r * 4), 4) == expected


def test_branching_and_pruning_degenerate():
    assert branching_factor(0, 0) == 1.0
    assert pruning_rate(0, 0) == 0.0


def test_describe():
    d = describe([1, 2, 3])
    assert d["mean"] == 2 and d["median"] == 2
    assert d["std"] == pytest.approx(0.816496580927726)
    assert describe([1, 1, 1])["std"] == 0
    assert describe([4, 1, 3, 2])["median"] == 2


@given(st.lists(st.floats(min_value=-1e6, max_value=1e6), min_size=1, max_size=50))
def test_describe_matches_numpy(values):
    d = describe(values)
    arr = np.array(values)
    assert d["mean"] == pytest.approx(arr.mean(), rel=1e-9, abs=1e-6)
    assert d["std"] == pytest.approx(arr.std(ddof=0), rel=1e-6, abs=1e-6)
    assert d["median"] == sorted(values)[(len(values) - 1) // 2]


def _metrics(L, F, B, R, P):
    return SegmentMetrics(L, F, B, R, P, 0, 0, 0)


def test_aggregate_groups_by_pattern():
    inst = lambda p: PatternInstance(p, "s", 0, 0, 0, {})
    pairs = [
        (inst("P1"), _metrics(10, 1.0, 1.0, 0, 0.0)),
        (inst("P1"), _metrics(20, 0.5, 2.5, 2, 1.0)),
        (inst("P3"), _metrics(5, 1.0, 1.0, 1, 0.0)),
    ]
    agg = aggregate_metrics(pairs)
    assert agg["P1"]["L"]["mean"] == 15 and agg["P1"]["L"]["median"] == 10
    assert agg["P1"]["B"]["std"] == 0.75
    assert agg["P3"]["R"] == {"mean": 1.0, "median": 1.0, "std": 0.0, "count": 1}
    assert "P2" not in agg


@given(st.lists(st.sampled_from([FILL, "", "I need to decide between several options.",
                                 "Choose now and skip the rest.", "Going back to handler_func."]),
                min_size=1, max_size=30),
       st.sampled_from(["P1", "P2", "P3", "P4"]))
def test_metric_ranges(lexicon, thoughts, pattern):
    m = compute_metrics(steps_from(thoughts), pattern, lexicon)
    assert 0 <= m.F <= 1 and 0 <= m.P <= 1
    assert 1.0 <= m.B <= 2.5
    assert m.L == len(thoughts)
    assert not math.isnan(m.B)
