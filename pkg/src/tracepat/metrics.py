"""Behavioral metrics over pattern-aligned segments (L, F, B, R, P)."""

from __future__ import annotations

import statistics
from dataclasses import dataclass
from typing import Iterable, Sequence

from tracepat.detectors import DEFAULT_THRESHOLDS, PatternInstance, Thresholds
from tracepat.lexicon import Lexicon, SignalKind as K, extract_semantic_entities, match_signal
from tracepat.model import AssistantStep

BRANCHING_ALPHA = 1.5
CONTINUE_STATUS = "continue"


class EmptySegment(ValueError):
    pass


@dataclass(frozen=True)
class SegmentMetrics:
    path_length: int
    forward_ratio: float
    branching_factor: float
    backtrack_count: int
    pruning_rate: float
    decision_points: int
    multi_alt_points: int
    prune_points: int

    # short aliases matching the usual table headings
    @property
    def L(self) -> int:
        return self.path_length

    @property
    def F(self) -> float:
        return self.forward_ratio

    @property
    def B(self) -> float:
        return self.branching_factor

    @property
    def R(self) -> int:
        return self.backtrack_count

    @property
    def P(self) -> float:
        return self.pruning_rate


def branching_factor(multi_alt_points: int, decision_points: int) -> float:
    if decision_points == 0:
        return 1.0
    return 1.0 + BRANCHING_ALPHA * (multi_alt_points / decision_points)


def pruning_rate(prune_points: int, decision_points: int) -> float:
    return prune_points / decision_points if decision_points else 0.0


def segment_bounds(inst: PatternInstance) -> tuple[int, int]:
    return inst.start_step, inst.end_step


def segment_of(steps: Sequence[AssistantStep], inst: PatternInstance) -> list[AssistantStep]:
    lo, hi = segment_bounds(inst)
    return list(steps[lo : hi + 1])


def long_range_references(steps: Sequence[AssistantStep], gap: int) -> list[bool]:
    """Per step: does it mention an entity last seen at least ``gap`` steps earlier?"""
    last_seen: dict[str, int] = {}
    flags = []
    for pos, step in enumerate(steps):
        ents = extract_semantic_entities(step.thought)
        flags.append(any(e in last_seen and pos - last_seen[e] >= gap for e in ents))
        for e in ents:
            last_seen[e] = pos
    return flags


def compute_metrics(
    segment: Sequence[AssistantStep],
    pattern: str,
    lexicon: Lexicon,
    *,
    reference_flags: Sequence[bool] | None = None,
    thresholds: Thresholds = DEFAULT_THRESHOLDS,
) -> SegmentMetrics:
    """Metrics for one segment.

    ``reference_flags`` is indexed by ``step_pos`` over the whole session (see
    :func:`long_range_references`); without it, long-range references are
    judged within the segment alone.
    """
    if not segment:
        raise EmptySegment("segment has no steps")
    if reference_flags is None:
        local = long_range_references(segment, thresholds.backtrack_reference_gap)
        reference_flags = {s.step_pos: f for s, f in zip(segment, local)}  # type: ignore[assignment]

    length = len(segment)
    forward = sum(1 for s in segment if s.status.strip().lower() == CONTINUE_STATUS)
    decisions = multi_alt = prunes = backtracks = 0
    for s in segment:
        if match_signal(K.DECISION_POINT, s.thought, lexicon):
            decisions += 1
            multi_alt += match_signal(K.MULTI_ALTERNATIVE, s.thought, lexicon)
            prunes += match_signal(K.PRUNE_SIGNAL, s.thought, lexicon)
        if match_signal(K.BACKTRACKING, s.thought, lexicon) or reference_flags[s.step_pos]:
            backtracks += 1

    return SegmentMetrics(
        path_length=length,
        forward_ratio=forward / length,
        branching_factor=branching_factor(multi_alt, decisions),
        backtrack_count=1 if pattern == "P3" else backtracks,
        pruning_rate=pruning_rate(prunes, decisions),
        decision_points=decisions,
        multi_alt_points=multi_alt,
        prune_points=prunes,
    )


def describe(values: Sequence[float]) -> dict[str, float]:
    """Mean, lower median and population standard deviation."""
    if not values:
        return {"mean": 0.0, "median": 0.0, "std": 0.0, "count": 0}
    return {
        "mean": statistics.fmean(values),
        "median": float(statistics.median_low(values)),
        "std": statistics.pstdev(values),
        "count": len(values),
    }


METRIC_FIELDS = {
    "L": "path_length",
    "F": "forward_ratio",
    "B": "branching_factor",
    "R": "backtrack_count",
    "P": "pruning_rate",
}


def aggregate_metrics(
    pairs: Iterable[tuple[PatternInstance, SegmentMetrics]],
) -> dict[str, dict[str, dict[str, float]]]:
    """Group by pattern and summarize each metric: ``{pattern: {metric: stats}}``."""
    grouped: dict[str, list[SegmentMetrics]] = {}
    for inst, m in pairs:
        grouped.setdefault(inst.pattern, []).append(m)
    return {
        pattern: {
            short: describe([getattr(m, attr) for m in rows]) for short, attr in METRIC_FIELDS.items()
        }
        for pattern, rows in sorted(grouped.items())
    }
