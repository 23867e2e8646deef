"""Corpus-level analytics: prevalence, block transitions, subsequences,
phase histograms and normalized-count correlations."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from tracepat.detectors import PATTERNS, PatternInstance

N_BINS = 10
TOTAL_BANDS = (
    ("0", 0, 0),
    ("1-10", 1, 10),
    ("11-30", 11, 30),
    ("31-50", 31, 50),
    ("51-100", 51, 100),
    ("101-200", 101, 200),
    ("201+", 201, math.inf),
)


class DegenerateInput(ValueError):
    pass


@dataclass(frozen=True)
class PrevalenceDensity:
    pattern: str
    sessions_with: int
    total_sessions: int
    total: int
    max_per_session: int

    @property
    def coverage(self) -> float:
        return self.sessions_with / self.total_sessions

    @property
    def avg_per_session(self) -> float:
        return self.total / self.total_sessions

    @property
    def avg_per_active(self) -> float:
        return self.total / self.sessions_with if self.sessions_with else 0.0


def per_session_counts(instances: Iterable[PatternInstance]) -> dict[str, Counter]:
    counts: dict[str, Counter] = {}
    for inst in instances:
        counts.setdefault(inst.session_id, Counter())[inst.pattern] += 1
    return counts


def prevalence_density(
    instances: Iterable[PatternInstance],
    total_sessions: int,
    patterns: Sequence[str] = PATTERNS,
) -> dict[str, PrevalenceDensity]:
    if total_sessions < 1:
        raise ValueError("total_sessions must be >= 1")
    counts = per_session_counts(instances)
    out = {}
    for p in patterns:
        per = [c[p] for c in counts.values() if c[p] > 0]
        out[p] = PrevalenceDensity(
            pattern=p,
            sessions_with=len(per),
            total_sessions=total_sessions,
            total=sum(per),
            max_per_session=max(per, default=0),
        )
    return out


def order_instances(instances: Iterable[PatternInstance]) -> list[PatternInstance]:
    return sorted(instances, key=lambda i: (i.anchor_step, i.pattern))


def collapse_blocks(patterns: Iterable[str]) -> list[str]:
    """Collapse runs of identical labels: P2 P2 P1 P1 P2 -> P2 P1 P2."""
    blocks: list[str] = []
    for p in patterns:
        if not blocks or blocks[-1] != p:
            blocks.append(p)
    return blocks


def block_sequences(instances: Iterable[PatternInstance]) -> dict[str, list[str]]:
    by_session: dict[str, list[PatternInstance]] = {}
    for inst in instances:
        by_session.setdefault(inst.session_id, []).append(inst)
    return {
        sid: collapse_blocks(i.pattern for i in order_instances(rows))
        for sid, rows in sorted(by_session.items())
    }


def window_counts(sequences: Iterable[Sequence[str]], length: int) -> Counter:
    counts: Counter = Counter()
    for seq in sequences:
        for i in range(len(seq) - length + 1):
            counts[tuple(seq[i : i + length])] += 1
    return counts


def transition_counts(sequences: Iterable[Sequence[str]]) -> dict[tuple[str, str], dict[str, float]]:
    counts = window_counts(sequences, 2)
    total = sum(counts.values())
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return {pair: {"count": c, "proportion": c / total} for pair, c in ranked}


def mine_subsequences(
    sequences: Iterable[Sequence[str]],
    lengths: Iterable[int] = (2, 3, 4),
    top: int | None = None,
) -> list[tuple[tuple[str, ...], int]]:
    sequences = [list(s) for s in sequences]
    counts: Counter = Counter()
    for n in lengths:
        counts.update(window_counts(sequences, n))
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return ranked[:top] if top is not None else ranked


def phase_bin(anchor: int, n_steps: int, bins: int = N_BINS) -> int:
    t = anchor / (n_steps - 1) if n_steps > 1 else 0.0
    return min(int(math.floor(bins * t)), bins - 1)


def temporal_histogram(
    instances: Iterable[PatternInstance],
    session_lengths: Mapping[str, int],
    patterns: Sequence[str] = PATTERNS,
    bins: int = N_BINS,
) -> dict[str, list[float]]:
    """Row-normalized distribution of anchors over phase bins.

    ``session_lengths`` maps session id to its number of assistant steps.
    """
    raw = {p: [0] * bins for p in patterns}
    for inst in instances:
        if inst.pattern in raw:
            raw[inst.pattern][phase_bin(inst.anchor_step, session_lengths[inst.session_id], bins)] += 1
    out = {}
    for p, row in raw.items():
        total = sum(row)
        out[p] = [c / total for c in row] if total else [0.0] * bins
    return out


def _pearson(x: Sequence[float], y: Sequence[float]) -> float:
    if min(x) == max(x) or min(y) == max(y):
        return math.nan  # constant column; the float mean may not be exact
    n = len(x)
    mx, my = sum(x) / n, sum(y) / n
    sxy = sum((a - mx) * (b - my) for a, b in zip(x, y))
    sxx = sum((a - mx) ** 2 for a in x)
    syy = sum((b - my) ** 2 for b in y)
    r = sxy / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def normalized_counts(
    counts: Mapping[str, Mapping[str, int]], patterns: Sequence[str] = PATTERNS
) -> dict[str, list[float]]:
    """Per-pattern vectors of count share, over sessions with any instances."""
    out: dict[str, list[float]] = {p: [] for p in patterns}
    for sid in sorted(counts):
        c = counts[sid]
        total = sum(c.get(p, 0) for p in patterns)
        if total == 0:
            continue
        for p in patterns:
            out[p].append(c.get(p, 0) / total)
    return out


def normalized_correlations(
    counts: Mapping[str, Mapping[str, int]], patterns: Sequence[str] = PATTERNS
) -> dict[str, dict[str, float]]:
    """Pearson correlation matrix of per-session normalized pattern counts.

    Pairs involving a constant column are NaN. Raises :class:`DegenerateInput`
    with fewer than two usable sessions.
    """
    vecs = normalized_counts(counts, patterns)
    if len(vecs[patterns[0]]) < 2:
        raise DegenerateInput("need at least two sessions with nonzero pattern counts")
    matrix: dict[str, dict[str, float]] = {p: {} for p in patterns}
    for i, a in enumerate(patterns):
        matrix[a][a] = 1.0
        for b in patterns[i + 1 :]:
            r = _pearson(vecs[a], vecs[b])
            matrix[a][b] = matrix[b][a] = r
    return matrix


def per_session_total_distribution(
    totals: Iterable[int],
) -> list[dict[str, float]]:
    """Bucket per-session instance totals into the reporting bands."""
    totals = list(totals)
    n = len(totals)
    rows = []
    for label, lo, hi in TOTAL_BANDS:
        k = sum(1 for t in totals if lo <= t <= hi)
        rows.append({"band": label, "sessions": k, "percentage": 100.0 * k / n if n else 0.0})
    return rows
