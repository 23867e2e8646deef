"""Corpus pipeline and report emission (JSON, CSV, text summary)."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Sequence

from tracepat import __version__
from tracepat.analytics import (
    DegenerateInput,
    block_sequences,
    mine_subsequences,
    normalized_correlations,
    per_session_counts,
    per_session_total_distribution,
    prevalence_density,
    temporal_histogram,
    transition_counts,
)
from tracepat.detectors import (
    DEFAULT_THRESHOLDS,
    PATTERNS,
    PatternInstance,
    Thresholds,
    check_thresholds,
    detect_steps,
)
from tracepat.lexicon import Lexicon, default_lexicon
from tracepat.metrics import (
    METRIC_FIELDS,
    SegmentMetrics,
    aggregate_metrics,
    compute_metrics,
    long_range_references,
    segment_of,
)
from tracepat.model import TraceError, load_session, project_assistant_steps
from tracepat.topology import TopologyMetrics, aggregate_topology, segment_topology

log = logging.getLogger(__name__)

SIG_DIGITS = 6
SECTIONS = (
    "prevalence_density",
    "total_distribution",
    "transitions",
    "subsequences",
    "segment_metrics",
    "exploration_selection",
    "topology",
    "temporal_histogram",
    "correlation_matrix",
)


class InvariantViolation(RuntimeError):
    pass


class UnwritableOutput(OSError):
    pass


class CorpusParseError(TraceError):
    def __init__(self, diagnostics: list[str]) -> None:
        self.diagnostics = diagnostics
        super().__init__("; ".join(diagnostics))


def sig(x: float | None) -> float | None:
    """Round to the report's significant digits; NaN becomes None."""
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return None
    return float(f"{x:.{SIG_DIGITS}g}")


@dataclass(frozen=True)
class AnalysisOptions:
    lexicon: Lexicon = field(default_factory=default_lexicon)
    thresholds: Thresholds = DEFAULT_THRESHOLDS
    patterns: tuple[str, ...] = PATTERNS
    jobs: int = 1
    skip_bad: bool = False
    top_k: int = 10


@dataclass
class SessionResult:
    session_id: str
    n_records: int
    n_assistant: int
    instances: list[PatternInstance]
    metrics: list[SegmentMetrics]
    topology: list[TopologyMetrics]


def _check_metrics(inst: PatternInstance, m: SegmentMetrics) -> None:
    ok = (
        m.path_length >= 1
        and 0.0 <= m.forward_ratio <= 1.0
        and 0.0 <= m.pruning_rate <= 1.0
        and 1.0 <= m.branching_factor <= 2.5
        and m.backtrack_count >= 0
        and (inst.pattern != "P3" or m.backtrack_count == 1)
    )
    if not ok:
        raise InvariantViolation(f"metric range violated for {inst.key}: {m}")


def analyze_session(path: str | Path, options: AnalysisOptions) -> SessionResult:
    session = load_session(path)
    steps = project_assistant_steps(session)
    instances = detect_steps(
        steps, options.lexicon, options.thresholds, session.session_id, options.patterns
    )
    refs = long_range_references(steps, options.thresholds.backtrack_reference_gap)
    metrics, topo = [], []
    for inst in instances:
        if not check_thresholds(inst, options.thresholds):
            raise InvariantViolation(f"threshold invariant violated for {inst.key}")
        segment = segment_of(steps, inst)
        m = compute_metrics(
            segment, inst.pattern, options.lexicon,
            reference_flags=refs, thresholds=options.thresholds,
        )
        _check_metrics(inst, m)
        metrics.append(m)
        topo.append(segment_topology(segment))
    return SessionResult(
        session_id=session.session_id,
        n_records=session.n_records,
        n_assistant=session.n_assistant,
        instances=instances,
        metrics=metrics,
        topology=topo,
    )


def _safe_analyze(args: tuple[Path, AnalysisOptions]) -> SessionResult | str:
    path, options = args
    try:
        return analyze_session(path, options)
    except TraceError as exc:
        return f"{path.name}: {exc}"


MANIFEST_NAME = "manifest.jsonl"


def session_files(corpus_dir: str | Path) -> list[Path]:
    """Session traces in ``corpus_dir``; a synth ground-truth manifest is skipped."""
    paths = Path(corpus_dir).glob("*.jsonl")
    return sorted((p for p in paths if p.name != MANIFEST_NAME), key=lambda p: p.name)


def run_corpus(paths: Sequence[Path], options: AnalysisOptions) -> tuple[list[SessionResult], list[str]]:
    work = [(p, options) for p in paths]
    if options.jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=options.jobs) as pool:
            outcomes = list(pool.map(_safe_analyze, work, chunksize=4))
    else:
        outcomes = [_safe_analyze(w) for w in work]
    results = [o for o in outcomes if isinstance(o, SessionResult)]
    problems = [o for o in outcomes if isinstance(o, str)]
    if problems and not options.skip_bad:
        raise CorpusParseError(problems)
    for msg in problems:
        log.warning("skipping %s", msg)
    results.sort(key=lambda r: r.session_id)
    return results, problems


@dataclass
class CorpusReport:
    run_metadata: dict[str, Any]
    prevalence_density: list[dict[str, Any]]
    total_distribution: list[dict[str, Any]]
    transitions: list[dict[str, Any]]
    subsequences: list[dict[str, Any]]
    segment_metrics: list[dict[str, Any]]
    exploration_selection: list[dict[str, Any]]
    topology: list[dict[str, Any]]
    temporal_histogram: list[dict[str, Any]]
    correlation_matrix: list[dict[str, Any]]

    def to_dict(self) -> dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> CorpusReport:
        return cls(**{f.name: data[f.name] for f in fields(cls)})

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, ensure_ascii=False) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.to_json().encode("utf-8")).hexdigest()


def build_report(
    results: Sequence[SessionResult],
    options: AnalysisOptions,
    skipped: Sequence[str] = (),
) -> CorpusReport:
    patterns = options.patterns
    instances = [i for r in results for i in r.instances]
    pairs = [(i, m) for r in results for i, m in zip(r.instances, r.metrics)]
    n_sessions = len(results)
    records = [r.n_records for r in results]

    meta = {
        "toolkit_version": __version__,
        "lexicon_version": options.lexicon.version,
        "thresholds": options.thresholds.to_dict(),
        "patterns": list(patterns),
        "seed": None,
        "sessions": n_sessions,
        "total_steps": sum(records),
        "assistant_steps": sum(r.n_assistant for r in results),
        "median_steps": sig(statistics.median(records)) if records else 0,
        "mean_steps": sig(statistics.fmean(records)) if records else 0,
        "skipped_files": list(skipped),
        "total_instances": len(instances),
    }

    prevalence = []
    if n_sessions:
        for p, row in prevalence_density(instances, n_sessions, patterns).items():
            prevalence.append(
                {
                    "pattern": p,
                    "sessions_with": row.sessions_with,
                    "total_sessions": row.total_sessions,
                    "coverage": sig(row.coverage),
                    "total": row.total,
                    "avg_per_session": sig(row.avg_per_session),
                    "avg_per_active": sig(row.avg_per_active),
                    "max_per_session": row.max_per_session,
                }
            )
    else:
        prevalence = [
            {"pattern": p, "sessions_with": 0, "total_sessions": 0, "coverage": 0.0, "total": 0,
             "avg_per_session": 0.0, "avg_per_active": 0.0, "max_per_session": 0}
            for p in patterns
        ]

    counts = per_session_counts(instances)
    totals = [sum(counts.get(r.session_id, {}).values()) for r in results]
    distribution = [
        {"band": row["band"], "sessions": row["sessions"], "percentage": sig(row["percentage"])}
        for row in per_session_total_distribution(totals)
    ]

    blocks = list(block_sequences(instances).values())
    transitions = [
        {"from": a, "to": b, "count": v["count"], "proportion": sig(v["proportion"])}
        for (a, b), v in transition_counts(blocks).items()
    ]
    subsequences = [
        {"rank": k, "sequence": " -> ".join(seq), "length": len(seq), "frequency": freq}
        for k, (seq, freq) in enumerate(mine_subsequences(blocks, top=options.top_k), start=1)
    ]

    agg = aggregate_metrics(pairs)
    seg_rows, explore_rows = [], []
    for p in patterns:
        stats = agg.get(p, {})
        for short in METRIC_FIELDS:
            s = stats.get(short, {"mean": 0.0, "median": 0.0, "std": 0.0, "count": 0})
            seg_rows.append(
                {"pattern": p, "metric": short, "mean": sig(s["mean"]), "median": sig(s["median"]),
                 "std": sig(s["std"]), "count": s["count"]}
            )
        explore_rows.append(
            {"pattern": p, "B_mean": sig(stats.get("B", {}).get("mean", 0.0)),
             "P_mean": sig(stats.get("P", {}).get("mean", 0.0))}
        )

    grouped: dict[str, list[TopologyMetrics]] = {p: [] for p in patterns}
    for r in results:
        for inst, t in zip(r.instances, r.topology):
            grouped[inst.pattern].append(t)
    topo_agg = aggregate_topology(grouped)
    topo_rows = []
    for p in patterns:
        t = topo_agg.get(p)
        topo_rows.append(
            {
                "pattern": p,
                "diversity": sig(t["diversity"]) if t else 0.0,
                "length": sig(t["length"]) if t else 0.0,
                "max_depth": sig(t["max_depth"]) if t else 0.0,
                "max_fanout": sig(t["max_fanout"]) if t else 0.0,
                "cycle_pct": sig(t["cycle_pct"]) if t else 0.0,
                "transition_entropy": sig(t["transition_entropy"]) if t else 0.0,
                "count": t["count"] if t else 0,
            }
        )

    lengths = {r.session_id: r.n_assistant for r in results}
    hist = temporal_histogram(instances, lengths, patterns)
    hist_rows = [
        {"pattern": p, **{f"bin_{k + 1}": sig(v) for k, v in enumerate(hist[p])}} for p in patterns
    ]

    try:
        matrix = normalized_correlations(counts, patterns)
    except DegenerateInput:
        matrix = {a: {b: (1.0 if a == b else math.nan) for b in patterns} for a in patterns}
    corr_rows = [{"pattern": a, **{b: sig(matrix[a][b]) for b in patterns}} for a in patterns]

    return CorpusReport(
        run_metadata=meta,
        prevalence_density=prevalence,
        total_distribution=distribution,
        transitions=transitions,
        subsequences=subsequences,
        segment_metrics=seg_rows,
        exploration_selection=explore_rows,
        topology=topo_rows,
        temporal_histogram=hist_rows,
        correlation_matrix=corr_rows,
    )


def analyze(corpus_dir: str | Path, options: AnalysisOptions | None = None) -> CorpusReport:
    options = options or AnalysisOptions()
    results, skipped = run_corpus(session_files(corpus_dir), options)
    return build_report(results, options, skipped)


# -- emission ----------------------------------------------------------------

_HEADERS = {
    "prevalence_density": ["pattern", "sessions_with", "total_sessions", "coverage", "total",
                           "avg_per_session", "avg_per_active", "max_per_session"],
    "total_distribution": ["band", "sessions", "percentage"],
    "transitions": ["from", "to", "count", "proportion"],
    "subsequences": ["rank", "sequence", "length", "frequency"],
    "segment_metrics": ["pattern", "metric", "mean", "median", "std", "count"],
    "exploration_selection": ["pattern", "B_mean", "P_mean"],
    "topology": ["pattern", "diversity", "length", "max_depth", "max_fanout", "cycle_pct",
                 "transition_entropy", "count"],
}


def _headers(section: str, rows: list[dict[str, Any]]) -> list[str]:
    if section in _HEADERS:
        return _HEADERS[section]
    if rows:
        return list(rows[0].keys())
    return ["pattern"]


def section_csv(report: CorpusReport, section: str) -> str:
    rows = getattr(report, section)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=_headers(section, rows), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: ("" if v is None else v) for k, v in row.items()})
    return buf.getvalue()


def _fmt(v: Any) -> str:
    if v is None:
        return "n/a"
    if isinstance(v, float):
        return f"{v:.3f}"
    return str(v)


def summary_text(report: CorpusReport) -> str:
    meta = report.run_metadata
    lines = [
        f"tracepat {meta['toolkit_version']}  lexicon={meta['lexicon_version']}",
        f"sessions={meta['sessions']} total_steps={meta['total_steps']} "
        f"median_steps={meta['median_steps']} mean_steps={meta['mean_steps']} "
        f"instances={meta['total_instances']}",
    ]
    for section in SECTIONS:
        rows = getattr(report, section)
        lines.append("")
        lines.append(f"== {section.replace('_', ' ')} ==")
        if not rows:
            lines.append("(empty)")
            continue
        header = _headers(section, rows)
        lines.append("  ".join(header))
        for row in rows:
            lines.append("  ".join(_fmt(row.get(h)) for h in header))
    return "\n".join(lines) + "\n"


def emit(report: CorpusReport, fmt: str, out_dir: str | Path | None = None) -> list[Path]:
    """Write the report as ``obj`` (JSON), ``csv`` (one file per table) or ``summary``."""
    if out_dir is None:
        return []
    out = Path(out_dir)
    written: list[Path] = []
    try:
        out.mkdir(parents=True, exist_ok=True)
        if fmt == "obj":
            path = out / "report.json"
            path.write_text(report.to_json(), encoding="utf-8")
            written.append(path)
        elif fmt == "csv":
            for section in SECTIONS:
                path = out / f"{section}.csv"
                path.write_text(section_csv(report, section), encoding="utf-8")
                written.append(path)
            path = out / "run_metadata.json"
            path.write_text(json.dumps(report.run_metadata, indent=2, sort_keys=True) + "\n", encoding="utf-8")
            written.append(path)
        elif fmt == "summary":
            path = out / "summary.txt"
            path.write_text(summary_text(report), encoding="utf-8")
            written.append(path)
        else:
            raise ValueError(f"unknown format {fmt!r}")
    except OSError as exc:
        raise UnwritableOutput(f"cannot write report to {out}: {exc}") from exc
    return written


def load_report(path: str | Path) -> CorpusReport:
    return CorpusReport.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
