"""Per-session detectors for the four reasoning patterns.

Each detector is a single forward pass over the assistant steps of one
session. Instances carry the segment bounds later used for metrics:

    P1  [multi-path step, prune step]       anchor = prune step
    P2  [selection step, last continuation] anchor = selection step
    P3  [deferred mention, backtrack step]  anchor = backtrack step
    P4  [trigger, trigger + window - 1]     anchor = trigger step
"""

from __future__ import annotations

import json
import re
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from tracepat.lexicon import (
    Lexicon,
    SignalKind as K,
    entities_overlap,
    extract_semantic_entities,
    match_signal,
)
from tracepat.model import AssistantStep, Session, project_assistant_steps

PATTERNS = ("P1", "P2", "P3", "P4")
P4_FEATURES = ("analogy", "priority", "signal_score", "partial_evidence", "justification", "select")


@dataclass(frozen=True)
class Thresholds:
    p1_min_span_after_prune: int = 20
    p2_min_continuations: int = 5
    p2_min_span: int = 10
    p3_min_gap: int = 1
    p4_min_features: int = 3
    p4_window: int = 6
    snippet_chars: int = 500
    # Steps before a backtrack that are scanned for new-evidence / impasse cues.
    p3_context_window: int = 2
    # Gap (assistant steps) after which re-mentioning an entity counts as a backtrack.
    backtrack_reference_gap: int = 10

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> Thresholds:
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown threshold(s): {', '.join(sorted(unknown))}")
        return cls(**{k: int(v) for k, v in data.items()})

    @classmethod
    def load(cls, path: str | Path) -> Thresholds:
        path = Path(path)
        text = path.read_text(encoding="utf-8")
        if path.suffix in (".yaml", ".yml"):
            import yaml

            return cls.from_mapping(yaml.safe_load(text) or {})
        return cls.from_mapping(json.loads(text))

    def to_dict(self) -> dict[str, int]:
        return asdict(self)


DEFAULT_THRESHOLDS = Thresholds()


@dataclass(frozen=True)
class PatternInstance:
    pattern: str
    session_id: str
    anchor_step: int
    start_step: int
    end_step: int
    details: Mapping[str, Any] = field(default_factory=dict)

    @property
    def key(self) -> tuple[str, str, int]:
        return (self.session_id, self.pattern, self.anchor_step)

    def to_dict(self) -> dict[str, Any]:
        details = dict(self.details)
        if "keywords" in details:
            details["keywords"] = sorted(details["keywords"])
        return {
            "session_id": self.session_id,
            "pattern": self.pattern,
            "anchor_step": self.anchor_step,
            "start_step": self.start_step,
            "end_step": self.end_step,
            "details": details,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> PatternInstance:
        details = dict(data.get("details", {}))
        if "keywords" in details:
            details["keywords"] = frozenset(details["keywords"])
        return cls(
            pattern=data["pattern"],
            session_id=data["session_id"],
            anchor_step=int(data["anchor_step"]),
            start_step=int(data["start_step"]),
            end_step=int(data["end_step"]),
            details=details,
        )


class _StepView:
    """Lazily computed per-step text features shared by the detectors."""

    __slots__ = ("thought", "_entities", "_hits", "_lexicon")

    def __init__(self, thought: str, lexicon: Lexicon) -> None:
        self.thought = thought
        self._lexicon = lexicon
        self._entities: frozenset[str] | None = None
        self._hits: dict[K, bool] = {}

    @property
    def entities(self) -> frozenset[str]:
        if self._entities is None:
            self._entities = extract_semantic_entities(self.thought)
        return self._entities

    def has(self, kind: K) -> bool:
        hit = self._hits.get(kind)
        if hit is None:
            hit = self._hits[kind] = match_signal(kind, self.thought, self._lexicon)
        return hit


def _views(steps: Sequence[AssistantStep], lexicon: Lexicon) -> list[_StepView]:
    return [_StepView(s.thought, lexicon) for s in steps]


def _snippet(text: str, th: Thresholds) -> str:
    return text[: th.snippet_chars]


def detect_p1(
    steps: Sequence[AssistantStep],
    lexicon: Lexicon,
    thresholds: Thresholds = DEFAULT_THRESHOLDS,
    session_id: str = "",
    _views_cache: list[_StepView] | None = None,
) -> list[PatternInstance]:
    """Early pruning: multi-path discussion, then a prune, never revisited."""
    views = _views_cache or _views(steps, lexicon)
    n = len(views)
    pending: list[dict[str, Any]] = []
    for i, v in enumerate(views):
        if v.has(K.REVISIT):
            kw = v.entities
            pending = [p for p in pending if not entities_overlap(kw, p["evidence_entities"])]
        if v.has(K.MULTI_PATH):
            evidence = _snippet(v.thought, thresholds)
            pending.append(
                {
                    "start_idx": i,
                    "evidence_multi": evidence,
                    "evidence_entities": extract_semantic_entities(evidence),
                    "prune_idx": None,
                }
            )
        if v.has(K.PRUNE):
            for p in reversed(pending):
                if p["prune_idx"] is None:
                    p["prune_idx"] = i
                    p["evidence_prune"] = _snippet(v.thought, thresholds)
                    break

    out = []
    for p in pending:
        prune = p["prune_idx"]
        if prune is None or n - prune < thresholds.p1_min_span_after_prune:
            continue
        out.append(
            PatternInstance(
                pattern="P1",
                session_id=session_id,
                anchor_step=prune,
                start_step=p["start_idx"],
                end_step=prune,
                details={
                    "prune_step": prune,
                    "span_after_prune": n - prune,
                    "evidence_multi": p["evidence_multi"],
                    "evidence_prune": p["evidence_prune"],
                },
            )
        )
    out.sort(key=lambda inst: (inst.start_step, inst.anchor_step))
    return out


def detect_p2(
    steps: Sequence[AssistantStep],
    lexicon: Lexicon,
    thresholds: Thresholds = DEFAULT_THRESHOLDS,
    session_id: str = "",
    _views_cache: list[_StepView] | None = None,
) -> list[PatternInstance]:
    """Path lock-in: a selected path whose entities keep recurring."""
    views = _views_cache or _views(steps, lexicon)
    paths: list[dict[str, Any]] = []
    out = []
    for i, v in enumerate(views):
        kw = v.entities
        if v.has(K.GLOBAL_REEVALUATION):
            paths = [p for p in paths if not entities_overlap(kw, p["kw"])]
        if v.has(K.PATH_SELECTION):
            paths.append(
                {
                    "start": i,
                    "kw": kw,
                    "snippet": _snippet(v.thought, thresholds),
                    "cont": 0,
                    "alt": 0,
                    "contrad": 0,
                    "last_cont": None,
                    "last_contrad": None,
                }
            )
        if kw:
            is_alt = v.has(K.ALTERNATIVE_MENTIONED)
            is_contrad = v.has(K.CONTRADICTION_ABSORBED)
            for p in paths:
                if not entities_overlap(kw, p["kw"]):
                    continue
                p["cont"] += 1
                p["last_cont"] = i
                if is_alt:
                    p["alt"] += 1
                if is_contrad:
                    p["contrad"] += 1
                    p["last_contrad"] = i
        kept = []
        for p in paths:
            end = max(x for x in (p["last_cont"], p["last_contrad"], p["start"]) if x is not None)
            span = end - p["start"]
            if p["cont"] >= thresholds.p2_min_continuations and span >= thresholds.p2_min_span:
                out.append(
                    PatternInstance(
                        pattern="P2",
                        session_id=session_id,
                        anchor_step=p["start"],
                        start_step=p["start"],
                        end_step=end,
                        details={
                            "cont_count": p["cont"],
                            "alt_count": p["alt"],
                            "contrad_count": p["contrad"],
                            "span": span,
                            "snippet": p["snippet"],
                        },
                    )
                )
            else:
                kept.append(p)
        paths = kept
    out.sort(key=lambda inst: inst.start_step)
    return out


def _context_flag(views: Sequence[_StepView], i: int, kind: K, window: int) -> bool:
    return any(views[j].has(kind) for j in range(max(0, i - window), i + 1))


def detect_p3(
    steps: Sequence[AssistantStep],
    lexicon: Lexicon,
    thresholds: Thresholds = DEFAULT_THRESHOLDS,
    session_id: str = "",
    _views_cache: list[_StepView] | None = None,
) -> list[PatternInstance]:
    """Targeted backtracking to a previously deferred candidate."""
    views = _views_cache or _views(steps, lexicon)
    deferred: list[dict[str, Any]] = []
    materialized: list[tuple[int, int]] = []  # (deferred_idx, mat_idx)
    for i, v in enumerate(views):
        kw = v.entities
        if v.has(K.MULTI_CANDIDATES):
            deferred.append(
                {"m_idx": i, "kw": kw, "snippet": _snippet(v.thought, thresholds), "bt_idx": None}
            )
        if v.has(K.DEVELOPMENT):
            for p in deferred:
                if entities_overlap(kw, p["kw"]):
                    p["mat_idx"] = i
                    materialized.append((p["m_idx"], i))
                    break
        if v.has(K.BACKTRACKING):
            # most recent earlier deferred path that shares an entity and has not
            # been returned to yet
            match = None
            for p in reversed(deferred):
                if p["m_idx"] < i and p["bt_idx"] is None and entities_overlap(kw, p["kw"]):
                    match = p
                    break
            if match is not None:
                window = thresholds.p3_context_window
                match["bt_idx"] = i
                match["bt_snippet"] = _snippet(v.thought, thresholds)
                match["new_evidence"] = _context_flag(views, i, K.NEW_EVIDENCE, window)
                match["impasse"] = _context_flag(views, i, K.IMPASSE, window)

    out = []
    for p in deferred:
        bt = p["bt_idx"]
        if bt is None or bt - p["m_idx"] < thresholds.p3_min_gap:
            continue
        mats = [m for d, m in materialized if d == p["m_idx"] and m < bt]
        out.append(
            PatternInstance(
                pattern="P3",
                session_id=session_id,
                anchor_step=bt,
                start_step=p["m_idx"],
                end_step=bt,
                details={
                    "deferred_step": p["m_idx"],
                    "mat_step": max(mats) if mats else None,
                    "bt_step": bt,
                    "span": bt - p["m_idx"],
                    "new_evidence": p["new_evidence"],
                    "impasse": p["impasse"],
                    "bt_snippet": p["bt_snippet"],
                },
            )
        )
    out.sort(key=lambda inst: inst.start_step)
    return out


_SENTENCE_RE = re.compile(r"[^.!?\n]*[.!?\n]?")


def justification_snippet(text: str, lexicon: Lexicon, limit: int = 500) -> str:
    m = lexicon.search(K.JUSTIFICATION, text)
    if m is None:
        return text[:limit]
    for sent in _SENTENCE_RE.finditer(text):
        if sent.start() <= m.start() < max(sent.end(), sent.start() + 1):
            return sent.group(0).strip()[:limit]
    return text[:limit]


def detect_p4(
    steps: Sequence[AssistantStep],
    lexicon: Lexicon,
    thresholds: Thresholds = DEFAULT_THRESHOLDS,
    session_id: str = "",
    _views_cache: list[_StepView] | None = None,
) -> list[PatternInstance]:
    """Knowledge-guided prioritization, decided per step from six text features."""
    views = _views_cache or _views(steps, lexicon)
    last = len(views) - 1
    out = []
    for i, v in enumerate(views):
        feats = {name: v.has(K(name)) for name in P4_FEATURES}
        count = sum(feats.values())
        core = feats["analogy"] or feats["signal_score"]
        decision = feats["select"] or feats["priority"]
        if not core or not (decision or count >= thresholds.p4_min_features):
            continue
        out.append(
            PatternInstance(
                pattern="P4",
                session_id=session_id,
                anchor_step=i,
                start_step=i,
                end_step=min(i + thresholds.p4_window - 1, last),
                details={
                    "feature_count": count,
                    "features": sorted(k for k, hit in feats.items() if hit),
                    "justif_snippet": justification_snippet(
                        v.thought, lexicon, thresholds.snippet_chars
                    ),
                    "keywords": v.entities,
                },
            )
        )
    return out


DETECTORS = {"P1": detect_p1, "P2": detect_p2, "P3": detect_p3, "P4": detect_p4}


def detect_steps(
    steps: Sequence[AssistantStep],
    lexicon: Lexicon,
    thresholds: Thresholds = DEFAULT_THRESHOLDS,
    session_id: str = "",
    patterns: Iterable[str] = PATTERNS,
) -> list[PatternInstance]:
    views = _views(steps, lexicon)
    found: list[PatternInstance] = []
    for name in PATTERNS:
        if name not in patterns:
            continue
        seen = set()
        for inst in DETECTORS[name](steps, lexicon, thresholds, session_id, _views_cache=views):
            if inst.anchor_step in seen:
                continue
            seen.add(inst.anchor_step)
            found.append(inst)
    found.sort(key=lambda inst: (inst.anchor_step, inst.pattern))
    return found


def detect_all(
    session: Session,
    lexicon: Lexicon,
    thresholds: Thresholds = DEFAULT_THRESHOLDS,
    patterns: Iterable[str] = PATTERNS,
) -> list[PatternInstance]:
    steps = project_assistant_steps(session)
    return detect_steps(steps, lexicon, thresholds, session.session_id, tuple(patterns))


def check_thresholds(inst: PatternInstance, thresholds: Thresholds = DEFAULT_THRESHOLDS) -> bool:
    """Whether an instance satisfies its pattern's threshold invariant."""
    d = inst.details
    if not inst.start_step <= inst.anchor_step <= inst.end_step:
        return False
    if inst.pattern == "P1":
        return d["span_after_prune"] >= thresholds.p1_min_span_after_prune
    if inst.pattern == "P2":
        return (
            d["cont_count"] >= thresholds.p2_min_continuations
            and d["span"] >= thresholds.p2_min_span
        )
    if inst.pattern == "P3":
        return d["bt_step"] - d["deferred_step"] >= thresholds.p3_min_gap
    if inst.pattern == "P4":
        return bool({"analogy", "signal_score"} & set(d["features"]))
    return False
