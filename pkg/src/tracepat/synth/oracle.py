"""Reference transcription of the four detection procedures over symbolic labels.

Works on what the generator knows by construction (which signal kinds and
entity tags each step carries) instead of on text, and deliberately shares no
code with :mod:`tracepat.detectors`.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class StepLabel:
    kinds: frozenset[str]
    entities: frozenset[str]


def oracle_p1(labels: list[StepLabel], min_span: int = 20) -> list[dict]:
    n = len(labels)
    pending = []
    for i in range(n):
        lab = labels[i]
        if "revisit" in lab.kinds:
            survivors = []
            for p in pending:
                if len(lab.entities & p["ents"]) == 0:
                    survivors.append(p)
            pending = survivors
        if "multi_path" in lab.kinds:
            pending.append({"start": i, "ents": lab.entities, "prune": None})
        if "prune" in lab.kinds:
            j = len(pending) - 1
            while j >= 0:
                if pending[j]["prune"] is None:
                    pending[j]["prune"] = i
                    break
                j -= 1
    found = []
    for p in pending:
        if p["prune"] is not None and n - p["prune"] >= min_span:
            found.append(
                {
                    "pattern": "P1",
                    "anchor_step": p["prune"],
                    "start_step": p["start"],
                    "end_step": p["prune"],
                    "details": {"prune_step": p["prune"], "span_after_prune": n - p["prune"]},
                }
            )
    return found


def oracle_p2(labels: list[StepLabel], min_cont: int = 5, min_span: int = 10) -> list[dict]:
    paths = []
    found = []
    for i in range(len(labels)):
        lab = labels[i]
        if "global_reevaluation" in lab.kinds:
            paths = [p for p in paths if not (lab.entities & p["kw"])]
        if "path_selection" in lab.kinds:
            paths.append(
                {"start": i, "kw": lab.entities, "cont": 0, "alt": 0, "contrad": 0,
                 "last_cont": -1, "last_contrad": -1}
            )
        for p in paths:
            shared = bool(lab.entities & p["kw"])
            if shared:
                p["cont"] = p["cont"] + 1
                p["last_cont"] = i
            if shared and "alternative_mentioned" in lab.kinds:
                p["alt"] = p["alt"] + 1
            if shared and "contradiction_absorbed" in lab.kinds:
                p["contrad"] = p["contrad"] + 1
                p["last_contrad"] = i
        remaining = []
        for p in paths:
            end = max(p["last_cont"], p["last_contrad"], p["start"])
            if p["cont"] >= min_cont and end - p["start"] >= min_span:
                found.append(
                    {
                        "pattern": "P2",
                        "anchor_step": p["start"],
                        "start_step": p["start"],
                        "end_step": end,
                        "details": {
                            "cont_count": p["cont"],
                            "alt_count": p["alt"],
                            "contrad_count": p["contrad"],
                            "span": end - p["start"],
                        },
                    }
                )
            else:
                remaining.append(p)
        paths = remaining
    return found


def oracle_p3(labels: list[StepLabel], min_gap: int = 1) -> list[dict]:
    deferred = []
    mats = []
    for i in range(len(labels)):
        lab = labels[i]
        if "multi_candidates" in lab.kinds:
            deferred.append({"m": i, "kw": lab.entities, "bt": None})
        if "development" in lab.kinds:
            for p in deferred:
                if lab.entities & p["kw"]:
                    mats.append((p["m"], i))
                    break
        if "backtracking" in lab.kinds:
            for p in deferred[::-1]:
                if p["m"] < i and p["bt"] is None and lab.entities & p["kw"]:
                    p["bt"] = i
                    break
    found = []
    for p in deferred:
        if p["bt"] is None or p["bt"] - p["m"] < min_gap:
            continue
        before = [m for d, m in mats if d == p["m"] and m < p["bt"]]
        found.append(
            {
                "pattern": "P3",
                "anchor_step": p["bt"],
                "start_step": p["m"],
                "end_step": p["bt"],
                "details": {
                    "deferred_step": p["m"],
                    "mat_step": max(before) if before else None,
                    "bt_step": p["bt"],
                    "span": p["bt"] - p["m"],
                },
            }
        )
    return found


def oracle_p4(labels: list[StepLabel], min_features: int = 3, window: int = 6) -> list[dict]:
    features = ("analogy", "priority", "signal_score", "partial_evidence", "justification", "select")
    found = []
    last = len(labels) - 1
    for i in range(len(labels)):
        present = [f for f in features if f in labels[i].kinds]
        core = "analogy" in present or "signal_score" in present
        decision = "select" in present or "priority" in present
        if (core and decision) or (len(present) >= min_features and core):
            found.append(
                {
                    "pattern": "P4",
                    "anchor_step": i,
                    "start_step": i,
                    "end_step": min(i + window - 1, last),
                    "details": {"feature_count": len(present), "features": present},
                }
            )
    return found


def oracle_instances(labels: list[StepLabel]) -> list[dict]:
    found = oracle_p1(labels) + oracle_p2(labels) + oracle_p3(labels) + oracle_p4(labels)
    found.sort(key=lambda d: (d["anchor_step"], d["pattern"]))
    return found
