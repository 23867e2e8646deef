"""Recompute the derived columns of the reference prevalence, transition and
dataset tables from their raw counts using the toolkit's own functions."""

from __future__ import annotations

from tracepat.analytics import PrevalenceDensity, per_session_total_distribution, transition_counts

PREVALENCE = [
    # pattern, total instances, sessions, active sessions, printed (avg/session, avg/active, coverage %)
    ("P1", 3339, 521, 435, (6.41, 7.68, 83.5)),
    ("P3", 995, 521, 489, (1.91, 2.03, 93.8)),
]

TRANSITIONS = {
    ("P2", "P1"): (1947, 0.400),
    ("P1", "P2"): (1918, 0.394),
    ("P3", "P4"): (492, 0.101),
    ("P4", "P2"): (467, 0.096),
    ("P4", "P1"): (40, 0.008),
    ("P3", "P2"): (1, 0.000),
}


def main() -> None:
    print("prevalence / density")
    for pattern, total, sessions, active, printed in PREVALENCE:
        row = PrevalenceDensity(pattern, active, sessions, total, 0)
        print(
            f"  {pattern}: avg/session {row.avg_per_session:.4f} (printed {printed[0]}), "
            f"avg/active {row.avg_per_active:.4f} (printed {printed[1]}), "
            f"coverage {100 * row.coverage:.3f}% (printed {printed[2]}%)"
        )

    print("transitions")
    seqs = [list(pair) for pair, (k, _) in TRANSITIONS.items() for _ in range(k)]
    table = transition_counts(seqs)
    for pair, v in table.items():
        printed = TRANSITIONS[pair][1]
        flag = "ok" if round(v["proportion"], 3) == printed else "MISMATCH"
        print(f"  {pair[0]} -> {pair[1]}: {v['count']:>5} {v['proportion']:.5f} (printed {printed:.3f}) {flag}")
    print(f"  total {sum(v['count'] for v in table.values())}")

    print("dataset")
    print(f"  mean steps 99563/521 = {99563 / 521:.2f} (printed 191.1)")
    bands = per_session_total_distribution([75] * 188 + [0] * (521 - 188))
    print(f"  188 of 521 sessions in 51-100: {bands[4]['percentage']:.2f}% (printed 36.08%)")


if __name__ == "__main__":
    main()
