"""Sweep the share range of complementary P2/P4 plants and report the
recovered correlation of normalized per-session counts."""

from __future__ import annotations

import argparse
import tempfile
from pathlib import Path

from tracepat.analytics import normalized_correlations, per_session_counts
from tracepat.report import AnalysisOptions, run_corpus, session_files
from tracepat.synth import REFERENCE_DENSITY, PlantDistribution, generate_corpus


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sessions", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    print(f"{'share range':<14}{'r(P2,P4)':>10}")
    for lo in (0.45, 0.4, 0.3, 0.2, 0.1):
        dist = PlantDistribution(
            means=dict(REFERENCE_DENSITY.means), complementary=("P2", "P4"), share_range=(lo, 1 - lo)
        )
        with tempfile.TemporaryDirectory() as tmp:
            corpus = generate_corpus(args.sessions, dist, args.seed, out_dir=Path(tmp))
            results, _ = run_corpus(session_files(corpus.out_dir), AnalysisOptions())
        counts = per_session_counts(i for r in results for i in r.instances)
        r = normalized_correlations(counts)["P2"]["P4"]
        print(f"{lo:.2f}-{1 - lo:.2f}{'':<5}{r:>10.3f}")


if __name__ == "__main__":
    main()
