"""Generate a synthetic corpus, analyze it, and score detections per pattern
against the generator's ground-truth manifest."""

from __future__ import annotations

import argparse
import tempfile
import time
from collections import Counter
from pathlib import Path

from tracepat.report import AnalysisOptions, build_report, emit, run_corpus, session_files
from tracepat.synth import REFERENCE_DENSITY, PlantDistribution, generate_corpus, load_manifest


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sessions", type=int, default=200)
    ap.add_argument("--steps", type=int, default=150)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--plant", default=None, help="override densities, e.g. p1:6,p2:19,p3:2,p4:27")
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", type=Path, default=None, help="keep corpus and report here")
    args = ap.parse_args()

    dist = PlantDistribution.parse(args.plant) if args.plant else REFERENCE_DENSITY
    with tempfile.TemporaryDirectory() as tmp:
        root = args.out or Path(tmp)
        t0 = time.perf_counter()
        corpus = generate_corpus(args.sessions, dist, args.seed, steps=args.steps, out_dir=root / "corpus")
        t1 = time.perf_counter()
        options = AnalysisOptions(jobs=args.jobs)
        results, _ = run_corpus(session_files(corpus.out_dir), options)
        report = build_report(results, options)
        t2 = time.perf_counter()
        if args.out:
            emit(report, "obj", root / "report")

        expected = {i.key for i in load_manifest(corpus.out_dir / "manifest.jsonl")}
        found = {i.key for r in results for i in r.instances}
        hits = expected & found
        by = lambda keys: Counter(k[1] for k in keys)
        e, f, h = by(expected), by(found), by(hits)

        print(f"generated {args.sessions} sessions in {t1 - t0:.1f}s, analyzed in {t2 - t1:.1f}s")
        print(f"{'pattern':<8}{'expected':>10}{'found':>10}{'recall':>10}{'precision':>11}")
        for p in ("P1", "P2", "P3", "P4"):
            rec = h[p] / e[p] if e[p] else float("nan")
            prec = h[p] / f[p] if f[p] else float("nan")
            print(f"{p:<8}{e[p]:>10}{f[p]:>10}{rec:>10.4f}{prec:>11.4f}")
        total_rec = len(hits) / len(expected) if expected else float("nan")
        total_prec = len(hits) / len(found) if found else float("nan")
        print(f"{'all':<8}{len(expected):>10}{len(found):>10}{total_rec:>10.4f}{total_prec:>11.4f}")
        print(f"report digest {report.digest()}")


if __name__ == "__main__":
    main()
