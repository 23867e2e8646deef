"""Command-line entry point: ``analyze``, ``synth`` and ``graph-export``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from tracepat import __version__
from tracepat.detectors import PATTERNS, Thresholds, detect_all
from tracepat.lexicon import LexiconError, default_lexicon, load_lexicon
from tracepat.model import TraceError, load_session, project_assistant_steps
from tracepat.report import (
    AnalysisOptions,
    CorpusParseError,
    InvariantViolation,
    UnwritableOutput,
    build_report,
    emit,
    run_corpus,
    session_files,
    summary_text,
)
from tracepat.topology import build_graph, format_edge_list

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_PARSE = 2
EXIT_INVARIANT = 3

log = logging.getLogger("tracepat")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # argparse would exit 2, which means parse failure here
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def parse_patterns(text: str) -> tuple[str, ...]:
    chosen = []
    for item in filter(None, (s.strip().upper() for s in text.split(","))):
        if item not in PATTERNS:
            raise UsageError(f"unknown pattern {item!r}; expected some of {','.join(PATTERNS)}")
        if item not in chosen:
            chosen.append(item)
    if not chosen:
        raise UsageError("empty pattern list")
    return tuple(p for p in PATTERNS if p in chosen)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="tracepat", description="Detect and summarize reasoning patterns in agent session traces.")
    ap.add_argument("--version", action="version", version=f"tracepat {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    a = sub.add_parser("analyze", help="run the full pipeline over a directory of .jsonl sessions")
    a.add_argument("corpus", type=Path, metavar="DIR")
    a.add_argument("--out", type=Path, default=None, help="output directory (default: summary to stdout)")
    a.add_argument("--format", choices=("obj", "csv", "summary"), default="obj")
    a.add_argument("--lexicon", type=Path, default=None, help="JSON or YAML lexicon file")
    a.add_argument("--patterns", default="p1,p2,p3,p4")
    a.add_argument("--jobs", type=int, default=1)
    a.add_argument("--skip-bad", action="store_true", help="warn about unparsable files instead of failing")
    a.add_argument("--thresholds", type=Path, default=None, help="JSON or YAML threshold overrides")
    a.add_argument("--top", type=int, default=10, help="number of subsequences to report")

    s = sub.add_parser("synth", help="generate a synthetic corpus with a ground-truth manifest")
    s.add_argument("--sessions", type=int, required=True)
    s.add_argument("--steps", type=int, default=150)
    s.add_argument("--plant", default="p1:6.41,p2:18.53,p3:1.91,p4:27.03",
                   help="mean plants per session, e.g. p1:6,p2:19,p3:2,p4:27")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", type=Path, required=True)
    s.add_argument("--complementary", default=None, metavar="PA,PB",
                   help="split the combined mean of two patterns by a random per-session share")
    s.add_argument("--lexicon", type=Path, default=None)

    g = sub.add_parser("graph-export", help="write a command-transition edge list")
    g.add_argument("session", type=Path, metavar="FILE")
    g.add_argument("--pattern", default=None, help="restrict to the segment of one instance of this pattern")
    g.add_argument("--index", type=int, default=0, help="which instance of --pattern (0-based)")
    g.add_argument("--lexicon", type=Path, default=None)
    g.add_argument("--out", type=Path, default=None)
    return ap


def _lexicon(path: Path | None):
    if path is None:
        return default_lexicon()
    try:
        return load_lexicon(path)
    except (OSError, LexiconError) as exc:
        raise UsageError(f"cannot load lexicon {path}: {exc}") from exc


def _thresholds(path: Path | None) -> Thresholds:
    if path is None:
        return Thresholds()
    try:
        return Thresholds.load(path)
    except (OSError, ValueError, TypeError) as exc:
        raise UsageError(f"cannot load thresholds {path}: {exc}") from exc


def cmd_analyze(args: argparse.Namespace) -> int:
    if not args.corpus.is_dir():
        raise UsageError(f"not a directory: {args.corpus}")
    if args.jobs < 1 or args.top < 1:
        raise UsageError("--jobs and --top must be >= 1")
    paths = session_files(args.corpus)
    if not paths:
        raise UsageError(f"no .jsonl session files in {args.corpus}")
    options = AnalysisOptions(
        lexicon=_lexicon(args.lexicon),
        thresholds=_thresholds(args.thresholds),
        patterns=parse_patterns(args.patterns),
        jobs=args.jobs,
        skip_bad=args.skip_bad,
        top_k=args.top,
    )
    try:
        results, skipped = run_corpus(paths, options)
    except CorpusParseError as exc:
        for line in exc.diagnostics:
            print(f"error: {line}", file=sys.stderr)
        return EXIT_PARSE
    for line in skipped:
        print(f"warning: skipped {line}", file=sys.stderr)
    report = build_report(results, options, skipped)
    if args.out is None:
        sys.stdout.write(summary_text(report) if args.format == "summary" else report.to_json())
    else:
        for path in emit(report, args.format, args.out):
            log.info("wrote %s", path)
    return EXIT_OK


def cmd_synth(args: argparse.Namespace) -> int:
    from tracepat.synth import InfeasiblePlant, PlantDistribution, generate_corpus

    if args.sessions < 0 or args.steps < 2:
        raise UsageError("--sessions must be >= 0 and --steps >= 2")
    complementary = None
    if args.complementary:
        pair = parse_patterns(args.complementary)
        if len(pair) != 2:
            raise UsageError("--complementary takes exactly two patterns")
        complementary = pair
    try:
        dist = PlantDistribution.parse(args.plant, complementary=complementary)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    try:
        corpus = generate_corpus(
            args.sessions, dist, args.seed, steps=args.steps, out_dir=args.out,
            lexicon=_lexicon(args.lexicon),
        )
    except InfeasiblePlant as exc:
        raise UsageError(f"plant densities do not fit in {args.steps} steps: {exc}") from exc
    print(f"wrote {len(corpus.sessions)} sessions and {len(corpus.expected)} expected instances to {args.out}")
    return EXIT_OK


def cmd_graph_export(args: argparse.Namespace) -> int:
    try:
        session = load_session(args.session)
    except TraceError as exc:
        print(f"error: {args.session.name}: {exc}", file=sys.stderr)
        return EXIT_PARSE
    steps = project_assistant_steps(session)
    if args.pattern is None:
        segment = steps
    else:
        (pattern,) = parse_patterns(args.pattern)
        found = [i for i in detect_all(session, _lexicon(args.lexicon), patterns=(pattern,))]
        if not 0 <= args.index < len(found):
            raise UsageError(f"{pattern} has {len(found)} instances in {session.session_id}")
        inst = found[args.index]
        segment = steps[inst.start_step : inst.end_step + 1]
    text = format_edge_list(build_graph(segment))
    if args.out is None:
        sys.stdout.write(text)
    else:
        try:
            args.out.write_text(text, encoding="utf-8")
        except OSError as exc:
            raise UnwritableOutput(str(exc)) from exc
    return EXIT_OK


COMMANDS = {"analyze": cmd_analyze, "synth": cmd_synth, "graph-export": cmd_graph_export}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, UnwritableOutput) as exc:
        print(f"tracepat: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InvariantViolation as exc:
        print(f"tracepat: invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
