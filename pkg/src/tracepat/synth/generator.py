"""Synthetic sessions with planted, labeled pattern instances."""

from __future__ import annotations

import hashlib
import json
import math
import random
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

from tracepat.detectors import PATTERNS, PatternInstance
from tracepat.lexicon import REGEX_PREFIX, Lexicon, SignalKind, default_lexicon
from tracepat.model import Session, parse_session
from tracepat.synth.oracle import StepLabel, oracle_instances

# Kinds the detectors react to; metric-only kinds may co-occur freely.
DETECTION_KINDS = frozenset(
    {
        "revisit", "multi_path", "prune",
        "path_selection", "alternative_mentioned", "contradiction_absorbed", "global_reevaluation",
        "multi_candidates", "development", "backtracking", "new_evidence", "impasse",
        "analogy", "priority", "signal_score", "partial_evidence", "justification", "select",
    }
)
CORE_FEATURES = ("analogy", "signal_score")

FILLER_BANK = (
    "The listing shows register setup in the prologue.",
    "Stack frame allocation is visible near the top of the block.",
    "The output contains a series of load and store instructions.",
    "Reading the disassembly listing block by block.",
    "The string table has many short entries.",
    "Several branches compare a register against zero.",
    "The block ends with a jump back to the loop header.",
    "Arguments are moved into registers a0 and a1.",
    "The result is stored into a local variable on the stack.",
    "The header of the binary reports a MIPS little endian target.",
    "There are calls into the C library wrappers here.",
    "Control flow is linear in this region.",
    "The loop counter is incremented by one each iteration.",
    "The returned value is compared with a constant.",
    "This region mostly shuffles data between registers.",
    "A global pointer offset is used for the load.",
    "The output is long; summarizing the relevant lines.",
    "Constants here look like flag masks.",
    "The call graph output lists many entries.",
    "Nothing unusual in this part of the listing.",
    "Noting the register usage pattern for reference.",
    "The epilogue restores saved registers.",
    "Memory is cleared with a fixed length before use.",
    "The basic block has two successors.",
)
MENTION_TEMPLATES = (
    "The listing references {tag} here.",
    "Cross reference to {tag} noted.",
    "{tag} shows up in this output.",
)
SIGNAL_TEMPLATES = ("Regarding {tag}: {phrase}.", "{phrase}, about {tag}.", "On {tag}, {phrase}.")
PLAIN_TEMPLATES = ("{phrase}.", "Noted: {phrase}.")
COMMANDS = (
    ("pdf", "pdf @ {sym}"),
    ("pd", "pd {n} @ {addr}"),
    ("pd", "pd -{n} @ {addr}"),
    ("axt", "axt @@ {sym}"),
    ("pdg", "pdg @ {sym}"),
    ("iz", "iz"),
    ("afl", "afl"),
    ("is", "is~{word}"),
    ("/a", "/a mov r0, {n}"),
    ("i", "i"),
)
BINARY_NAMES = ("httpd", "3322ip", "pptp-ondemand", "acd", "cfmd", "netctrl", "upnpd", "dhcpd")
INIT_PROMPT = (
    "Please analyze the binary file comprehensively based on user core requirements. "
    "Current file being analyzed is: {binary}. "
    "User core requirements are: identify feasible exploitation chains from untrusted input "
    "sources to final dangerous operations."
)
MAX_THOUGHT_CHARS = 480
MANIFEST_NAME = "manifest.jsonl"


class InfeasiblePlant(ValueError):
    pass


@dataclass(frozen=True)
class PlantSpec:
    pattern: str
    anchor: int
    params: Mapping[str, Any]
    entity_tag: str

    def trigger_steps(self) -> dict[int, tuple[str, ...]]:
        """Step -> signal kinds this plant places there."""
        p = self.params
        if self.pattern == "P1":
            steps = {p["start"]: ("multi_path",), p["prune"]: ("prune",)}
            if p.get("revisit") is not None:
                steps[p["revisit"]] = ("revisit",)
            return steps
        if self.pattern == "P2":
            steps = {p["start"]: ("path_selection",)}
            if p.get("reeval") is not None:
                steps[p["reeval"]] = ("global_reevaluation",)
            return steps
        if self.pattern == "P3":
            steps = {p["deferred"]: ("multi_candidates",), p["bt"]: ("backtracking",)}
            if p.get("mat") is not None:
                steps[p["mat"]] = ("development",)
            return steps
        if self.pattern == "P4":
            return {self.anchor: tuple(p["features"])}
        raise ValueError(f"unknown pattern {self.pattern!r}")

    def tagged_steps(self) -> set[int]:
        """Trigger steps whose text carries the entity tag."""
        p = self.params
        if self.pattern == "P1":
            return {p["start"]} | ({p["revisit"]} if p.get("revisit") is not None else set())
        if self.pattern == "P2":
            return {p["start"]} | ({p["reeval"]} if p.get("reeval") is not None else set())
        if self.pattern == "P3":
            return {p["deferred"], p["bt"]} | ({p["mat"]} if p.get("mat") is not None else set())
        return {self.anchor}

    def key_steps(self) -> set[int]:
        """Steps whose entity set seeds a tracked candidate; kept free of other tags."""
        p = self.params
        return {"P1": {p.get("start")}, "P2": {p.get("start")}, "P3": {p.get("deferred")}}.get(
            self.pattern, set()
        )

    def mentions(self) -> list[int]:
        return list(self.params.get("cont_positions", ())) if self.pattern == "P2" else []

    def to_dict(self) -> dict[str, Any]:
        return {
            "pattern": self.pattern,
            "anchor": self.anchor,
            "params": dict(self.params),
            "entity_tag": self.entity_tag,
        }


@dataclass
class GroundTruth:
    session_id: str
    plants: list[PlantSpec]
    expected_instances: list[PatternInstance]
    labels: list[StepLabel] = field(default_factory=list, repr=False)


def _kind_hits(text: str, lexicon: Lexicon) -> frozenset[str]:
    low = text.lower()
    hits = set()
    for kind, exprs in lexicon.entries.items():
        for expr in exprs:
            if expr.startswith(REGEX_PREFIX):
                ok = re.search(expr[len(REGEX_PREFIX):], low) is not None
            else:
                ok = expr.lower() in low
            if ok:
                hits.add(SignalKind(kind).value)
                break
    return frozenset(hits)


class PhraseBook:
    """Lexicon phrases (and neutral filler) screened for unambiguous planting."""

    def __init__(self, lexicon: Lexicon) -> None:
        self.lexicon = lexicon
        self.by_kind: dict[str, list[str]] = {}
        for kind, exprs in lexicon.entries.items():
            name = SignalKind(kind).value
            if name not in DETECTION_KINDS:
                continue
            ok = [
                e for e in exprs
                if not e.startswith(REGEX_PREFIX)
                and _kind_hits(e, lexicon) & DETECTION_KINDS == {name}
            ]
            self.by_kind[name] = ok
        self.filler = [f for f in FILLER_BANK if not _kind_hits(f, lexicon) & DETECTION_KINDS]
        self.mentions = [m for m in MENTION_TEMPLATES if not _kind_hits(m, lexicon) & DETECTION_KINDS]
        if not self.filler or not self.mentions:
            raise InfeasiblePlant("lexicon leaves no neutral filler text")

    def phrase(self, kind: str, rng: random.Random) -> str:
        options = self.by_kind.get(kind)
        if not options:
            raise InfeasiblePlant(f"no unambiguous lexicon phrase for signal {kind!r}")
        return rng.choice(options)

    def hits(self, text: str) -> frozenset[str]:
        return _kind_hits(text, self.lexicon) & DETECTION_KINDS


_PHRASEBOOKS: dict[int, PhraseBook] = {}


def _phrasebook(lexicon: Lexicon) -> PhraseBook:
    book = _PHRASEBOOKS.get(id(lexicon))
    if book is None or book.lexicon is not lexicon:
        book = _PHRASEBOOKS[id(lexicon)] = PhraseBook(lexicon)
    return book


def _command(rng: random.Random, prev: str | None, tags: Sequence[str]) -> str:
    if prev is not None and rng.random() < 0.35:
        name = prev.split()[0]
        templates = [t for n, t in COMMANDS if n == name] or [prev]
    else:
        templates = [rng.choice(COMMANDS)[1]]
    sym = rng.choice(tags) if tags and rng.random() < 0.5 else f"fcn.0000{rng.randrange(0x1000, 0xffff):04x}"
    return rng.choice(templates).format(
        sym=sym,
        addr=f"0x{rng.randrange(0x8000, 0xffff):x}",
        n=rng.choice((5, 10, 20, 30)),
        word=rng.choice(("main", "system", "recv")),
    )


def _validate(length: int, plants: Sequence[PlantSpec]) -> None:
    used: dict[int, str] = {}
    tags = set()
    for plant in plants:
        if plant.entity_tag in tags:
            raise InfeasiblePlant(f"duplicate entity tag {plant.entity_tag!r}")
        tags.add(plant.entity_tag)
        positions = list(plant.trigger_steps()) + plant.mentions()
        for pos in positions:
            if not 0 <= pos < length:
                raise InfeasiblePlant(f"{plant.pattern} position {pos} outside session of {length}")
        for pos in plant.trigger_steps():
            if pos in used:
                raise InfeasiblePlant(f"step {pos} already used by {used[pos]}")
            used[pos] = plant.entity_tag
    keys = set().union(*(p.key_steps() for p in plants)) if plants else set()
    for plant in plants:
        if keys & set(plant.mentions()):
            raise InfeasiblePlant(f"{plant.entity_tag} mentioned on a candidate-seeding step")


def generate_session(
    length: int,
    plants: Sequence[PlantSpec],
    seed: int,
    *,
    session_id: str = "synth-00000",
    lexicon: Lexicon | None = None,
) -> tuple[Session, GroundTruth]:
    """Build one session of ``length`` assistant steps with the given plants.

    Each assistant record is followed by a tool record; the session opens with
    a context-reset record carrying the initialization prompt.
    """
    lexicon = lexicon or default_lexicon()
    book = _phrasebook(lexicon)
    _validate(length, plants)
    rng = random.Random(f"{seed}:{session_id}")

    signals: dict[int, list[tuple[str, str | None]]] = {}
    mentions: dict[int, list[str]] = {}
    step_tags: dict[int, set[str]] = {}
    for plant in plants:
        tagged = plant.tagged_steps()
        for pos, kinds in plant.trigger_steps().items():
            tag = plant.entity_tag if pos in tagged else None
            for kind in kinds:
                signals.setdefault(pos, []).append((kind, tag))
            if tag:
                step_tags.setdefault(pos, set()).add(tag)
        for pos in plant.mentions():
            if plant.entity_tag not in mentions.setdefault(pos, []):
                mentions[pos].append(plant.entity_tag)
            step_tags.setdefault(pos, set()).add(plant.entity_tag)

    binary = rng.choice(BINARY_NAMES)
    records: list[dict[str, Any]] = [
        {"role": "context_reset", "content": INIT_PROMPT.format(binary=binary)}
    ]
    labels: list[StepLabel] = []
    prev_cmd = None
    for pos in range(length):
        parts = []
        placed_tags: set[str] = set()
        for kind, tag in signals.get(pos, []):
            phrase = book.phrase(kind, rng)
            if tag and tag not in placed_tags:
                parts.append(rng.choice(SIGNAL_TEMPLATES).format(tag=tag, phrase=phrase))
                placed_tags.add(tag)
            else:
                parts.append(rng.choice(PLAIN_TEMPLATES).format(phrase=phrase))
        for tag in mentions.get(pos, []):
            if tag not in placed_tags:
                parts.append(rng.choice(book.mentions).format(tag=tag))
                placed_tags.add(tag)
        parts.append(rng.choice(book.filler))
        rng.shuffle(parts)
        thought = " ".join(p if p.startswith("sym.") else p[0].upper() + p[1:] for p in parts)
        if len(thought) > MAX_THOUGHT_CHARS:
            raise InfeasiblePlant(f"step {pos} carries too many plants ({len(thought)} chars)")
        labels.append(StepLabel(kinds=book.hits(thought), entities=frozenset(step_tags.get(pos, ()))))

        cmd = _command(rng, prev_cmd, sorted(step_tags.get(pos, ())))
        prev_cmd = cmd
        last = pos == length - 1
        records.append(
            {
                "role": "assistant",
                "thought": thought,
                "action": "finish" if last else "r2",
                "command": cmd,
                "status": "complete" if last else ("continue" if rng.random() < 0.9 else "executed"),
            }
        )
        records.append(
            {
                "role": "tool",
                "type": "tool_result",
                "tool": "r2",
                "command": cmd,
                "result": f"; output of {cmd.split()[0]} ({rng.randrange(1, 400)} lines)",
            }
        )

    text = "".join(json.dumps(r) + "\n" for r in records)
    session = parse_session(text, session_id=session_id)
    expected = [
        PatternInstance(session_id=session_id, **d) for d in oracle_instances(labels)
    ]
    truth = GroundTruth(session_id=session_id, plants=list(plants), expected_instances=expected, labels=labels)
    return session, truth


# -- random plant placement --------------------------------------------------

@dataclass(frozen=True)
class PlantDistribution:
    """Mean plants per session for each pattern, plus placement options.

    ``phase`` maps a pattern to the (lo, hi) fraction of the timeline its
    anchor is drawn from. ``complementary`` names two patterns whose counts
    are split from their combined mean by a per-session uniform share.
    """

    means: Mapping[str, float]
    phase: Mapping[str, tuple[float, float]] = field(default_factory=dict)
    complementary: tuple[str, str] | None = None
    share_range: tuple[float, float] = (0.1, 0.9)

    @classmethod
    def parse(cls, spec: str, **kwargs: Any) -> PlantDistribution:
        """Parse ``p1:6,p2:19,p3:2,p4:27``."""
        means = {}
        for item in filter(None, (s.strip() for s in spec.split(","))):
            name, _, value = item.partition(":")
            pattern = name.strip().upper()
            if pattern not in PATTERNS or not value:
                raise ValueError(f"bad plant spec {item!r}")
            means[pattern] = float(value)
        return cls(means=means, **kwargs)


REFERENCE_DENSITY = PlantDistribution(means={"P1": 6.41, "P2": 18.53, "P3": 1.91, "P4": 27.03})


def _poisson(rng: random.Random, mean: float) -> int:
    if mean <= 0:
        return 0
    # Knuth for small means, normal approximation above
    if mean < 30:
        limit, k, prod = math.exp(-mean), 0, rng.random()
        while prod > limit:
            k += 1
            prod *= rng.random()
        return k
    return max(0, round(rng.gauss(mean, mean ** 0.5)))


def draw_counts(dist: PlantDistribution, rng: random.Random) -> dict[str, int]:
    counts = {p: _poisson(rng, dist.means.get(p, 0.0)) for p in PATTERNS}
    if dist.complementary:
        a, b = dist.complementary
        total = dist.means.get(a, 0.0) + dist.means.get(b, 0.0)
        share = rng.uniform(*dist.share_range)
        counts[a] = round(share * total)
        counts[b] = round((1 - share) * total)
    return counts


def _tag(pattern: str, k: int) -> str:
    return f"sym.target_{pattern.lower()}_{k:03d}"


def place_plants(
    length: int,
    counts: Mapping[str, int],
    rng: random.Random,
    phase: Mapping[str, tuple[float, float]] | None = None,
    min_span_after_prune: int = 20,
    min_p2_span: int = 10,
) -> list[PlantSpec]:
    """Randomly place non-overlapping plants; raises :class:`InfeasiblePlant`."""
    phase = phase or {}
    free = set(range(length))
    keys: set[int] = set()
    plants: list[PlantSpec] = []

    def window(pattern: str, lo: int, hi: int) -> list[int]:
        f_lo, f_hi = phase.get(pattern, (0.0, 1.0))
        a = max(lo, int(f_lo * (length - 1)))
        b = min(hi, int(f_hi * (length - 1)))
        return [s for s in range(a, b + 1) if s in free]

    def take(pos: int) -> int:
        free.discard(pos)
        return pos

    for k in range(counts.get("P3", 0)):
        for _ in range(50):
            options = window("P3", 2, length - 1)
            if not options:
                break
            bt = rng.choice(options)
            gap = rng.randint(2, 12)
            deferred = bt - gap
            if deferred < 0 or deferred not in free:
                continue
            mids = [s for s in range(deferred + 1, bt) if s in free]
            mat = rng.choice(mids) if mids and rng.random() < 0.7 else None
            take(bt), take(deferred)
            if mat is not None:
                take(mat)
            keys.add(deferred)
            plants.append(PlantSpec("P3", bt, {"deferred": deferred, "mat": mat, "bt": bt}, _tag("P3", k)))
            break
        else:
            raise InfeasiblePlant("cannot place P3 plant")

    for k in range(counts.get("P1", 0)):
        for _ in range(50):
            options = window("P1", 1, length - min_span_after_prune)
            if not options:
                break
            prune = rng.choice(options)
            start = prune - rng.randint(1, 6)
            if start < 0 or start not in free:
                continue
            take(prune), take(start)
            keys.add(start)
            plants.append(PlantSpec("P1", prune, {"start": start, "prune": prune}, _tag("P1", k)))
            break
        else:
            raise InfeasiblePlant("cannot place P1 plant")

    p2_starts = []
    for k in range(counts.get("P2", 0)):
        options = window("P2", 0, length - min_p2_span - 6)
        if not options:
            raise InfeasiblePlant("cannot place P2 plant")
        start = take(rng.choice(options))
        keys.add(start)
        p2_starts.append(start)

    for k in range(counts.get("P4", 0)):
        options = window("P4", 0, length - 1)
        if not options:
            raise InfeasiblePlant("cannot place P4 plant")
        pos = take(rng.choice(options))
        core = rng.choice(CORE_FEATURES)
        if rng.random() < 0.75:
            feats = [core, rng.choice(("select", "priority"))]
        else:
            feats = [core, "partial_evidence", "justification"]
        plants.append(PlantSpec("P4", pos, {"features": feats}, _tag("P4", k)))

    for k, start in enumerate(p2_starts):
        ends = [s for s in range(start + min_p2_span, min(length, start + min_p2_span + 6)) if s not in keys]
        if not ends:
            raise InfeasiblePlant("cannot place P2 continuations")
        last = rng.choice(ends)
        between = [s for s in range(start + 1, last) if s not in keys]
        if len(between) < 4:
            raise InfeasiblePlant("cannot place P2 continuations")
        conts = sorted(rng.sample(between, 4) + [last])
        plants.append(PlantSpec("P2", start, {"start": start, "cont_positions": conts}, _tag("P2", k)))

    plants.sort(key=lambda p: (p.anchor, p.pattern))
    return plants


@dataclass
class SynthCorpus:
    sessions: list[Session]
    truths: list[GroundTruth]
    out_dir: Path | None = None

    @property
    def expected(self) -> list[PatternInstance]:
        return [inst for t in self.truths for inst in t.expected_instances]

    def manifest_text(self) -> str:
        return "".join(json.dumps(i.to_dict(), sort_keys=True) + "\n" for i in self.expected)

    def manifest_digest(self) -> str:
        return hashlib.sha256(self.manifest_text().encode()).hexdigest()


def generate_corpus(
    n_sessions: int,
    distribution: PlantDistribution,
    seed: int,
    *,
    steps: int = 150,
    out_dir: str | Path | None = None,
    lexicon: Lexicon | None = None,
    attempts: int = 20,
) -> SynthCorpus:
    """Generate ``n_sessions`` sessions and, if ``out_dir`` is set, write them.

    Files: ``<session_id>.jsonl`` per session and ``manifest.jsonl`` with one
    expected instance per line.
    """
    from tracepat.model import dump_session

    sessions, truths = [], []
    for idx in range(n_sessions):
        sid = f"synth-{idx:05d}"
        last_err: InfeasiblePlant | None = None
        for attempt in range(attempts):
            rng = random.Random(f"{seed}:{idx}:{attempt}")
            counts = draw_counts(distribution, rng)
            try:
                plants = place_plants(steps, counts, rng, distribution.phase)
                session, truth = generate_session(steps, plants, seed, session_id=sid, lexicon=lexicon)
            except InfeasiblePlant as exc:
                last_err = exc
                continue
            break
        else:
            raise InfeasiblePlant(f"session {sid}: {last_err}")
        sessions.append(session)
        truths.append(truth)

    corpus = SynthCorpus(sessions=sessions, truths=truths)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for session in sessions:
            (out / f"{session.session_id}.jsonl").write_text(dump_session(session), encoding="utf-8")
        (out / MANIFEST_NAME).write_text(corpus.manifest_text(), encoding="utf-8")
        corpus.out_dir = out
    return corpus


def load_manifest(path: str | Path) -> list[PatternInstance]:
    rows = Path(path).read_text(encoding="utf-8").splitlines()
    return [PatternInstance.from_dict(json.loads(r)) for r in rows if r.strip()]
