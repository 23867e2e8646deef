"""Text-signal lexicon and semantic entity extraction.

A lexicon maps every :class:`SignalKind` to a list of expressions. Plain
entries match as case-insensitive substrings; entries prefixed with ``re:``
are regular expressions applied to the lowercased text.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

REGEX_PREFIX = "re:"

EntitySet = frozenset  # of normalized entity strings


class SignalKind(str, Enum):
    REVISIT = "revisit"
    MULTI_PATH = "multi_path"
    PRUNE = "prune"
    PATH_SELECTION = "path_selection"
    CONTINUATION_CONTEXT = "continuation_context"
    ALTERNATIVE_MENTIONED = "alternative_mentioned"
    CONTRADICTION_ABSORBED = "contradiction_absorbed"
    GLOBAL_REEVALUATION = "global_reevaluation"
    MULTI_CANDIDATES = "multi_candidates"
    DEVELOPMENT = "development"
    BACKTRACKING = "backtracking"
    NEW_EVIDENCE = "new_evidence"
    IMPASSE = "impasse"
    ANALOGY = "analogy"
    PRIORITY = "priority"
    SIGNAL_SCORE = "signal_score"
    PARTIAL_EVIDENCE = "partial_evidence"
    JUSTIFICATION = "justification"
    SELECT = "select"
    DECISION_POINT = "decision_point"
    PRUNE_SIGNAL = "prune_signal"
    MULTI_ALTERNATIVE = "multi_alternative"


class LexiconError(ValueError):
    pass


class UnknownSignal(KeyError):
    pass


def compile_expression(expr: str) -> re.Pattern[str]:
    if expr.startswith(REGEX_PREFIX):
        return re.compile(expr[len(REGEX_PREFIX):])
    return re.compile(re.escape(expr.lower()))


@dataclass(frozen=True)
class Lexicon:
    entries: Mapping[SignalKind, tuple[str, ...]]
    version: str = "custom"

    def __post_init__(self) -> None:
        compiled = {}
        for kind in SignalKind:
            exprs = self.entries.get(kind, ())
            if not exprs:
                raise LexiconError(f"signal kind {kind.value!r} has no entries")
            try:
                compiled[kind] = tuple(compile_expression(e) for e in exprs)
            except re.error as exc:
                raise LexiconError(f"bad expression for {kind.value!r}: {exc}") from None
        object.__setattr__(self, "_compiled", compiled)

    @classmethod
    def from_mapping(cls, data: Mapping, version: str | None = None) -> Lexicon:
        raw = data.get("entries", data)
        entries = {}
        for name, exprs in raw.items():
            try:
                kind = SignalKind(name)
            except ValueError:
                raise LexiconError(f"unknown signal kind {name!r}") from None
            if isinstance(exprs, str):
                exprs = [exprs]
            entries[kind] = tuple(str(e) for e in exprs)
        return cls(entries=entries, version=version or str(data.get("version", "custom")))

    def patterns(self, kind: SignalKind) -> tuple[re.Pattern[str], ...]:
        try:
            return self._compiled[SignalKind(kind)]  # type: ignore[attr-defined]
        except (KeyError, ValueError):
            raise UnknownSignal(kind) from None

    def search(self, kind: SignalKind, text: str) -> re.Match[str] | None:
        lowered = text.lower()
        for pat in self.patterns(kind):
            if m := pat.search(lowered):
                return m
        return None

    def to_mapping(self) -> dict:
        return {
            "version": self.version,
            "entries": {k.value: list(self.entries[k]) for k in SignalKind},
        }


def load_lexicon(path: str | Path) -> Lexicon:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix in (".yaml", ".yml"):
        import yaml

        data = yaml.safe_load(text)
    else:
        data = json.loads(text)
    if not isinstance(data, Mapping):
        raise LexiconError(f"{path}: expected a mapping of kind -> phrases")
    return Lexicon.from_mapping(data)


@lru_cache(maxsize=1)
def default_lexicon() -> Lexicon:
    text = resources.files("tracepat.data").joinpath("default_lexicon.json").read_text("utf-8")
    return Lexicon.from_mapping(json.loads(text))


def match_signal(kind: SignalKind, text: str, lexicon: Lexicon) -> bool:
    """True iff any expression for ``kind`` occurs in ``text`` (case-insensitive)."""
    if not text:
        lexicon.patterns(kind)
        return False
    return lexicon.search(kind, text) is not None


def matched_kinds(text: str, lexicon: Lexicon, kinds: Iterable[SignalKind] = SignalKind) -> frozenset[SignalKind]:
    return frozenset(k for k in kinds if match_signal(k, text, lexicon))


# -- semantic entities -------------------------------------------------------

_HEX_RE = re.compile(r"\b0[xX][0-9a-fA-F]+\b")
_DOTTED_RE = re.compile(r"\b(?:sym|fcn|imp|reloc|loc)\.\w+(?:\.\w+)*", re.IGNORECASE)
_IDENT_RE = re.compile(r"\b[A-Za-z_][A-Za-z0-9_]{3,}\b")
_CAMEL_RE = re.compile(r"[a-z][A-Z]")

CALLABLE_SUFFIXES = (
    "cmd", "func", "handler", "entry", "callback", "proc", "cpy", "cat",
    "printf", "scanf", "exec", "system", "value", "_cb", "_fn",
)
_NOT_IDENTIFIERS = frozenset({"function", "functions", "this", "that", "with", "from", "which"})


def _looks_like_code(token: str) -> bool:
    return "_" in token or any(c.isdigit() for c in token) or bool(_CAMEL_RE.search(token))


def _has_callable_suffix(token: str) -> bool:
    low = token.lower()
    return any(low.endswith(s) and len(low) > len(s) for s in CALLABLE_SUFFIXES)


def extract_semantic_entities(text: str) -> frozenset[str]:
    """Pull addresses, radare2-style symbols and function identifiers from text.

    Hex literals and dotted symbols (``sym.``, ``fcn.``, ``imp.``, ``reloc.``,
    ``loc.``) are taken verbatim; bare identifiers need a callable-looking
    suffix, a following ``(``, or to sit next to the word "function" while
    looking like code. Everything is lowercased.
    """
    if not text:
        return frozenset()
    found: set[str] = set()
    blanked = text
    for rx in (_DOTTED_RE, _HEX_RE):
        for m in rx.finditer(blanked):
            found.add(m.group(0).lower())
        blanked = rx.sub(lambda m: " " * len(m.group(0)), blanked)

    tokens = list(_IDENT_RE.finditer(blanked))
    words = re.findall(r"\S+", blanked.lower())
    fn_neighbours: set[str] = set()
    for i, w in enumerate(words):
        if w.strip(".,;:()'\"") in ("function", "functions"):
            for j in (i - 1, i + 1):
                if 0 <= j < len(words):
                    fn_neighbours.add(words[j].strip(".,;:()'\"`"))
    for m in tokens:
        tok = m.group(0)
        low = tok.lower()
        if low in _NOT_IDENTIFIERS:
            continue
        called = blanked[m.end():m.end() + 1] == "("
        near_fn = low in fn_neighbours and _looks_like_code(tok)
        if _has_callable_suffix(tok) or called or near_fn:
            found.add(low)
    return frozenset(found)


def entities_overlap(a: Iterable[str], b: Iterable[str]) -> bool:
    a, b = set(a), set(b)
    return bool(a & b)
