"""Session data model and JSONL trace parsing."""

from __future__ import annotations

import json
import re
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

ASSISTANT = "assistant"
TOOL = "tool"
CONTEXT_RESET = "context_reset"
ROLES = (ASSISTANT, TOOL, CONTEXT_RESET)

# Minimum record count for a session to count as complete during selection.
MIN_COMPLETE_STEPS = 130

_KNOWN_FIELDS = ("role", "thought", "action", "command", "status", "tool", "result")
_BINARY_NAME_RE = re.compile(r"Current file being analyzed is:\s*\[?([^\s\]]+?)\]?\.?(?:\s|$)")


class TraceError(Exception):
    """Base class for trace parsing errors."""


class MalformedRecord(TraceError):
    def __init__(self, line_no: int, reason: str = "") -> None:
        self.line_no = line_no
        self.reason = reason
        msg = f"malformed record at line {line_no}"
        super().__init__(f"{msg}: {reason}" if reason else msg)


class EmptySession(TraceError):
    pass


class NoCandidates(TraceError):
    pass


@dataclass(frozen=True)
class StepRecord:
    role: str
    raw_index: int
    thought: str | None = None
    action: str | None = None
    command: str | None = None
    status: str | None = None
    tool: str | None = None
    result: str | None = None
    # Unrecognised keys, kept verbatim (e.g. "type": "tool_result").
    extra: tuple[tuple[str, Any], ...] = ()

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"role": self.role}
        for key in _KNOWN_FIELDS[1:]:
            value = getattr(self, key)
            if value is not None:
                out[key] = value
        for key, value in self.extra:
            out[key] = value
        return out


@dataclass(frozen=True)
class AssistantStep:
    step_pos: int
    thought: str
    action: str
    command: str
    status: str


@dataclass(frozen=True)
class Session:
    session_id: str
    binary_id: str
    steps: tuple[StepRecord, ...]
    assistant_indices: tuple[int, ...] = field(default=())

    def __post_init__(self) -> None:
        if not self.assistant_indices:
            idx = tuple(s.raw_index for s in self.steps if s.role == ASSISTANT)
            object.__setattr__(self, "assistant_indices", idx)

    @property
    def n_records(self) -> int:
        return len(self.steps)

    @property
    def n_assistant(self) -> int:
        return len(self.assistant_indices)


def _normalize_role(value: Any) -> str | None:
    if not isinstance(value, str):
        return None
    role = re.sub(r"[\s\-]+", "_", value.strip().lower())
    if role in ROLES:
        return role
    if "reset" in role:
        return CONTEXT_RESET
    return None


def _text(value: Any) -> str | None:
    if value is None:
        return None
    return value if isinstance(value, str) else json.dumps(value, sort_keys=True)


def parse_record(obj: Mapping[str, Any], raw_index: int, line_no: int) -> StepRecord:
    if "role" not in obj:
        raise MalformedRecord(line_no, "missing role")
    role = _normalize_role(obj["role"])
    if role is None:
        raise MalformedRecord(line_no, f"unknown role {obj['role']!r}")
    values = {key: _text(obj.get(key)) for key in _KNOWN_FIELDS[1:]}
    if role == ASSISTANT:
        values["thought"] = values["thought"] or ""
        values["status"] = values["status"] or ""
    elif role == TOOL:
        values["result"] = values["result"] or ""
    extra = tuple((k, v) for k, v in obj.items() if k not in _KNOWN_FIELDS)
    return StepRecord(role=role, raw_index=raw_index, extra=extra, **values)


def _recover_binary_id(steps: Sequence[StepRecord], default: str) -> str:
    for step in steps:
        if step.role != CONTEXT_RESET:
            continue
        texts = [step.thought, step.result, step.command]
        texts += [v for _, v in step.extra if isinstance(v, str)]
        for text in texts:
            if text and (m := _BINARY_NAME_RE.search(text)):
                return m.group(1)
        break
    return default


def parse_session(lines: Iterable[str] | str | bytes, session_id: str = "session") -> Session:
    """Parse line-delimited JSON records into a :class:`Session`.

    Blank lines are skipped. Raises :class:`MalformedRecord` on the first bad
    line (1-based line number) and :class:`EmptySession` if no records remain.
    """
    if isinstance(lines, bytes):
        lines = lines.decode("utf-8")
    if isinstance(lines, str):
        lines = lines.split("\n")
    steps: list[StepRecord] = []
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedRecord(line_no, exc.msg) from None
        if not isinstance(obj, dict):
            raise MalformedRecord(line_no, "record is not an object")
        steps.append(parse_record(obj, len(steps), line_no))
    if not steps:
        raise EmptySession(f"session {session_id!r} has no records")
    return Session(
        session_id=session_id,
        binary_id=_recover_binary_id(steps, session_id),
        steps=tuple(steps),
    )


def load_session(path: str | Path) -> Session:
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        return parse_session(fh, session_id=path.stem)


def dump_session(session: Session) -> str:
    return "".join(
        json.dumps(step.to_dict(), ensure_ascii=False) + "\n" for step in session.steps
    )


def project_assistant_steps(session: Session) -> list[AssistantStep]:
    out = []
    for step in session.steps:
        if step.role != ASSISTANT:
            continue
        out.append(
            AssistantStep(
                step_pos=len(out),
                thought=step.thought or "",
                action=step.action or "",
                command=step.command or "",
                status=step.status or "",
            )
        )
    return out


def select_representative_session(
    candidates: Sequence[Session],
    complete: Mapping[str, bool],
    min_steps: int = MIN_COMPLETE_STEPS,
) -> Session:
    """Pick one session per binary from several runs.

    Complete runs with at least ``min_steps`` records win, longest first. If
    none qualify, fall back to the run whose length is the (lower) median.
    Ties always break on ``session_id``.
    """
    if not candidates:
        raise NoCandidates("no candidate sessions")
    ordered = sorted(candidates, key=lambda s: s.session_id)
    eligible = [
        s for s in ordered if complete.get(s.session_id, False) and s.n_records >= min_steps
    ]
    if eligible:
        longest = max(s.n_records for s in eligible)
        return next(s for s in eligible if s.n_records == longest)
    median = statistics.median_low([s.n_records for s in ordered])
    return next(s for s in ordered if s.n_records == median)
