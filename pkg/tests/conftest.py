from __future__ import annotations

import json

import pytest

from tracepat.lexicon import default_lexicon
from tracepat.model import AssistantStep, parse_session

SAMPLE_RECORDS = [
    {
        "role": "assistant",
        "thought": "Let me disassemble the handler to see what it does.",
        "action": "r2",
        "command": "pdf @sym.SetAcEntry",
        "status": "continue",
    },
    {"role": "tool", "tool": "r2", "command": "pdf @sym.SetAcEntry", "result": "; CALL XREF from main"},
]


def steps_from(thoughts, commands=None, statuses=None) -> list[AssistantStep]:
    n = len(thoughts)
    commands = commands or ["pd 10"] * n
    statuses = statuses or ["continue"] * n
    return [
        AssistantStep(step_pos=i, thought=t, action="r2", command=c, status=s)
        for i, (t, c, s) in enumerate(zip(thoughts, commands, statuses))
    ]


def jsonl(records) -> str:
    return "".join(json.dumps(r) + "\n" for r in records)


def session_text(thoughts, commands=None) -> str:
    records = []
    for i, t in enumerate(thoughts):
        cmd = commands[i] if commands else "pd 10"
        records.append({"role": "assistant", "thought": t, "action": "r2", "command": cmd, "status": "continue"})
        records.append({"role": "tool", "tool": "r2", "command": cmd, "result": "ok"})
    return jsonl(records)


@pytest.fixture(scope="session")
def lexicon():
    return default_lexicon()


@pytest.fixture
def sample_session():
    return parse_session(jsonl(SAMPLE_RECORDS), session_id="sample")
