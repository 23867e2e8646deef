from __future__ import annotations

import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import SAMPLE_RECORDS, jsonl
from tracepat.model import (
    CONTEXT_RESET,
    EmptySession,
    MalformedRecord,
    NoCandidates,
    Session,
    StepRecord,
    dump_session,
    load_session,
    parse_session,
    project_assistant_steps,
    select_representative_session,
)


def test_sample_session_parses(sample_session):
    assert sample_session.n_records == 2
    assert sample_session.assistant_indices == (0,)
    assert sample_session.steps[1].result == "; CALL XREF from main"


def test_empty_input_is_empty_session_not_malformed():
    with pytest.raises(EmptySession):
        parse_session("")
    with pytest.raises(EmptySession):
        parse_session("\n\n  \n")


def test_interleaved_indices():
    recs = SAMPLE_RECORDS * 3
    s = parse_session(jsonl(recs))
    assert s.assistant_indices == (0, 2, 4)
    steps = project_assistant_steps(s)
    assert [x.step_pos for x in steps] == [0, 1, 2]


def test_projection_of_sample(sample_session):
    steps = project_assistant_steps(sample_session)
    assert len(steps) == 1
    assert steps[0].command == "pdf @sym.SetAcEntry"


def test_no_assistant_records_projects_to_empty():
    s = parse_session(jsonl([SAMPLE_RECORDS[1], {"role": "context_reset", "content": "x"}]))
    assert project_assistant_steps(s) == []


def test_malformed_line_reports_line_number():
    text = jsonl(SAMPLE_RECORDS) + "{not json\n"
    with pytest.raises(MalformedRecord) as info:
        parse_session(text)
    assert info.value.line_no == 3


def test_non_object_and_unknown_role_rejected():
    with pytest.raises(MalformedRecord):
        parse_session("[1, 2]\n")
    with pytest.raises(MalformedRecord):
        parse_session(json.dumps({"role": "narrator"}) + "\n")


def test_missing_fields_defaulted():
    s = parse_session(json.dumps({"role": "assistant", "action": "r2", "command": "i"}) + "\n" + json.dumps({"role": "tool"}))
    assert s.steps[0].thought == "" and s.steps[0].status == ""
    assert s.steps[1].result == ""


def test_context_reset_binary_id():
    reset = {"role": "context_reset", "content": "Current file being analyzed is: httpd. Continue."}
    s = parse_session(jsonl([reset] + SAMPLE_RECORDS), session_id="run1")
    assert s.steps[0].role == CONTEXT_RESET
    assert s.binary_id == "httpd"
    assert s.assistant_indices == (1,)


def test_dump_roundtrip(tmp_path, sample_session):
    path = tmp_path / "abc.jsonl"
    path.write_text(dump_session(sample_session))
    again = load_session(path)
    assert again.session_id == "abc"
    assert again.steps == sample_session.steps


def _session(sid: str, n: int) -> Session:
    recs = tuple(StepRecord(role="tool", raw_index=i, tool="r2", command="i", result="") for i in range(n))
    return Session(session_id=sid, binary_id="b", steps=recs)


def test_select_longest_complete():
    cands = [_session("a", 140), _session("b", 200), _session("c", 160)]
    chosen = select_representative_session(cands, {"a": True, "b": True, "c": True})
    assert chosen.session_id == "b"


def test_select_median_fallback():
    cands = [_session("a", 50), _session("b", 90), _session("c", 120)]
    assert select_representative_session(cands, {}).session_id == "b"


def test_select_single_complete():
    cands = [_session("a", 131), _session("b", 300), _session("c", 20)]
    chosen = select_representative_session(cands, {"a": True, "b": False, "c": True})
    assert chosen.session_id == "a"


def test_select_no_candidates():
    with pytest.raises(NoCandidates):
        select_representative_session([], {})


_record = st.one_of(
    st.fixed_dictionaries(
        {"role": st.just("assistant"), "thought": st.text(max_size=40), "action": st.just("r2"),
         "command": st.text(max_size=20), "status": st.sampled_from(["continue", "executed"])}
    ),
    st.fixed_dictionaries({"role": st.just("tool"), "tool": st.just("r2"), "result": st.text(max_size=40)}),
)


@given(st.lists(_record, min_size=1, max_size=30))
def test_parse_invariants(records):
    s = parse_session(jsonl(records))
    assert [r.raw_index for r in s.steps] == list(range(len(records)))
    idx = s.assistant_indices
    assert list(idx) == sorted(set(idx))
    assert all(s.steps[i].role == "assistant" for i in idx)
    steps = project_assistant_steps(s)
    assert len(steps) == len(idx)
    assert parse_session(dump_session(s)).steps == s.steps
