from __future__ import annotations

import csv
import json
import math

import pytest

from conftest import session_text
from tracepat.cli import main
from tracepat.report import SECTIONS, AnalysisOptions, CorpusReport, analyze, emit, load_report, sig


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus")
    assert main(["synth", "--sessions", "12", "--steps", "120", "--seed", "5", "--out", str(out)]) == 0
    return out


def test_synth_writes_sessions_and_manifest(corpus):
    files = sorted(p.name for p in corpus.iterdir())
    assert "manifest.jsonl" in files
    assert len([f for f in files if f.startswith("synth-")]) == 12


def test_analyze_obj_roundtrip(corpus, tmp_path):
    assert main(["analyze", str(corpus), "--out", str(tmp_path)]) == 0
    report = load_report(tmp_path / "report.json")
    assert set(SECTIONS) <= set(report.to_dict())
    again = CorpusReport.from_dict(json.loads(report.to_json()))
    assert again == report and again.to_json() == (tmp_path / "report.json").read_text()
    meta = report.run_metadata
    assert meta["sessions"] == 12 and meta["total_steps"] == 12 * (1 + 2 * 120)
    assert len(report.prevalence_density) == 4


def test_total_steps_is_record_count(corpus):
    from tracepat.model import load_session
    from tracepat.report import session_files

    report = analyze(corpus)
    assert report.run_metadata["total_steps"] == sum(load_session(p).n_records for p in session_files(corpus))


def test_csv_tables(corpus, tmp_path):
    assert main(["analyze", str(corpus), "--out", str(tmp_path), "--format", "csv"]) == 0
    for section in SECTIONS:
        with open(tmp_path / f"{section}.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows[0], section
    with open(tmp_path / "prevalence_density.csv") as fh:
        assert len(list(csv.reader(fh))) == 5


def test_summary_lists_sections(corpus, capsys):
    assert main(["analyze", str(corpus), "--format", "summary"]) == 0
    out = capsys.readouterr().out
    for section in SECTIONS:
        assert f"== {section.replace('_', ' ')} ==" in out


def test_deterministic_across_jobs(corpus, tmp_path):
    assert main(["analyze", str(corpus), "--out", str(tmp_path / "a"), "--jobs", "1"]) == 0
    assert main(["analyze", str(corpus), "--out", str(tmp_path / "b"), "--jobs", "3"]) == 0
    assert (tmp_path / "a" / "report.json").read_bytes() == (tmp_path / "b" / "report.json").read_bytes()


def test_report_consistency(corpus):
    report = analyze(corpus)
    trans = {(r["from"], r["to"]): r["count"] for r in report.transitions}
    pairs = {tuple(r["sequence"].split(" -> ")): r["frequency"] for r in report.subsequences if r["length"] == 2}
    assert all(trans[k] == v for k, v in pairs.items())
    assert abs(sum(r["proportion"] for r in report.transitions) - 1) < 1e-4
    for row in report.temporal_histogram:
        total = sum(v for k, v in row.items() if k.startswith("bin_"))
        assert total == 0 or abs(total - 1) < 1e-4


def test_empty_synth_corpus(tmp_path):
    out = tmp_path / "c"
    assert main(["synth", "--sessions", "3", "--plant", "p1:0,p2:0,p3:0,p4:0", "--seed", "1", "--out", str(out)]) == 0
    assert main(["analyze", str(out), "--out", str(tmp_path / "r")]) == 0
    report = load_report(tmp_path / "r" / "report.json")
    assert report.transitions == [] and report.subsequences == []
    assert all(r["total"] == 0 for r in report.prevalence_density)
    assert all(v is None for row in report.correlation_matrix for k, v in row.items() if k not in ("pattern", row["pattern"]))


def test_parse_failure_exit_code(tmp_path, capsys):
    (tmp_path / "good.jsonl").write_text(session_text(["A dangerous sink, let me check it."]))
    (tmp_path / "bad.jsonl").write_text("{oops\n")
    assert main(["analyze", str(tmp_path)]) == 2
    assert "bad.jsonl" in capsys.readouterr().err
    assert main(["analyze", str(tmp_path), "--skip-bad", "--out", str(tmp_path / "r")]) == 0
    report = load_report(tmp_path / "r" / "report.json")
    assert report.run_metadata["sessions"] == 1
    assert report.run_metadata["skipped_files"][0].startswith("bad.jsonl")


def test_usage_errors(tmp_path):
    assert main(["analyze", str(tmp_path / "missing")]) == 1
    assert main(["analyze", str(tmp_path)]) == 1  # no session files
    with pytest.raises(SystemExit) as info:
        main(["analyze"])
    assert info.value.code == 1
    (tmp_path / "s.jsonl").write_text(session_text(["x"]))
    assert main(["analyze", str(tmp_path), "--patterns", "p9"]) == 1
    assert main(["synth", "--sessions", "1", "--plant", "p7:1", "--out", str(tmp_path / "o")]) == 1


def test_invariant_violation_exit_code(tmp_path):
    (tmp_path / "s.jsonl").write_text(session_text(["A dangerous sink, let me check it."]))
    th = tmp_path / "th.json"
    th.write_text(json.dumps({"p4_window": 0}))
    assert main(["analyze", str(tmp_path), "--thresholds", str(th)]) == 3


def test_patterns_and_thresholds_options(corpus, tmp_path):
    th = tmp_path / "th.yaml"
    th.write_text("p1_min_span_after_prune: 200\n")
    assert main(["analyze", str(corpus), "--patterns", "p1,p4", "--thresholds", str(th), "--out", str(tmp_path)]) == 0
    report = load_report(tmp_path / "report.json")
    assert [r["pattern"] for r in report.prevalence_density] == ["P1", "P4"]
    assert report.prevalence_density[0]["total"] == 0
    assert report.run_metadata["thresholds"]["p1_min_span_after_prune"] == 200


def test_unwritable_output(corpus, tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["analyze", str(corpus), "--out", str(blocker / "sub")]) == 1
    from tracepat.report import UnwritableOutput

    with pytest.raises(UnwritableOutput):
        emit(analyze(corpus), "obj", blocker / "sub")


def test_graph_export(corpus, tmp_path, capsys):
    path = corpus / "synth-00000.jsonl"
    assert main(["graph-export", str(path)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines and all(len(line.split("\t")) == 3 for line in lines)
    assert sum(int(line.split("\t")[2]) for line in lines) == 119
    out = tmp_path / "edges.tsv"
    assert main(["graph-export", str(path), "--pattern", "p4", "--index", "0", "--out", str(out)]) == 0
    assert out.read_text().count("\n") >= 1
    assert main(["graph-export", str(path), "--pattern", "p4", "--index", "999"]) == 1


def test_sig_rounding():
    assert sig(2 / 3) == 0.666667
    assert sig(float("nan")) is None
    assert sig(123456789.0) == 123457000.0
    assert not math.isnan(sig(0.0))
