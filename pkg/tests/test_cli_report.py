from __future__ import annotations

import json
import re

import pytest

from driftwatch.cli import main
from driftwatch.monitor import Metric
from driftwatch.report import read_long_csv

HEADER = "study_id,timestamp,model_id,class_label,score\n"


@pytest.fixture(scope="module")
def paper_run(tmp_path_factory):
    d = tmp_path_factory.mktemp("paper")
    assert main(["generate", "--paper-shaped", "--seed", "42", "--out", str(d / "ev.csv"),
                 "--write-config", str(d / "cfg.json")]) == 0
    code = main(["replay", "--input", str(d / "ev.csv"), "--config", str(d / "cfg.json"),
                 "--out", str(d / "out")])
    return d, code


def test_replay_outputs(paper_run):
    d, code = paper_run
    assert code == 2
    out = d / "out"
    for name in ("readings.json", "alerts.jsonl", "report.md", "predictive.csv", "temporal.csv"):
        assert (out / name).exists()
    doc = json.loads((out / "readings.json").read_text())
    assert len(doc["windows"]) == 6
    alerts = [json.loads(line) for line in (out / "alerts.jsonl").read_text().splitlines()]
    required = {"window_label", "metric", "value", "threshold", "suspect", "severity", "timestamp"}
    assert all(required <= set(a) for a in alerts)
    assert any(a["severity"] == "CRITICAL" for a in alerts)
    assert all(a["value"] == round(a["value"], 6) for a in alerts)


def test_long_csv_round_trip(paper_run):
    d, _ = paper_run
    doc = json.loads((d / "out" / "readings.json").read_text())
    pred = [(r["window"]["label"], f"{r['model_a']} vs {r['model_b']}", r["value"])
            for r in doc["readings"] if r["metric"] == Metric.PREDICTIVE.value]
    temp = [(r["window"]["label"], r["model_a"], r["value"])
            for r in doc["readings"] if r["metric"] == Metric.TEMPORAL.value]
    assert [(w, s, v) for w, _, s, v in read_long_csv(d / "out" / "predictive.csv")] == pred
    assert [(w, s, v) for w, _, s, v in read_long_csv(d / "out" / "temporal.csv")] == temp


def test_report_fidelity(paper_run):
    d, _ = paper_run
    doc = json.loads((d / "out" / "readings.json").read_text())
    md = (d / "out" / "report.md").read_text()
    pred_section = md.split("### Predictive divergence")[1].split("Change from")[0]
    rows = [line for line in pred_section.splitlines() if line.startswith("| ") and "Time Point" not in line]
    by_window = {}
    for r in doc["readings"]:
        if r["metric"] == "PREDICTIVE":
            by_window.setdefault(r["window"]["label"], []).append(r["value"])
    assert len(rows) == 6
    for row in rows:
        cells = [c.strip() for c in row.strip("|").split("|")]
        label, values = cells[0], [float(c) for c in cells[2:]]
        assert values == [round(v, 3) for v in by_window[label]]
    temp_section = md.split("### Temporal stability")[1].split("## Alerts")[0]
    header = next(line for line in temp_section.splitlines() if line.startswith("| Model"))
    assert "Month 1-Reference" in header and "Post Covid-Month 4" in header
    assert re.search(r"\| AI2 \|.*\| 0\.\d{3} \|", temp_section)


def test_generate_is_byte_identical(tmp_path):
    for name in ("a.csv", "b.csv"):
        assert main(["generate", "--paper-shaped", "--seed", "42", "--out", str(tmp_path / name)]) == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_generate_from_spec(tmp_path):
    spec = {"seed": 1, "models": [{"id": m, "location": 0.4, "concentration": 4} for m in ("A", "B", "C")],
            "phases": [{"windows": 1, "studies_per_window": 25}]}
    (tmp_path / "spec.json").write_text(json.dumps(spec))
    assert main(["generate", "--spec", str(tmp_path / "spec.json"), "--out", str(tmp_path / "o.csv")]) == 0
    assert len((tmp_path / "o.csv").read_text().splitlines()) == 1 + 3 * 25
    spec["phases"] = []
    (tmp_path / "bad.json").write_text(json.dumps(spec))
    assert main(["generate", "--spec", str(tmp_path / "bad.json"), "--out", str(tmp_path / "x.csv")]) == 1


def test_single_window_is_bootstrap(tmp_path):
    spec = {"seed": 2, "models": [{"id": m, "location": 0.4, "concentration": 4} for m in ("AI1", "AI2")],
            "phases": [{"windows": 1, "studies_per_window": 150}]}
    (tmp_path / "spec.json").write_text(json.dumps(spec))
    main(["generate", "--spec", str(tmp_path / "spec.json"), "--out", str(tmp_path / "o.csv"),
          "--write-config", str(tmp_path / "cfg.json")])
    code = main(["replay", "--input", str(tmp_path / "o.csv"), "--config", str(tmp_path / "cfg.json"),
                 "--out", str(tmp_path / "out")])
    assert code == 0
    md = (tmp_path / "out" / "report.md").read_text()
    assert "No temporal readings yet" in md
    assert (tmp_path / "out" / "temporal.csv").read_text() == "window,series,value\n"


def test_replay_errors(tmp_path, paper_run):
    d, _ = paper_run
    cfg = str(d / "cfg.json")
    (tmp_path / "empty.csv").write_text(HEADER)
    assert main(["replay", "--input", str(tmp_path / "empty.csv"), "--config", cfg,
                 "--out", str(tmp_path / "o")]) == 1
    (tmp_path / "cfg.json").write_text("{not json")
    assert main(["replay", "--input", str(d / "ev.csv"), "--config", str(tmp_path / "cfg.json"),
                 "--out", str(tmp_path / "o")]) == 1
    (tmp_path / "bad.csv").write_text(HEADER + "s,2020-01-02T00:00:00Z,AI1,c,7\n" * 5)
    assert main(["replay", "--input", str(tmp_path / "bad.csv"), "--config", cfg,
                 "--out", str(tmp_path / "o"), "--error-budget", "2"]) == 1
    assert main(["replay", "--input", str(tmp_path / "missing.csv"), "--config", cfg,
                 "--out", str(tmp_path / "o")]) == 1


def test_replay_is_deterministic(tmp_path, paper_run):
    d, _ = paper_run
    main(["replay", "--input", str(d / "ev.csv"), "--config", str(d / "cfg.json"), "--out", str(tmp_path / "again")])
    for name in ("readings.json", "alerts.jsonl", "report.md", "predictive.csv", "temporal.csv"):
        assert (tmp_path / "again" / name).read_bytes() == (d / "out" / name).read_bytes()
