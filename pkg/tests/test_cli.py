import json
import subprocess
import sys

import numpy as np
import pytest

from otclt.cli import run
from otclt.inference import CltReport
from otclt.measures import write_csv, DiscreteMeasure
from otclt.rng import stream


@pytest.fixture
def files(tmp_path):
    rng = stream(0, "cli")
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    write_csv(DiscreteMeasure(rng.random(30)), a)
    write_csv(DiscreteMeasure(rng.random(40) + 0.5), b)
    return tmp_path, str(a), str(b)


def _json(path):
    with open(path) as fh:
        return json.load(fh)


def test_solve_writes_plan(files):
    d, a, b = files
    out = d / "plan.json"
    assert run(["solve", "--cost", "power:2", "--p", a, "--q", b, "--out", str(out)]) == 0
    rep = _json(out)
    assert list(rep) == ["schema_version", "kind", "cost", "n", "m", "objective", "entries", "duals"]
    assert rep["schema_version"] == 1 and rep["n"] == 30 and rep["m"] == 40
    assert sum(e["mass"] for e in rep["entries"]) == pytest.approx(1.0)
    assert len(rep["duals"]["u"]) == 30 and len(rep["duals"]["v"]) == 40


def test_solve_csv(files):
    d, a, b = files
    out = d / "plan.csv"
    assert run(["solve", "--cost", "power:2", "--p", a, "--q", b, "--out", str(out), "--format", "csv"]) == 0
    assert out.read_text().splitlines()[0] == "i,j,mass"


def test_outputs_byte_identical(files):
    d, a, b = files
    for i in (1, 2):
        assert run(["infer-two", "--cost", "power:2", "--p", a, "--q", b, "--out", str(d / f"r{i}.json")]) == 0
    assert (d / "r1.json").read_bytes() == (d / "r2.json").read_bytes()


def test_infer_two_report(files):
    d, a, b = files
    out = d / "r.json"
    assert run(["infer-two", "--cost", "power:2", "--p", a, "--q", b, "--alpha", "0.05",
                "--out", str(out), "--bound"]) == 0
    rep = _json(out)
    assert list(rep) == list(CltReport.KEYS)
    assert rep["lambda"] == pytest.approx(30 / 70)
    assert rep["es_bound"] is not None


@pytest.mark.parametrize("cmd", ["infer-one", "wp-ci"])
def test_other_reports(files, cmd):
    d, a, b = files
    out = d / "r.json"
    assert run([cmd, "--cost", "power:2", "--p", a, "--q", b, "--out", str(out)]) == 0
    assert list(_json(out)) == list(CltReport.KEYS)


def test_bound(files):
    d, a, b = files
    out = d / "b.json"
    assert run(["bound", "--cost", "power:2", "--p", a, "--q", b, "--out", str(out), "--two-sample"]) == 0
    rep = _json(out)
    assert rep["kind"] == "bound" and rep["bound"] >= 0


def test_transform(files, tmp_path):
    src, tgt, pot = tmp_path / "s.csv", tmp_path / "t.csv", tmp_path / "f.txt"
    src.write_text("0\n1\n")
    tgt.write_text("0.6\n")
    pot.write_text("0.5\n0\n")
    out = tmp_path / "g.json"
    assert run(["transform", "--cost", "power:2", "--source", str(src), "--target", str(tgt),
                "--potential", str(pot), "--out", str(out)]) == 0
    rep = _json(out)
    assert rep["side"] == "Q" and rep["values"][0] == pytest.approx(-0.14)


def test_simulate_and_stability(tmp_path):
    out = tmp_path / "s.json"
    assert run(["simulate", "--cost", "power:2", "--p-law", "unif:0:1", "--q-law", "unif:0.5:1.5",
                "--n", "30", "--m", "30", "--reps", "10", "--seed", "1", "--out", str(out)]) == 0
    rep = _json(out)
    assert rep["kind"] == "simulate" and len(rep["reps"]) == 10
    assert rep["summary"]["theory_sigma_sq"] == pytest.approx(1 / 12)
    out = tmp_path / "st.csv"
    assert run(["stability", "--cost", "power:2", "--p-law", "unif:0:1", "--q-law", "unif:0.5:1.5",
                "--n", "30", "--m", "30", "--schedule", "20,40", "--format", "csv", "--out", str(out)]) == 0
    assert out.read_text().splitlines()[0] == "n,sup_error,l2_error,map_sup_error"
    out = tmp_path / "rem.json"
    assert run(["remainder", "--cost", "power:2", "--p-law", "unif:0:1", "--q-law", "unif:0.5:1.5",
                "--n", "30", "--m", "30", "--reps", "5", "--schedule", "20,40", "--out", str(out)]) == 0
    assert [r["n"] for r in _json(out)["rows"]] == [20, 40]


@pytest.mark.parametrize("argv, needle", [
    (["solve", "--cost", "power:0.5", "--p", "x", "--q", "y"], "power"),
    (["solve", "--cost", "quad", "--p", "x", "--q", "y"], "cost"),
    (["solve", "--cost", "power:2", "--p", "/nonexistent.csv", "--q", "y"], "nonexistent"),
    (["infer-two", "--cost", "power:2", "--p", "a", "--q", "b", "--alpha", "2"], "alpha"),
    (["solve", "--cost", "power:2", "--p", "a", "--q", "b", "--bogus"], "bogus"),
    (["stability", "--cost", "power:2", "--p-law", "unif:0:1", "--q-law", "unif:0:1", "--n", "5",
      "--m", "5", "--grid", "1:0:3"], "--grid"),
])
def test_input_errors_exit_1(argv, needle, capsys):
    assert run(argv) == 1
    err = capsys.readouterr().err
    assert needle in err and err.count("\n") == 1


def test_bad_csv_names_row(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("0.1\nabc\n")
    assert run(["solve", "--cost", "power:2", "--p", str(bad), "--q", str(bad)]) == 1
    assert "row 2" in capsys.readouterr().err


def test_wp_identical_samples_exit_1(files, capsys):
    d, a, _ = files
    assert run(["wp-ci", "--cost", "power:2", "--p", a, "--q", a]) == 1
    assert "indistinguishable" in capsys.readouterr().err


def test_entry_point_stdout(files):
    d, a, b = files
    res = subprocess.run([sys.executable, "-m", "otclt.cli", "solve", "--cost", "power:2", "--p", a, "--q", b],
                         capture_output=True, text=True, check=True)
    assert json.loads(res.stdout)["kind"] == "solve"
