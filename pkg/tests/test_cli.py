"""Command line surface: exit codes, artifact files, and rerun stability.

Everything drives cli_main in process; one subprocess test confirms the
installed console script wires up the same entry point.
"""

import json
import shutil
import subprocess

import pytest

from wfgraph.absgraph import graph_from_json
from wfgraph.bakery import bakery_text
from wfgraph.cli import cli_main

CHECK_LINE = ("ok: model bakery, params {'n': 2, 'r': 2, 'w': 3}, "
              "maps: rank (step), nlock (blok)\n")


def test_check_default(capsys):
    assert cli_main(["check"]) == 0
    assert capsys.readouterr().out == CHECK_LINE


def test_check_param_override(capsys):
    assert cli_main(["check", "--width", "2", "--runs", "1"]) == 0
    out = capsys.readouterr().out
    assert "params {'n': 2, 'r': 1, 'w': 2}" in out


def test_check_reads_model_file(tmp_path, capsys):
    f = tmp_path / "copy.wfm"
    f.write_text(bakery_text())
    assert cli_main(["check", "--model", str(f)]) == 0
    assert capsys.readouterr().out == CHECK_LINE


def test_check_dump_cnf(tmp_path, capsys):
    out = tmp_path / "rel.cnf"
    assert cli_main(["check", "--map", "rank", "--dump-cnf", str(out)]) == 0
    capsys.readouterr()
    lines = out.read_text().splitlines()
    assert lines[0].startswith("p cnf ")
    assert lines[1] == "1 0"  # the reserved TRUE literal
    assert all(l.endswith(" 0") for l in lines[1:])


def test_dump_cnf_needs_map(capsys):
    assert cli_main(["check", "--dump-cnf", "x.cnf"]) == 1
    assert "needs --map" in capsys.readouterr().err


def test_pipeline_artifacts_and_idempotence(tmp_path, capsys):
    args = ["--width", "2", "--out"]
    g1 = tmp_path / "g.json"
    assert cli_main(["reach", "--map", "rank"] + args + [str(g1)]) == 0
    tg1 = tmp_path / "tg.json"
    assert cli_main(["order", "--map", "rank"] + args + [str(tg1)]) == 0
    om1 = tmp_path / "om.json"
    assert cli_main(["synth", "--map", "rank"] + args + [str(om1)]) == 0
    dot1 = tmp_path / "g.dot"
    assert cli_main(["export-dot", "--map", "rank"] + args + [str(dot1)]) == 0

    # rerunning writes byte-identical artifacts
    g2 = tmp_path / "g2.json"
    assert cli_main(["reach", "--map", "rank"] + args + [str(g2)]) == 0
    assert g1.read_bytes() == g2.read_bytes()

    plain = graph_from_json(json.loads(g1.read_text()))
    assert len(plain.nodes) == 21 and len(plain.arcs) == 23
    tagged = graph_from_json(json.loads(tg1.read_text()))
    assert tagged.measures == ("runs", "loop")

    omdoc = json.loads(om1.read_text())
    assert omdoc["map"] == "rank"
    assert len(omdoc["descriptors"]) == 21

    assert dot1.read_text().startswith('digraph "rank" {')
    capsys.readouterr()


def test_synth_to_stdout(capsys):
    assert cli_main(["synth", "--map", "rank", "--width", "2"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["format"] == "wfgraph-omap-v1"


def test_certify_infers_map_from_omap(tmp_path, capsys):
    om = tmp_path / "om.json"
    assert cli_main(["synth", "--map", "rank", "--width", "2",
                     "--out", str(om)]) == 0
    cert = tmp_path / "cert.json"
    assert cli_main(["certify", "--omap", str(om), "--width", "2",
                     "--out", str(cert)]) == 0
    doc = json.loads(cert.read_text())
    assert doc["pass"] is True
    assert doc["map"] == "rank"
    assert [c["name"] for c in doc["checks"]] == [
        "closure", "strict-arc-decrease", "noninc-arc-nonincrease",
        "omap-valid", "measure-decrease"]
    capsys.readouterr()


def test_certify_requires_some_map(tmp_path, capsys):
    om = tmp_path / "om.json"
    assert cli_main(["synth", "--map", "rank", "--width", "2",
                     "--out", str(om)]) == 0
    doc = json.loads(om.read_text())
    del doc["map"]
    om.write_text(json.dumps(doc))
    assert cli_main(["certify", "--omap", str(om), "--width", "2"]) == 1
    assert "pass --map" in capsys.readouterr().err


def test_certify_nlock_passes(tmp_path, capsys):
    om = tmp_path / "om.json"
    assert cli_main(["synth", "--map", "nlock", "--width", "2",
                     "--out", str(om)]) == 0
    assert cli_main(["certify", "--omap", str(om), "--width", "2"]) == 0
    capsys.readouterr()


def _mutant(tmp_path, name, old, new):
    text = bakery_text()
    assert old in text, "transform target drifted"
    f = tmp_path / name
    f.write_text(text.replace(old, new))
    return f


def test_synth_rejects_runs_decrement_removed(tmp_path, capsys):
    # the outer loop no longer counts down, so the progress cycle through
    # loc 15 never decreases anything
    f = _mutant(tmp_path, "mut_runs.wfm",
                "(14 (update a :loc 15 :runs (1- a.runs)))",
                "(14 (update a :loc 15))")
    assert cli_main(["synth", "--map", "rank", "--model", str(f),
                     "--width", "2"]) == 2
    out = capsys.readouterr().out
    assert out.startswith("non-decreasing cycle of 16 arcs:")
    assert "(:loc 15)" in out and "(:loc 0)" in out


def test_synth_rejects_truncated_nlock_measures(tmp_path, capsys):
    # without the position measure the waiting chain at loc 10 only ties
    f = _mutant(tmp_path, "mut_nlock.wfm",
                "    (measure pos (tuple a.pos))\n", "")
    assert cli_main(["synth", "--map", "nlock", "--model", str(f),
                     "--width", "2"]) == 2
    out = capsys.readouterr().out
    assert "non-decreasing cycle" in out
    assert "ndx:may-inc" in out


def test_run_trace(tmp_path, capsys):
    out = tmp_path / "trace.txt"
    assert cli_main(["run", "--width", "2", "--runs", "1", "--seed", "3",
                     "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines and all(l.startswith("step ") for l in lines)
    assert " measure " in lines[-1]
    out2 = tmp_path / "trace2.txt"
    assert cli_main(["run", "--width", "2", "--runs", "1", "--seed", "3",
                     "--out", str(out2)]) == 0
    assert out.read_bytes() == out2.read_bytes()
    capsys.readouterr()


def test_usage_errors_exit_1(capsys):
    with pytest.raises(SystemExit) as e:
        cli_main([])
    assert e.value.code == 1
    with pytest.raises(SystemExit) as e:
        cli_main(["frobnicate"])
    assert e.value.code == 1
    with pytest.raises(SystemExit) as e:
        cli_main(["reach"])  # --map is required
    assert e.value.code == 1
    with pytest.raises(SystemExit) as e:
        cli_main(["reach", "--map", "rank", "--backend", "quantum"])
    assert e.value.code == 1
    capsys.readouterr()


def test_tool_errors_exit_1(tmp_path, capsys):
    assert cli_main(["reach", "--map", "bogus"]) == 1
    assert cli_main(["reach", "--map", "rank", "--num", "2"]) == 1  # NotTotal
    assert cli_main(["reach", "--map", "rank",
                     "--model", str(tmp_path / "missing.wfm")]) == 1
    assert cli_main(["run", "--n", "0"]) == 1
    assert cli_main(["synth", "--map", "rank", "--num", "0"]) == 1
    err = capsys.readouterr().err
    assert "error" in err


def test_console_script(tmp_path):
    exe = shutil.which("wfgraph")
    assert exe, "console script not installed"
    r = subprocess.run([exe, "check"], capture_output=True, text=True)
    assert r.returncode == 0
    assert r.stdout == CHECK_LINE
