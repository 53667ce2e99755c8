import json
import subprocess
import sys

import pytest

from conftest import CORPUS
from vflight.cli import main

FIG1 = str(CORPUS / "fig1.vf")


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_analyze_light_fig1(capsys):
    code, out, _ = run(capsys, "analyze", "--mode", "light", FIG1)
    assert code == 0
    assert len(json.loads(out)["bugs"]) == 2


def test_analyze_fig_a1(capsys):
    code, out, _ = run(capsys, "analyze", str(CORPUS / "figA1.vf"))
    assert code == 0
    assert json.loads(out)["bugs"] == []


def test_diff_ok(capsys):
    code, out, _ = run(capsys, "analyze", "--mode", "diff", "--no-timing", FIG1)
    assert code == 0
    doc = json.loads(out)
    assert [r["mode"] for r in doc["runs"]] == ["fusion", "light"]
    assert doc["comparison"]["light"]["same_bugs"]


def test_diff_cfl_backend(capsys):
    code, out, _ = run(capsys, "analyze", "--mode", "diff", "--reach", "cfl", FIG1)
    assert code == 0
    assert [r["mode"] for r in json.loads(out)["runs"]] == ["fusion", "cfl-light"]


def test_diff_mismatch_exit(capsys):
    code, out, _ = run(capsys, "analyze", "--mode", "diff", "--literal-ci", str(CORPUS / "nested_guard.vf"))
    assert code == 4
    assert not json.loads(out)["comparison"]["light"]["same_bugs"]


def test_soundness_flag_exit(capsys):
    code, out, _ = run(capsys, "analyze", "--max-path-len", "3", FIG1)
    assert code == 3
    assert json.loads(out)["soundness_flag"] is True


def test_dump_pdg(capsys):
    code, out, _ = run(capsys, "dump", "--what", "pdg", FIG1)
    assert code == 0
    assert out.startswith("digraph pdg {")
    assert 'label="[p==null]@12"' in out


def test_dump_pdg_json(capsys):
    code, out, _ = run(capsys, "dump", "--format", "json", FIG1)
    assert code == 0
    assert len(json.loads(out)["vertices"]) == 16


def test_dump_vn(capsys):
    code, out, _ = run(capsys, "dump", "--what", "vn", FIG1)
    assert code == 0
    assert len(json.loads(out)["vn"]) == 8


def test_dump_empty_program(tmp_path, capsys):
    empty = tmp_path / "empty.vf"
    empty.write_text("")
    code, out, _ = run(capsys, "dump", str(empty))
    assert code == 0 and out == "digraph pdg {\n}\n"
    code, out, _ = run(capsys, "dump", "--what", "vn", str(empty))
    assert code == 0 and json.loads(out)["vn"] == []


def test_classify(capsys):
    code, out, _ = run(capsys, "classify", FIG1)
    assert code == 0
    verdicts = [s["verdict"] for s in json.loads(out)["summaries"]]
    assert verdicts.count("redundant") == 4


def test_out_file(tmp_path, capsys):
    dest = tmp_path / "r.json"
    code, out, _ = run(capsys, "analyze", "--out", str(dest), FIG1)
    assert code == 0 and out == ""
    assert len(json.loads(dest.read_text())["bugs"]) == 2


def test_generic_checker(capsys):
    code, out, _ = run(capsys, "analyze", "--checker", "generic", "--sources", "NULL@*", "--sinks", "[*]a@*", FIG1)
    assert code == 0
    assert [b["sink"] for b in json.loads(out)["bugs"]] == ["*a@9"]


@pytest.mark.parametrize("argv", [
    [],
    ["frob"],
    ["analyze"],
    ["analyze", "--mode", "turbo", FIG1],
    ["analyze", "--max-path-len", "0", FIG1],
    ["analyze", "--jobs", "0", FIG1],
    ["analyze", "--sources", "x", FIG1],
    ["analyze", "--checker", "generic", FIG1],
    ["analyze", "no/such/file.vf"],
])
def test_usage_errors(capsys, argv):
    assert run(capsys, *argv)[0] == 1


def test_analysis_error(tmp_path, capsys):
    bad = tmp_path / "bad.vf"
    bad.write_text("func f() {\n  deref x\n}\n")
    code, _, err = run(capsys, "analyze", str(bad))
    assert code == 2
    assert "x" in err


def test_help_exits_zero(capsys):
    assert run(capsys, "--help")[0] == 0


@pytest.mark.parametrize("argv", [
    ["analyze", "--no-timing", FIG1],
    ["analyze", "--mode", "light", "--no-timing", FIG1],
    ["analyze", "--mode", "diff", "--no-timing", FIG1],
    ["classify", FIG1],
    ["dump", FIG1],
    ["dump", "--what", "vn", FIG1],
])
def test_byte_identical_runs(argv):
    cmd = [sys.executable, "-m", "vflight.cli", *argv]
    one = subprocess.run(cmd, capture_output=True, check=False)
    two = subprocess.run(cmd, capture_output=True, check=False)
    assert one.returncode == two.returncode == 0
    assert one.stdout == two.stdout


def test_parallel_flag(capsys):
    seq = run(capsys, "analyze", "--no-timing", "--seq", FIG1)
    par = run(capsys, "analyze", "--no-timing", "--jobs", "4", FIG1)
    assert seq == par
