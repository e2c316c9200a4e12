import json
import shutil
import subprocess
import sys

import pytest

from cise.cli import main
from conftest import fixture_path

SCHOOL = fixture_path("school.cise")


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_analyze_school_conflicts(capsys):
    code, out, _ = run(capsys, "analyze", SCHOOL, "--bounds", "0..3")
    assert code == 1
    assert "operations enroll and remCourse conflict" in out
    assert "operations addCourse and remCourse do not commute" in out


@pytest.mark.parametrize("tok,code", [("coarse.tok", 1), ("coarse_mutex.tok", 0),
                                      ("refined.tok", 1)])
def test_analyze_with_tokens(capsys, tok, code):
    got, out, _ = run(capsys, "analyze", SCHOOL, "--tokens", fixture_path(tok), "--bounds", "0..3")
    assert got == code
    assert ("token system: sound" in out) == (code == 0)


def test_analyze_empty_ops(capsys):
    code, out, _ = run(capsys, "analyze", fixture_path("empty_ops.cise"), "--report", "json")
    assert code == 0
    data = json.loads(out)
    assert data["pairs"] == data["self"] == data["safety"] == []


def test_json_report_is_byte_identical(capsys):
    argv = ["analyze", SCHOOL, "--bounds", "0..2", "--report", "json"]
    _, a, _ = run(capsys, *argv)
    _, b, _ = run(capsys, *argv)
    assert a == b
    assert json.loads(a)["schema_version"] == 1


@pytest.mark.parametrize("argv", [
    ["analyze", "/nonexistent.cise"],
    ["analyze", SCHOOL, "--bounds", "3..0"],
    ["analyze", SCHOOL, "--bounds", "0..99"],
    ["analyze", SCHOOL, "--tokens", fixture_path("race.sim")],
    ["analyze", fixture_path("coarse.tok")],
    ["sp", SCHOOL, "nosuch"],
    ["crdt-sim"],
    ["frobnicate"],
])
def test_input_errors_exit_2(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2
    assert err


def test_input_error_spans(capsys, tmp_path):
    bad = tmp_path / "bad.tok"
    bad.write_text("argtoken enrol course t1\nargtoken remCourse course t2\nt1 conflicts t2\n",
                   encoding="utf-8")
    code, _, err = run(capsys, "analyze", SCHOOL, "--tokens", str(bad))
    assert code == 2
    assert "bad.tok:1:" in err and "enrol" in err


def test_sp_addcourse(capsys):
    code, out, err = run(capsys, "sp", SCHOOL, "addCourse")
    assert code == 0
    assert out == "exists v0. state.courses = add(course, v0) && course > 0\n"
    assert "ensures" in err
    code, out, err = run(capsys, "sp", SCHOOL, "addCourse", "--force")
    assert err == ""
    code, out, _ = run(capsys, "sp", fixture_path("addcourse_sp.cise"), "addCourse", "--sorts")
    assert out == "exists v0: fset int. state.courses = add(course, v0) && course > 0\n"


def test_crdt_sim_scenario(capsys):
    code, out, _ = run(capsys, "crdt-sim", fixture_path("race.sim"), "--report", "json")
    assert code == 0
    data = json.loads(out)
    assert data["converged"]
    finals = data["runs"][0]["final_states"]
    assert finals[0] == finals[1] == {"adds": [5], "removes": [5]}


def test_crdt_sim_random(capsys):
    code, out, _ = run(capsys, "crdt-sim", "--random", "5", "--seed", "7")
    assert code == 0
    assert out.splitlines()[0].startswith("seed 7: 3 replicas")
    assert out.splitlines()[-1] == "5/5 runs converged"
    argv = ["crdt-sim", "--random", "3", "--seed", "1", "--report", "json"]
    assert run(capsys, *argv)[1] == run(capsys, *argv)[1]


def test_crdt_sim_rejects_lost_messages(capsys, tmp_path):
    bad = tmp_path / "lost.sim"
    bad.write_text("replicas 2\nop r1 add 1\n", encoding="utf-8")
    code, _, err = run(capsys, "crdt-sim", str(bad))
    assert code == 2 and "error" in err


def test_emit_smt(capsys, tmp_path):
    code, out, _ = run(capsys, "emit-smt", fixture_path("generic.cise"), str(tmp_path))
    assert code == 0
    files = sorted(p.name for p in tmp_path.iterdir())
    assert len(files) == 13 and all(f.endswith(".smt2") for f in files)
    assert out.strip() == f"wrote 13 script(s) to {tmp_path}"


@pytest.mark.skipif(shutil.which("z3") is None, reason="z3 not on PATH")
def test_analyze_with_solver(capsys, tmp_path):
    code, out, _ = run(capsys, "analyze", fixture_path("generic.cise"), "--solver", "z3 -in",
                       "--emit-smt", str(tmp_path), "--report", "json")
    assert code == 0
    smt = json.loads(out)["smt"]
    assert len(smt) == 13 and all(row["agrees"] for row in smt)
    code, out, _ = run(capsys, "emit-smt", SCHOOL, str(tmp_path / "b"), "--bounded",
                       "--solver", "z3 -in")
    assert code == 1 and "sat" in out


def test_module_entry_point():
    p = subprocess.run([sys.executable, "-m", "cise.cli", "sp", SCHOOL, "addCourse", "--force"],
                       capture_output=True, text=True)
    assert p.returncode == 0
    assert p.stdout.startswith("exists v0.")
