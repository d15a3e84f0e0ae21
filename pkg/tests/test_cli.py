import json
import subprocess
import sys
from pathlib import Path

import pytest

from treemeasure import fixtures
from treemeasure.cli import main, verdict
from treemeasure.fo_export import validate_script

SAMPLES = Path(__file__).resolve().parent.parent / "samples"


@pytest.fixture
def pta(tmp_path):
    def write(name):
        p = tmp_path / f"{name}.pta"
        p.write_text(fixtures.SAMPLES[name])
        return str(p)
    return write


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_validate(capsys, pta, tmp_path):
    code, out, _ = run(capsys, "validate", pta("a1"))
    assert code == 0 and json.loads(out)["valid"]
    bad = tmp_path / "bad.pta"
    bad.write_text("alphabet a b\nstate q 2\ninitial q\ntrans q a q r\n")
    code, _, err = run(capsys, "validate", str(bad))
    assert code == 1 and "unknown state r" in err
    code, _, _ = run(capsys, "validate", str(tmp_path / "missing.pta"))
    assert code == 2


def test_validate_warning_only(capsys, pta):
    code, out, err = run(capsys, "validate", pta("a4"))
    assert code == 0 and "blocks" in err
    assert json.loads(out)["diagnostics"]


def test_measure(capsys, pta):
    code, out, _ = run(capsys, "measure", pta("a1"))
    assert code == 0 and json.loads(out)["measure"] == 1.0
    code, out, _ = run(capsys, "measure", pta("a3"))
    assert abs(json.loads(out)["measure"] - 0.5) <= 1e-9


def test_measure_byte_identical(capsys, pta):
    first = run(capsys, "measure", pta("some_a"))[1]
    assert run(capsys, "measure", pta("some_a"))[1] == first


def test_measure_out_file(capsys, pta, tmp_path):
    target = tmp_path / "r.json"
    code, out, _ = run(capsys, "measure", pta("a1"), "--out", str(target))
    assert code == 0 and out == ""
    assert json.loads(target.read_text())["measure"] == 1.0
    code, _, _ = run(capsys, "measure", pta("a1"), "--out", str(tmp_path / "no" / "x.json"))
    assert code == 2


@pytest.mark.parametrize("flags", [["--tol", "0"], ["--tol", "-1"], ["--max-iter", "0"],
                                   ["--max-support", "0"], ["--bogus"]])
def test_usage_errors(capsys, pta, flags):
    code, _, err = run(capsys, "measure", pta("a1"), *flags)
    assert code == 1 and "usage" in err


def test_non_convergence(capsys, pta):
    code, out, err = run(capsys, "measure", pta("some_a"), "--max-iter", "2")
    assert code == 3
    assert json.loads(out)["measure"] is None and "did not stabilize" in err


def test_support_limit(capsys, pta):
    code, _, err = run(capsys, "measure", pta("some_a"), "--max-support", "1")
    assert code == 1 and "support" in err


def test_strict_invariants(capsys, pta):
    code, out, _ = run(capsys, "measure", pta("some_a"), "--strict-invariants")
    assert code == 0 and json.loads(out)["violations"] == []


@pytest.mark.parametrize("name, q, want", [("a1", "0.5", "GREATER"), ("a2", "0", "EQUAL"),
                                           ("a3", "1/2", "EQUAL"), ("a2", "1/3", "LESS")])
def test_compare(capsys, pta, name, q, want):
    code, out, _ = run(capsys, "compare", pta(name), q)
    doc = json.loads(out)
    assert code == 0 and doc["verdict"] == want and doc["approximate"] is True


def test_compare_flag_and_errors(capsys, pta):
    code, out, _ = run(capsys, "compare", pta("a3"), "--q", "0.5", "--band", "0")
    assert json.loads(out)["verdict"] == "EQUAL"
    assert run(capsys, "compare", pta("a1"), "3/2")[0] == 1
    assert run(capsys, "compare", pta("a1"))[0] == 1
    assert run(capsys, "compare", pta("a1"), "x")[0] == 1


def test_verdict_band():
    assert verdict(0.5000001, 0.5, 1e-6) == "EQUAL"
    assert verdict(0.51, 0.5, 1e-6) == "GREATER"


def test_export(capsys, pta, tmp_path):
    target = tmp_path / "a1.smt2"
    code, out, _ = run(capsys, "export", pta("a1"), "--out", str(target))
    assert code == 0 and json.loads(out)["variables"] == 32
    validate_script(target.read_text())
    code, out, err = run(capsys, "export", pta("a1"), "--q", "1/2")
    assert code == 0 and "(assert (> measure (/ 1 2)))" in out
    validate_script(out)


def test_export_width_bound(capsys, tmp_path):
    p = tmp_path / "wide.pta"
    p.write_text("alphabet a\nstate p 2\nstate r 2\nstate s 2\ninitial p\n")
    code, _, err = run(capsys, "export", str(p))
    assert code == 1 and "exceeds" in err


def test_export_with_fake_solver(capsys, pta, tmp_path):
    def solver(answer):
        f = tmp_path / f"{answer}.sh"
        f.write_text(f"#!/bin/sh\necho {answer}\n")
        f.chmod(0o755)
        return str(f)

    out = tmp_path / "x.smt2"
    code, doc, _ = run(capsys, "export", pta("a1"), "--out", str(out), "--solver", solver("unsat"))
    assert code == 0 and json.loads(doc)["solver"]["consistent"] is True
    code, doc, _ = run(capsys, "export", pta("a1"), "--out", str(out), "--solver", solver("sat"))
    assert code == 1 and json.loads(doc)["solver"]["consistent"] is False
    code, _, _ = run(capsys, "export", pta("a1"), "--out", str(out), "--solver", solver("unknown"))
    assert code == 3


def test_selftest_lattice(capsys, tmp_path):
    code, out, _ = run(capsys, "selftest", "lattice", "--g", "2", "--d", "2", "--trials", "100",
                       "--replay-dir", str(tmp_path))
    doc = json.loads(out)
    assert code == 0 and doc["ok"] and doc["trials"] == 100
    assert list(tmp_path.iterdir()) == []


def test_selftest_lattice_sweep(capsys):
    code, out, _ = run(capsys, "selftest", "lattice", "--trials", "50")
    doc = json.loads(out)
    assert code == 0 and doc["trials"] == 200 and len(doc["configs"]) == 4


def test_selftest_order(capsys):
    code, out, _ = run(capsys, "selftest", "order", "--trials", "200")
    doc = json.loads(out)
    assert code == 0 and doc["disagreements"] == 0


@pytest.mark.parametrize("argv", [["selftest", "bogus"], ["selftest", "lattice", "--g", "3", "--d", "4"],
                                  ["selftest", "lattice", "--g", "2"], []])
def test_selftest_usage(capsys, argv):
    assert run(capsys, *argv)[0] == 1


def test_sample_files_match_fixtures():
    for name, text in fixtures.SAMPLES.items():
        assert (SAMPLES / f"{name}.pta").read_text() == text


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "treemeasure", "measure",
                           str(SAMPLES / "a3.pta")], capture_output=True, text=True)
    assert proc.returncode == 0
    assert abs(json.loads(proc.stdout)["measure"] - 0.5) <= 1e-9


def test_log_env(monkeypatch, capsys, pta):
    monkeypatch.setenv("TREEMEASURE_LOG", "INFO")
    code = main(["measure", pta("a1")])
    assert code == 0
