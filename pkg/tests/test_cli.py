import io
import json
import subprocess
import sys

import numpy as np
import pytest

from dichobound.cli import cmd_solve, main
from dichobound.demos import DEMO_NAMES, demo_problem
from dichobound.errors import ProblemParseError, UnknownDemo
from dichobound.problem_io import ProblemFile, Tolerances, dumps_canonical, load, loads


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture
def demo_file(tmp_path):
    def make(name):
        path = tmp_path / f"{name}.json"
        assert run("demo", name, "-o", path) == 0
        return path
    return make


def unsolvable_resonant(tmp_path):
    problem = demo_problem("resonant")
    raw = problem.as_dict()
    raw["forcing"] = {"0": [1.0]}
    path = tmp_path / "resonant_bad.json"
    path.write_text(dumps_canonical(raw))
    return path


@pytest.mark.parametrize("name", DEMO_NAMES)
def test_demo_round_trip_is_byte_identical(name, demo_file):
    path = demo_file(name)
    text = path.read_text()
    assert load(path).dumps() == text
    assert loads(loads(text).dumps()).dumps() == text


def test_unknown_demo(capsys):
    assert run("demo", "nope") == UnknownDemo.exit_code == 1
    assert "nope" in capsys.readouterr().err


@pytest.mark.parametrize("name", ["saddle", "trichotomy"])
def test_pipeline(name, demo_file, tmp_path):
    path = demo_file(name)
    assert run("analyze", path, "-o", tmp_path / "a.json") == 0
    assert run("verify", tmp_path / "a.json") == 0
    assert run("solve", path, "-o", tmp_path / "s.json") == 0
    assert run("verify", tmp_path / "s.json") == 0
    assert run("oracle", path) == 0


def test_analyze_output(demo_file, capsys):
    assert run("analyze", demo_file("trichotomy")) == 0
    out = capsys.readouterr().out
    assert "r = 1, d = 0" in out
    assert "trichotomy = true" in out and "dichotomy_on_z = false" in out


def test_analyze_unit_circle_exit_2(tmp_path):
    raw = demo_problem("saddle").as_dict()
    raw["tail_plus"] = [[1.0, 0.0], [0.0, 2.0]]
    path = tmp_path / "p.json"
    path.write_text(dumps_canonical(raw))
    assert run("analyze", path) == 2


def test_resonant_solvable(demo_file, tmp_path):
    assert run("solve", demo_file("resonant"), "-o", tmp_path / "s.json") == 0
    result = json.loads((tmp_path / "s.json").read_text())
    assert result["solvability"]["residual_norm"] <= 1e-12
    assert run("verify", tmp_path / "s.json") == 0


def test_resonant_unsolvable_exit_3(tmp_path):
    path = unsolvable_resonant(tmp_path)
    out = io.StringIO()
    assert cmd_solve(path, output=tmp_path / "s.json", out=out) == 3
    assert "not solvable" in out.getvalue()
    result = json.loads((tmp_path / "s.json").read_text())
    assert result["solvability"]["residual_norm"] == pytest.approx(0.5, abs=1e-12)
    assert "solution" not in result
    assert run("oracle", path) == 3


def test_quasi(tmp_path):
    path = unsolvable_resonant(tmp_path)
    assert run("solve", path, "--quasi", "-o", tmp_path / "q.json") == 0
    result = json.loads((tmp_path / "q.json").read_text())
    assert result["mode"] == "quasi"
    assert result["defect_norm"] == pytest.approx(0.5, abs=1e-12)
    assert result["verification"]["jump_norm"] == pytest.approx(0.5, abs=1e-12)
    assert run("verify", tmp_path / "q.json") == 0


def test_verify_catches_tampering(demo_file, tmp_path):
    assert run("solve", demo_file("saddle"), "-o", tmp_path / "s.json") == 0
    result = json.loads((tmp_path / "s.json").read_text())
    result["solution"]["samples"][12][0] += 1e-3
    (tmp_path / "t.json").write_text(dumps_canonical(result))
    assert run("verify", tmp_path / "t.json") == 4

    result = json.loads((tmp_path / "s.json").read_text())
    result["problem"]["forcing"]["0"] = [2.0, 0.0]
    (tmp_path / "t.json").write_text(dumps_canonical(result))
    assert run("verify", tmp_path / "t.json") == 4


@pytest.mark.parametrize("name", DEMO_NAMES)
def test_rank_tol_does_not_change_verdicts(name, demo_file, tmp_path):
    path = demo_file(name)
    assert run("solve", path, "-o", tmp_path / "a.json") == 0
    assert run("solve", path, "--rank-tol-rel", "1e-6", "-o", tmp_path / "b.json") == 0
    a = json.loads((tmp_path / "a.json").read_text())
    b = json.loads((tmp_path / "b.json").read_text())
    assert a["classification"] == b["classification"]
    assert b["tolerances_used"]["rank_tol_rel"] == 1e-6
    np.testing.assert_allclose(a["solution"]["samples"], b["solution"]["samples"], atol=1e-12)
    assert run("verify", tmp_path / "b.json") == 0


def test_csv(demo_file, tmp_path):
    assert run("solve", demo_file("saddle"), "--csv", tmp_path / "x.csv") == 0
    lines = (tmp_path / "x.csv").read_text().splitlines()
    assert lines[0] == "n,x_1,x_2,norm"
    assert len(lines) == 22
    row = dict(zip(lines[0].split(","), lines[12].split(",")))
    assert row["n"] == "1" and float(row["x_1"]) == 1.0


@pytest.mark.parametrize("text", [
    "{not json",
    '{"dim": 1, "tail_minus": [[NaN]], "tail_plus": [[2.0]]}',
    '{"dim": 1, "tail_minus": [[0.5]], "tail_plus": [[2.0]], "extra": 1}',
    '{"dim": 2, "tail_minus": [[0.5]], "tail_plus": [[2.0]]}',
    '{"dim": 1, "tail_minus": [[0.5]], "tail_plus": [[2.0]], "tolerances": {"bogus": 1}}',
    '[1, 2]',
])
def test_bad_problem_files(text, tmp_path, capsys):
    with pytest.raises(ProblemParseError):
        loads(text)
    path = tmp_path / "bad.json"
    path.write_text(text)
    assert run("analyze", path) == 1
    assert capsys.readouterr().err.startswith("error:")


def test_missing_file_exit_1(tmp_path):
    assert run("analyze", tmp_path / "absent.json") == 1


def test_env_tolerance_override(monkeypatch):
    monkeypatch.setenv("DICHOBOUND_RANK_TOL_REL", "1e-7")
    assert Tolerances.defaults().rank_tol_rel == 1e-7
    problem = ProblemFile.from_dict({"dim": 1, "tail_minus": [[0.5]], "tail_plus": [[2.0]]})
    assert problem.tolerances.rank_tol_rel == 1e-7
    monkeypatch.setenv("DICHOBOUND_RANK_TOL_REL", "-1")
    with pytest.raises(ProblemParseError):
        Tolerances.defaults()


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "dichobound", "demo", "saddle"],
        capture_output=True, text=True, check=True,
    )
    assert proc.stdout == demo_problem("saddle").dumps()
