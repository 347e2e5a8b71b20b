import json
import subprocess
import sys

import pytest
from numpy.testing import assert_allclose

from gradeopt.cli import run

SQUARE = {
    "vertices": [[0, 0], [1, 0], [1, 1], [0, 1]],
    "edges": [[1, 2], [2, 3], [3, 4], [4, 1], [1, 3]],
    "initial_heights": [0.5, 0.25, 1.0, 2.0],
    "constraints": [
        {"type": "interval", "entries": [[1, 0, 2]]},
        {"type": "edge_align", "path": [4, 1, 2]},
        {"type": "max_slope", "slope": 0.5},
        {"type": "min_slope_oriented", "slope": 0.05, "direction": [1, 0]},
    ],
    "objective": {"norm": "l1", "weight": 1.0},
}


def write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return str(p)


def test_project_low_point_example(tmp_path, capsys):
    sc = write(tmp_path, "lp.json", {
        "vertices": [[0, 0], [1, 0], [0, 1]], "edges": [[1, 2], [2, 3], [1, 3]],
        "initial_heights": [0, 1, 2],
        "constraints": [{"type": "low_point", "center": 1, "neighbors": [2, 3], "alphas": [2, 1]}]})
    assert run(["project", "--scenario", sc, "--constraint", "lowpoint:1"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert_allclose(out["heights"], [-0.5, 1.5, 2.0], atol=1e-12)
    assert out["projections"][0]["footprint"] == [1, 2, 3]
    assert out["constraint"] == "low_point:1"


def test_project_rejects_wrong_constraint(tmp_path, capsys):
    sc = write(tmp_path, "s.json", SQUARE)
    assert run(["project", "--scenario", sc, "--constraint", "low_point:1"]) == 1
    assert run(["project", "--scenario", sc, "--constraint", "interval:9"]) == 1
    assert run(["project", "--scenario", sc, "--constraint", "interval"]) == 1
    assert "error" in capsys.readouterr().err


def test_solve_then_check(tmp_path, capsys):
    sc = write(tmp_path, "s.json", SQUARE)
    out = tmp_path / "out"
    assert run(["solve", "--scenario", sc, "--tol", "0.001", "--out", str(out), "--quiet"]) == 0
    assert capsys.readouterr().out.startswith("converged")
    assert run(["check", "--scenario", sc, "--heights", str(out / "heights.csv")]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 5
    assert all(line.rstrip().endswith("ok") for line in lines[:4])


def test_check_reports_infeasible_heights(tmp_path, capsys):
    sc = write(tmp_path, "s.json", SQUARE)
    h = write(tmp_path, "h.json", [5.0, 0.0, 0.0, 0.0])
    assert run(["check", "--scenario", sc, "--heights", h]) == 0
    assert "VIOLATED" in capsys.readouterr().out
    bad = write(tmp_path, "bad.json", [1.0, 2.0])
    assert run(["check", "--scenario", sc, "--heights", bad]) == 1


def test_exit_codes(tmp_path, capsys):
    broken = tmp_path / "broken.json"
    broken.write_text("{\n  \"vertices\": [,\n")
    assert run(["solve", "--scenario", str(broken)]) == 1
    assert "line 2" in capsys.readouterr().err
    assert run(["solve", "--scenario", str(tmp_path / "missing.json")]) == 1
    bad = dict(SQUARE, constraints=[{"type": "interval", "entries": [[1, 2, 1]]}])
    assert run(["solve", "--scenario", write(tmp_path, "bad.json", bad)]) == 1
    infeasible = dict(SQUARE, constraints=[{"type": "interval", "entries": [[1, 0, 0]]},
                                           {"type": "interval", "entries": [[1, 1, 1]]}])
    assert run(["solve", "--scenario", write(tmp_path, "inf.json", infeasible),
                "--max-iters", "20", "--quiet"]) == 2
    assert capsys.readouterr().out.startswith("iteration limit")
    assert run(["solve", "--scenario", write(tmp_path, "s.json", SQUARE), "--gamma", "-1"]) == 1


def test_progress_goes_to_stderr(tmp_path, capsys):
    sc = write(tmp_path, "s.json", dict(SQUARE, constraints=[{"type": "interval", "entries": [[1, 0, 0]]},
                                                             {"type": "interval", "entries": [[1, 1, 1]]}]))
    run(["solve", "--scenario", sc, "--max-iters", "250"])
    err = capsys.readouterr().err.splitlines()
    assert [line.split()[1] for line in err] == ["100", "200"]


@pytest.mark.parametrize("method", ["dr", "cyclic", "parallel"])
def test_solve_is_deterministic(tmp_path, method):
    sc = write(tmp_path, "s.json", SQUARE)
    outs = []
    for k in range(2):
        d = tmp_path / f"run{k}"
        assert run(["solve", "--scenario", sc, "--method", method, "--out", str(d), "--quiet"]) == 0
        outs.append({p.name: p.read_bytes() for p in sorted(d.iterdir())})
    assert outs[0] == outs[1]
    assert len(outs[0]) == 4


def test_generate(tmp_path, capsys):
    out = tmp_path / "g.json"
    assert run(["generate", "--preset", "parking-side", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert len(doc["vertices"]) == 121
    assert run(["generate", "--preset", "parking-side"]) == 0
    assert json.loads(capsys.readouterr().out) == doc
    with pytest.raises(SystemExit):
        run(["generate", "--preset", "stadium"])


def test_module_entry_point(tmp_path):
    sc = write(tmp_path, "s.json", SQUARE)
    res = subprocess.run([sys.executable, "-m", "gradeopt", "check", "--scenario", sc],
                         capture_output=True, text=True)
    assert res.returncode == 0
    assert "max residual" in res.stdout
