import json

import pytest

from gradeopt.presets import MAX_SLOPE, MIN_SLOPE, PRESETS, build_preset, generate
from gradeopt.scenario import constraint_terms, group_residuals, initial_objective, parse_scenario
from gradeopt.solver import constraint_residuals


@pytest.mark.parametrize("name", PRESETS)
def test_certificate_is_feasible(name):
    doc, h = build_preset(name)
    sc = parse_scenario(json.dumps(doc))
    assert max(g["max_residual"] for g in group_residuals(sc, h)) < 1e-9
    types = [g.type for g in sc.constraints]
    assert types[:2] == ["max_slope", "min_slope_oriented"]
    assert "edge_align" in types and "interval" in types
    assert sc.constraints[0].specs[0].s_max == MAX_SLOPE
    assert sc.constraints[1].specs[0].s_min == MIN_SLOPE
    assert len(sc.constraints[0].specs) == len(sc.mesh.triangles)


@pytest.mark.parametrize("name", PRESETS)
def test_initial_heights_need_grading(name):
    sc = parse_scenario(json.dumps(generate(name)))
    res = constraint_residuals(constraint_terms(sc), sc.initial_heights)
    assert res.max() > 0.01
    assert initial_objective(sc) > 1.0


def test_seed_controls_terrain():
    a, b, c = generate("roundabout", 0), generate("roundabout", 0), generate("roundabout", 1)
    assert a == b
    assert a["initial_heights"] != c["initial_heights"]
    assert a["vertices"] == c["vertices"]


def test_unknown_preset():
    with pytest.raises(ValueError):
        build_preset("stadium")
