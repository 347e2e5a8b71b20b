import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from gradeopt.curvature import (CurvatureObjective, build_pairs, curvature_coeffs, objective_value,
                                project_parallelogram, project_segment, prox_abs_linear,
                                prox_max_pair)
from gradeopt.errors import CollinearTriangle
from gradeopt.mesh import build_mesh, normal_uv
from oracles import parallelogram_oracle

vec4 = st.lists(st.floats(-10, 10), min_size=4, max_size=4).map(np.array)


def _square():
    return build_mesh([(0, 0), (1, 0), (1, 1), (0, 1)], [(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)])


def test_square_pair_objective():
    pairs = build_pairs(_square())
    h = np.array([1.0, 0.0, 0.0, 0.0])
    assert objective_value(h, CurvatureObjective(pairs, "l1")) == pytest.approx(2.0)
    assert objective_value(h, CurvatureObjective(pairs, "max")) == pytest.approx(1.0)
    assert objective_value(h, CurvatureObjective(pairs, "max", weight=3.0)) == pytest.approx(3.0)
    assert objective_value(h, CurvatureObjective([], "l1")) == 0.0


def test_planes_have_zero_curvature():
    rng = np.random.default_rng(0)
    for _ in range(50):
        p = rng.normal(size=(4, 2)) * 3
        try:
            u, v = curvature_coeffs(*p)
        except CollinearTriangle:
            continue
        h = 0.3 + 1.5 * p[:, 0] - 0.7 * p[:, 1]
        assert abs(u @ h) + abs(v @ h) < 1e-8 * (1 + np.abs(u).sum() + np.abs(v).sum())


def test_coefficients_are_gradient_difference():
    p = np.array([(2.0, -1.0), (0.0, 0.0), (-1.5, 1.0), (1.0, 2.0)])
    h = np.array([0.4, -1.0, 2.0, 0.5])
    u, v = curvature_coeffs(*p)
    fr = lambda a, b, c: (a[0] - c[0], a[1] - c[1], b[0] - c[0], b[1] - c[1])  # noqa: E731
    g1 = np.array(normal_uv(fr(p[0], p[1], p[3]), h[0], h[1], h[3]))
    g2 = np.array(normal_uv(fr(p[1], p[2], p[3]), h[1], h[2], h[3]))
    assert_allclose(np.abs([u @ h, v @ h]), np.abs(g1 - g2), atol=1e-12)


def test_collinear_pair_rejected():
    with pytest.raises(CollinearTriangle):
        curvature_coeffs((0, 0), (1, 1), (2, 0), (2, 2))


def test_objective_validation():
    with pytest.raises(ValueError):
        CurvatureObjective([], "l2")
    with pytest.raises(ValueError):
        CurvatureObjective([], "l1", weight=-1.0)


def test_segment_projection():
    g = np.array([1.0, 0.0, 0.0, 0.0])
    assert_allclose(project_segment([3.0, 1.0, 0, 0], g), g)
    assert_allclose(project_segment([0.5, 9.0, 0, 0], g), 0.5 * g)
    assert_allclose(project_segment([1.0, 2.0, 3, 4], np.zeros(4)), np.zeros(4))


def test_parallelogram_matches_oracle():
    rng = np.random.default_rng(1)
    for _ in range(300):
        x, g1, g2 = rng.normal(size=(3, 4)) * rng.uniform(0.1, 5, size=(3, 1))
        assert_allclose(project_parallelogram(x, g1, g2)[0], parallelogram_oracle(x, g1, g2), atol=1e-9)


def test_parallelogram_parallel_generators():
    g1 = np.array([1.0, 2.0, 0.0, -1.0])
    x = np.array([5.0, 0.0, 3.0, 1.0])
    assert_allclose(project_parallelogram(x, g1, -3 * g1)[0], project_segment(x, 3 * g1))
    assert_allclose(project_parallelogram(x, g1, np.zeros(4))[0], project_segment(x, g1))


def _prox_objective_check(prox, f, x, rng):
    p = prox(x)
    val = f(p) + 0.5 * np.sum((p - x) ** 2)
    for _ in range(20):
        y = p + rng.normal(size=p.shape) * 10 ** rng.uniform(-6, 0)
        assert val <= f(y) + 0.5 * np.sum((y - x) ** 2) + 1e-10


def test_prox_minimizes_penalized_distance():
    rng = np.random.default_rng(2)
    for _ in range(100):
        x, u, v = rng.normal(size=(3, 4))
        a = rng.uniform(0.1, 3)
        _prox_objective_check(lambda y: prox_abs_linear(y, u, a), lambda y: a * abs(u @ y), x, rng)
        _prox_objective_check(lambda y: prox_max_pair(y, u, v, a),
                              lambda y: a * max(abs(u @ y), abs(v @ y)), x, rng)


@settings(max_examples=300, deadline=None)
@given(vec4, vec4, vec4, st.floats(0.01, 5))
def test_moreau_decomposition(x, u, v, a):
    # x = prox_f(x) + projection onto the polytope whose support function is f
    if np.linalg.matrix_rank(np.column_stack([u, v]), tol=1e-3) < 2:
        return
    s = prox_abs_linear(x, u, a) + a * np.clip(u @ x / (a * (u @ u)), -1, 1) * u
    assert_allclose(s, x, atol=1e-10 * (1 + np.abs(x).max()))
    p = prox_max_pair(x, u, v, a) + parallelogram_oracle(x, a * u, a * v)
    assert_allclose(p, x, atol=1e-8 * (1 + np.abs(x).max()))


@settings(max_examples=200, deadline=None)
@given(vec4, vec4, vec4, vec4, st.floats(0.01, 5))
def test_prox_is_firmly_nonexpansive(x, y, u, v, a):
    px, py = prox_max_pair(x, u, v, a), prox_max_pair(y, u, v, a)
    assert np.sum((px - py) ** 2) <= (px - py) @ (x - y) + 1e-9 * (1 + np.sum((x - y) ** 2))
