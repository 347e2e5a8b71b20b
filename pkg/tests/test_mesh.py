import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from gradeopt.errors import CollinearTriangle, DanglingIndex
from gradeopt.mesh import (PlanarVertex, build_mesh, frames_array, normal_uv,
                           shadow_length, triangle_frame)


def test_single_triangle():
    m = build_mesh([(0, 0), (1, 0), (0, 1)], [(0, 1), (1, 2), (2, 0)])
    assert m.triangles == ((0, 1, 2),)
    assert m.n == 3


def test_unit_square_one_diagonal():
    m = build_mesh([(0, 0), (1, 0), (1, 1), (0, 1)], [(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)])
    assert m.triangles == ((0, 1, 2), (0, 2, 3))


def test_collinear_triangle_rejected():
    with pytest.raises(CollinearTriangle):
        build_mesh([(0, 0), (1, 1), (2, 2)], [(0, 1), (1, 2), (0, 2)])


def test_dangling_edge_rejected():
    with pytest.raises(DanglingIndex):
        build_mesh([(0, 0), (1, 0)], [(0, 5)])


def test_planar_vertex_input():
    verts = [PlanarVertex(1, 1.0, 0.0), PlanarVertex(0, 0.0, 0.0), PlanarVertex(2, 0.0, 1.0)]
    m = build_mesh(verts, [(0, 1), (1, 2), (0, 2)])
    assert_allclose(m.xy, [[0, 0], [1, 0], [0, 1]])


@pytest.mark.parametrize("p,q,d", [((0, 0), (3, 4), 5.0), ((1, 1), (1, 1), 0.0), ((0, 0), (1, 1), 2 ** 0.5)])
def test_shadow_length(p, q, d):
    assert shadow_length(PlanarVertex(0, *p), PlanarVertex(1, *q)) == pytest.approx(d)


def test_triangle_frame_offsets_relative_to_last_corner():
    m = build_mesh([(0, 0), (2, 0), (0, 3)], [(0, 1), (1, 2), (0, 2)])
    fr = triangle_frame(m, (0, 1, 2))
    assert fr == (0.0, -3.0, 2.0, -3.0)
    assert fr.detAB == pytest.approx(6.0)
    assert_allclose(frames_array(m)[0], fr)


def test_adjacent_pairs_share_one_edge():
    m = build_mesh([(0, 0), (1, 0), (1, 1), (0, 1)], [(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)])
    (pair,) = m.adjacent_pairs()
    p1, p2, p3, p4 = pair
    assert {p2, p4} == {0, 2}
    assert {p1, p3} == {1, 3}


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=6, max_size=6), st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3))
def test_normal_uv_recovers_plane_gradient(coords, gx, gy, c):
    p = np.array(coords).reshape(3, 2)
    det = (p[0, 0] - p[2, 0]) * (p[1, 1] - p[2, 1]) - (p[1, 0] - p[2, 0]) * (p[0, 1] - p[2, 1])
    if abs(det) < 1e-3:
        return
    h = gx * p[:, 0] + gy * p[:, 1] + c
    fr = (p[0, 0] - p[2, 0], p[0, 1] - p[2, 1], p[1, 0] - p[2, 0], p[1, 1] - p[2, 1])
    u, v = normal_uv(fr, *h)
    assert_allclose([u, v], [gx, gy], atol=1e-7 * (1 + abs(gx) + abs(gy)) / min(1.0, abs(det)))
