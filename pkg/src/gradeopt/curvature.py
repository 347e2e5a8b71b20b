"""Curvature between edge-adjacent triangles and its proximity operators.

For triangles P1 P2 P4 and P2 P3 P4 sharing the edge P2 P4, the difference
of their rescaled normals is linear in the four heights:
``delta = (<uvec, h>, <vvec, h>)``. The objective sums ``|delta|_1`` or
``|delta|_inf`` over all adjacent pairs. Both penalties are support
functions of symmetric polytopes (a segment, a parallelogram), so their
prox is the identity minus a projection onto that polytope.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import CollinearTriangle

DET_GUARD = 1e-12


@dataclass(frozen=True)
class AdjacentPair:
    footprint: tuple  # height indices in (P1, P2, P3, P4) order
    uvec: np.ndarray
    vvec: np.ndarray


@dataclass(frozen=True)
class CurvatureObjective:
    pairs: list
    norm_kind: Literal["l1", "max"] = "l1"
    weight: float = 1.0

    def __post_init__(self):
        if self.weight < 0:
            raise ValueError("curvature weight must be nonnegative")
        if self.norm_kind not in ("l1", "max"):
            raise ValueError(f"unknown norm kind {self.norm_kind!r}")


def curvature_coeffs(p1, p2, p3, p4):
    """Coefficient vectors (uvec, vvec) for the pair P1P2P4 / P2P3P4."""
    a = [p[0] - p4[0] for p in (p1, p2, p3)]
    b = [p[1] - p4[1] for p in (p1, p2, p3)]
    d1 = a[0] * b[1] - a[1] * b[0]
    d2 = a[1] * b[2] - a[2] * b[1]
    scale = max(abs(x) for x in a + b) ** 2
    if abs(d1) <= DET_GUARD * scale or abs(d2) <= DET_GUARD * scale:
        raise CollinearTriangle(("P1P2P4", "P2P3P4"))
    u = [-b[1] / d1, b[0] / d1 + b[2] / d2, -b[1] / d2]
    v = [a[1] / d1, -a[0] / d1 - a[2] / d2, a[1] / d2]
    uvec = np.array(u + [-sum(u)])
    vvec = np.array(v + [-sum(v)])
    return uvec, vvec


def build_pairs(mesh) -> list[AdjacentPair]:
    pairs = []
    for fp in mesh.adjacent_pairs():
        u, v = curvature_coeffs(*(mesh.xy[k] for k in fp))
        pairs.append(AdjacentPair(tuple(int(k) for k in fp), u, v))
    return pairs


def objective_value(heights, obj: CurvatureObjective) -> float:
    h = np.asarray(heights, dtype=float)
    if not obj.pairs:
        return 0.0
    fp = np.array([p.footprint for p in obj.pairs])
    U = np.array([p.uvec for p in obj.pairs])
    V = np.array([p.vvec for p in obj.pairs])
    du = np.abs(np.einsum("ij,ij->i", U, h[fp]))
    dv = np.abs(np.einsum("ij,ij->i", V, h[fp]))
    per = du + dv if obj.norm_kind == "l1" else np.maximum(du, dv)
    return float(obj.weight * per.sum())


def project_segment(x, g):
    """Projection onto the segment ``[-g, g]`` (rows of ``x`` and ``g`` in batch)."""
    x = np.asarray(x, dtype=float)
    g = np.asarray(g, dtype=float)
    gg = np.sum(g * g, axis=-1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(gg > 0, np.sum(g * x, axis=-1, keepdims=True) / gg, 0.0)
    return np.clip(t, -1.0, 1.0) * g


def prox_abs_linear(x, u, alpha):
    """Prox of ``y -> alpha |<u, y>|`` evaluated at ``x``."""
    return np.asarray(x, dtype=float) - project_segment(x, alpha * np.asarray(u, dtype=float))


def _project_point_segment_2d(p, a, b):
    d = b - a
    dd = np.sum(d * d, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(dd > 0, np.sum((p - a) * d, axis=-1) / dd, 0.0)
    return a + np.clip(t, 0.0, 1.0)[..., None] * d


def project_parallelogram(x, g1, g2):
    """Projection onto ``conv{g1, g2, -g1, -g2}``; works on batches of rows.

    The set lives in span{g1, g2}, so ``x`` is reduced to 2-D coordinates in
    an orthonormal basis of that span. A point ``a g1 + b g2`` is inside iff
    ``|a| + |b| <= 1``; otherwise the nearest of the four edge projections
    wins. Parallel generators reduce to the longer generator's segment.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    g1 = np.broadcast_to(np.atleast_2d(np.asarray(g1, dtype=float)), x.shape)
    g2 = np.broadcast_to(np.atleast_2d(np.asarray(g2, dtype=float)), x.shape)
    n1 = np.linalg.norm(g1, axis=1)
    n2 = np.linalg.norm(g2, axis=1)
    safe1 = np.where(n1 > 0, n1, 1.0)
    e1 = g1 / safe1[:, None]
    r = g2 - np.sum(g2 * e1, axis=1, keepdims=True) * e1
    nr = np.linalg.norm(r, axis=1)
    det_scale = np.maximum(n1 * n2, 1e-300)
    planar = (n1 > 0) & (nr * n1 > DET_GUARD * det_scale)
    e2 = r / np.where(nr > 0, nr, 1.0)[:, None]

    # 2-D coordinates
    P = np.stack([np.sum(x * e1, axis=1), np.sum(x * e2, axis=1)], axis=1)
    G1 = np.stack([n1, np.zeros_like(n1)], axis=1)
    G2 = np.stack([np.sum(g2 * e1, axis=1), nr], axis=1)
    det = G1[:, 0] * G2[:, 1] - G1[:, 1] * G2[:, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        ca = (P[:, 0] * G2[:, 1] - P[:, 1] * G2[:, 0]) / det
        cb = (G1[:, 0] * P[:, 1] - G1[:, 1] * P[:, 0]) / det
    inside = np.abs(ca) + np.abs(cb) <= 1.0
    corners = [G1, G2, -G1, -G2]
    best = P.copy()
    best_d = np.full(len(P), np.inf)
    for k in range(4):
        q = _project_point_segment_2d(P, corners[k], corners[(k + 1) % 4])
        d = np.sum((q - P) ** 2, axis=1)
        take = d < best_d
        best = np.where(take[:, None], q, best)
        best_d = np.where(take, d, best_d)
    proj2 = np.where(inside[:, None], P, best)
    out = proj2[:, :1] * e1 + proj2[:, 1:] * e2

    if not np.all(planar):
        longer = np.where((n1 >= n2)[:, None], g1, g2)
        seg = project_segment(x, longer)
        out = np.where(planar[:, None], out, seg)
    return out


def prox_max_pair(x, u, v, alpha):
    """Prox of ``y -> alpha max(|<u, y>|, |<v, y>|)`` evaluated at ``x``."""
    x = np.asarray(x, dtype=float)
    p = project_parallelogram(x, alpha * np.asarray(u, dtype=float), alpha * np.asarray(v, dtype=float))
    return x - p.reshape(x.shape)
