"""Fixed planar mesh geometry and per-triangle precomputation.

Vertex ids are 0-based here; file formats use 1-based ids and convert at
the boundary (see :mod:`gradeopt.scenario`).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, NamedTuple

import numpy as np

from .errors import CollinearTriangle, DanglingIndex

COLLINEAR_RTOL = 1e-12


@dataclass(frozen=True)
class PlanarVertex:
    id: int
    x: float
    y: float


class TriangleFrame(NamedTuple):
    """Planar offsets of corners 1 and 2 relative to corner 3."""

    a1: float
    b1: float
    a2: float
    b2: float

    @property
    def detAB(self) -> float:
        return self.a1 * self.b2 - self.a2 * self.b1

    def matrix(self) -> np.ndarray:
        return np.array([[self.a1, self.b1], [self.a2, self.b2]])


@dataclass(frozen=True, eq=False)
class Mesh:
    xy: np.ndarray
    edges: frozenset
    triangles: tuple
    _neighbors: dict = field(default_factory=dict, repr=False)

    @property
    def n(self) -> int:
        return len(self.xy)

    @property
    def vertices(self) -> list[PlanarVertex]:
        return [PlanarVertex(i, float(x), float(y)) for i, (x, y) in enumerate(self.xy)]

    def neighbors(self, i: int) -> list[int]:
        if not self._neighbors:
            adj: dict[int, set] = {k: set() for k in range(self.n)}
            for a, b in self.edges:
                adj[a].add(b)
                adj[b].add(a)
            self._neighbors.update({k: sorted(v) for k, v in adj.items()})
        return self._neighbors[i]

    def extent(self) -> float:
        if self.n == 0:
            return 0.0
        return float(np.max(np.ptp(self.xy, axis=0)))

    def centroid(self, tri) -> np.ndarray:
        return self.xy[list(tri)].mean(axis=0)

    def adjacent_pairs(self) -> list[tuple]:
        """Triangle pairs sharing exactly one edge.

        Returns ``(k, i, l, j)`` footprints ordered as (P1, P2, P3, P4): the
        shared edge is P2-P4 = (i, j), P1 = k is the far corner of the first
        triangle and P3 = l that of the second.
        """
        by_edge: dict[tuple, list] = {}
        for tri in self.triangles:
            for e in combinations(tri, 2):
                by_edge.setdefault(e, []).append(tri)
        pairs = []
        for (i, j), tris in sorted(by_edge.items()):
            for t1, t2 in combinations(tris, 2):
                (k,) = set(t1) - {i, j}
                (l,) = set(t2) - {i, j}
                pairs.append((k, i, l, j))
        return pairs

    def __eq__(self, other):
        if not isinstance(other, Mesh):
            return NotImplemented
        return (np.array_equal(self.xy, other.xy) and self.edges == other.edges
                and self.triangles == other.triangles)

    __hash__ = None


def _as_xy(vertices) -> np.ndarray:
    if len(vertices) and isinstance(vertices[0], PlanarVertex):
        order = sorted(vertices, key=lambda v: v.id)
        if [v.id for v in order] != list(range(len(order))):
            raise DanglingIndex("vertex ids must be unique and cover 0..n-1")
        return np.array([[v.x, v.y] for v in order], dtype=float)
    xy = np.asarray(vertices, dtype=float).reshape(-1, 2)
    return xy


def build_mesh(vertices, edges: Iterable) -> Mesh:
    """Build a mesh and derive its triangles from the edge set.

    A triangle is every index triple whose three edges all exist. Raises
    :class:`CollinearTriangle` if a derived triangle has (numerically) zero
    shadow area and :class:`DanglingIndex` for out-of-range edge endpoints.
    """
    xy = _as_xy(vertices)
    n = len(xy)
    if not np.all(np.isfinite(xy)):
        raise ValueError("vertex coordinates must be finite")
    es = set()
    for e in edges:
        i, j = (int(k) for k in e)
        if not (0 <= i < n and 0 <= j < n):
            raise DanglingIndex(f"edge ({i}, {j}) references a missing vertex")
        if i == j:
            raise DanglingIndex(f"edge ({i}, {j}) is a self loop")
        es.add((min(i, j), max(i, j)))

    adj: dict[int, set] = {k: set() for k in range(n)}
    for i, j in es:
        adj[i].add(j)
        adj[j].add(i)
    tris = []
    for i, j in sorted(es):
        for k in sorted(adj[i] & adj[j]):
            if k > j:
                tris.append((i, j, k))

    ext = float(np.max(np.ptp(xy, axis=0))) if n else 0.0
    mesh = Mesh(xy=xy, edges=frozenset(es), triangles=tuple(tris))
    for tri in tris:
        fr = _frame(xy, tri)
        if abs(fr.detAB) <= COLLINEAR_RTOL * ext * ext:
            raise CollinearTriangle(tri)
    return mesh


def shadow_length(p: PlanarVertex, q: PlanarVertex) -> float:
    return math.hypot(p.x - q.x, p.y - q.y)


def _frame(xy, tri) -> TriangleFrame:
    i, j, k = tri
    return TriangleFrame(xy[i, 0] - xy[k, 0], xy[i, 1] - xy[k, 1],
                         xy[j, 0] - xy[k, 0], xy[j, 1] - xy[k, 1])


def triangle_frame(mesh: Mesh, tri) -> TriangleFrame:
    fr = _frame(mesh.xy, tri)
    ext = mesh.extent()
    if abs(fr.detAB) <= COLLINEAR_RTOL * ext * ext:
        raise CollinearTriangle(tri)
    return fr


def frame_from_points(p1, p2, p3) -> TriangleFrame:
    return TriangleFrame(p1[0] - p3[0], p1[1] - p3[1], p2[0] - p3[0], p2[1] - p3[1])


def normal_uv(frame: TriangleFrame, h1, h2, h3):
    """Return (u, v) such that (-u, -v, 1) is the rescaled upward normal.

    Works elementwise on arrays of heights.
    """
    a1, b1, a2, b2 = frame
    det = a1 * b2 - a2 * b1
    t1 = np.asarray(h1) - h3
    t2 = np.asarray(h2) - h3
    u = (b2 * t1 - b1 * t2) / det
    v = (a1 * t2 - a2 * t1) / det
    return u, v


def frames_array(mesh: Mesh, tris=None) -> np.ndarray:
    """Stack frames of ``tris`` (default: all triangles) into a (K, 4) array."""
    tris = np.asarray(mesh.triangles if tris is None else tris, dtype=int).reshape(-1, 3)
    p = mesh.xy
    return np.column_stack([
        p[tris[:, 0], 0] - p[tris[:, 2], 0], p[tris[:, 0], 1] - p[tris[:, 2], 1],
        p[tris[:, 1], 0] - p[tris[:, 2], 0], p[tris[:, 1], 1] - p[tris[:, 2], 1],
    ])
