"""Synthetic grading scenarios: corner-drained and side-drained parking lots
and a roundabout.

Each preset is built around a certificate surface ``h*`` that satisfies
every constraint it declares (ridges fall on mesh edges, alignment paths
are straight in ``h*``), so the generated problems are feasible by
construction. The initial heights are ``h*`` plus a smooth terrain
disturbance that breaks the slope limits.
"""
from __future__ import annotations

import numpy as np

PRESETS = ("parking-corner", "parking-side", "roundabout")
MAX_SLOPE = 0.04
MIN_SLOPE = 0.005
BASE_ELEVATION = 10.0
PAD_TOLERANCE = 0.05


def _grid(nx, ny, dx, dy):
    """Rectangular grid with diagonals mirrored about the center lines."""
    xs, ys = np.arange(nx) * dx, np.arange(ny) * dy
    xy = np.array([(x, y) for y in ys for x in xs])
    vid = lambda i, j: j * nx + i  # noqa: E731
    edges = set()
    for j in range(ny):
        for i in range(nx):
            if i + 1 < nx:
                edges.add((vid(i, j), vid(i + 1, j)))
            if j + 1 < ny:
                edges.add((vid(i, j), vid(i, j + 1)))
    cx, cy = (nx - 1) / 2.0, (ny - 1) / 2.0
    for j in range(ny - 1):
        for i in range(nx - 1):
            if (i + 0.5 - cx) * (j + 0.5 - cy) > 0:
                edges.add((vid(i, j), vid(i + 1, j + 1)))
            else:
                edges.add((vid(i + 1, j), vid(i, j + 1)))
    return xy, sorted(edges), vid


def _terrain(xy, amplitude, seed):
    rng = np.random.default_rng(seed)
    span = np.ptp(xy, axis=0).max()
    z = np.zeros(len(xy))
    for k in range(1, 4):
        fx, fy = rng.uniform(0.5, 1.5, size=2) * k / span
        ph = rng.uniform(0, 2 * np.pi, size=2)
        z += amplitude / k * np.sin(2 * np.pi * fx * xy[:, 0] + ph[0]) * np.cos(2 * np.pi * fy * xy[:, 1] + ph[1])
    return z


def _document(xy, edges, z0, drains, constraints):
    return {
        "vertices": xy.tolist(),
        "edges": [[i + 1, j + 1] for i, j in edges],
        "initial_heights": [float(z) for z in z0],
        "drains": drains,
        "constraints": [
            {"type": "max_slope", "triangles": "all", "slope": MAX_SLOPE},
            {"type": "min_slope_oriented", "triangles": "all", "slope": MIN_SLOPE,
             "direction": "nearest_drain"},
        ] + constraints,
        "objective": {"norm": "l1", "weight": 1.0},
        "solver": {"method": "dr", "gamma": 1.0, "tolerance": 0.001, "max_iterations": 50000},
    }


def _pad(ids, h):
    return {"type": "interval",
            "entries": [[int(i) + 1, float(h[i] - PAD_TOLERANCE), float(h[i] + PAD_TOLERANCE)] for i in ids]}


def _path(ids):
    return {"type": "edge_align", "path": [int(i) + 1 for i in ids]}


def _parking_corner(n, spacing, seed):
    xy, edges, vid = _grid(n, n, spacing, spacing)
    L = (n - 1) * spacing
    x, y = xy[:, 0], xy[:, 1]
    dist = np.minimum.reduce([x, L - x, y, L - y])
    along = np.where(np.minimum(x, L - x) < np.minimum(y, L - y),
                     L / 2 - np.abs(y - L / 2), L / 2 - np.abs(x - L / 2))
    h = BASE_ELEVATION + 0.02 * dist + 0.015 * along
    m = (n - 1) // 2
    corners = [(0, 0), (n - 1, 0), (n - 1, n - 1), (0, n - 1)]
    sides = [_path([vid(i, 0) for i in range(0, m + 1)]), _path([vid(i, 0) for i in range(m, n)]),
             _path([vid(i, n - 1) for i in range(0, m + 1)]), _path([vid(i, n - 1) for i in range(m, n)]),
             _path([vid(0, j) for j in range(0, m + 1)]), _path([vid(0, j) for j in range(m, n)]),
             _path([vid(n - 1, j) for j in range(0, m + 1)]), _path([vid(n - 1, j) for j in range(m, n)])]
    diagonals = []
    for ci, cj in corners:
        si, sj = (1 if ci == 0 else -1), (1 if cj == 0 else -1)
        diagonals.append(_path([vid(ci + si * k, cj + sj * k) for k in range(m + 1)]))
    building = [vid(i, j) for i in range(m - 1, m + 2) for j in range(m - 1, m + 2)
                if (i, j) != (m, m)]
    drains = [[[0, 0], [L, 0]], [[L, 0], [L, L]], [[L, L], [0, L]], [[0, L], [0, 0]]]
    return xy, edges, h, drains, sides + diagonals + [_pad(building, h)]


def _parking_side(n, spacing, seed):
    xy, edges, vid = _grid(n, n, spacing, spacing)
    W = (n - 1) * spacing
    x, y = xy[:, 0], xy[:, 1]
    h = BASE_ELEVATION + 0.02 * np.minimum(x, W - x) + 0.015 * y
    m = (n - 1) // 2
    lines = [_path([vid(i, j) for j in range(n)]) for i in (0, m, n - 1)]
    building = [vid(i, j) for i in (m - 1, m + 1) for j in range(m - 1, m + 2)]
    drains = [[[0, 0], [0, W]], [[W, 0], [W, W]]]
    return xy, edges, h, drains, lines + [_pad(building, h)]


def _roundabout(rings, sectors, r_in, r_out, seed):
    radii = np.linspace(r_in, r_out, rings)
    theta = 2 * np.pi * np.arange(sectors) / sectors
    xy = np.array([(r * np.cos(t), r * np.sin(t)) for r in radii for t in theta])
    vid = lambda a, k: a * sectors + (k % sectors)  # noqa: E731
    edges = set()
    for a in range(rings):
        for k in range(sectors):
            edges.add(tuple(sorted((vid(a, k), vid(a, k + 1)))))
            if a + 1 < rings:
                edges.add(tuple(sorted((vid(a, k), vid(a + 1, k)))))
                edges.add(tuple(sorted((vid(a, k), vid(a + 1, k + 1)) if k % 2 == 0
                                       else (vid(a, k + 1), vid(a + 1, k)))))
    r = np.hypot(xy[:, 0], xy[:, 1])
    h = BASE_ELEVATION + 0.025 * (r_out - r) + 0.01 * xy[:, 1]
    spokes = [_path([vid(a, k) for a in range(rings)]) for k in (sectors // 4, 7 * sectors // 12, 11 * sectors // 12)]
    island = [vid(0, k) for k in range(sectors)]
    outer = [xy[vid(rings - 1, k)].tolist() for k in range(sectors + 1)]
    return xy, sorted(edges), h, [outer], spokes + [_pad(island, h)]


def build_preset(name: str, seed: int = 0):
    """Return ``(document, certificate_heights)`` for a named preset."""
    if name == "parking-corner":
        xy, edges, h, drains, extra = _parking_corner(11, 5.0, seed)
        amp = 0.6
    elif name == "parking-side":
        xy, edges, h, drains, extra = _parking_side(11, 5.0, seed)
        amp = 0.6
    elif name == "roundabout":
        xy, edges, h, drains, extra = _roundabout(6, 24, 10.0, 30.0, seed)
        amp = 0.5
    else:
        raise ValueError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    z0 = h + _terrain(xy, amp, seed)
    return _document(xy, edges, z0, drains, extra), h


def generate(name: str, seed: int = 0) -> dict:
    return build_preset(name, seed)[0]
