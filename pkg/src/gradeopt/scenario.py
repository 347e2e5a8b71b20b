"""Scenario documents: parsing, validation, term wiring and solution export.

A scenario is one JSON document. Vertex ids in the file are 1-based; all
in-memory structures are 0-based.
"""
from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import curvature, linear
from .curvature import CurvatureObjective
from .errors import (CollinearTriangle, DanglingIndex, DegeneratePositions,
                     ParseError, ValidationError)
from .linear import (EdgeAlignSpec, EdgeMinSlopeSpec, IntervalSpec,
                     LowPointSpec, SurfaceAlignSpec)
from .mesh import Mesh, build_mesh, triangle_frame
from .slope import MaxSlopeSpec, OrientedMinSlopeSpec
from .solver import ProxTerm, SolverConfig, constraint_residuals, objective_total
from .terms import (AbsLinearKernel, EdgeAlignKernel, EdgeSlopeKernel,
                    IntervalKernel, LowPointKernel, MaxPairKernel,
                    MaxSlopeKernel, MinSlopeKernel, SurfaceAlignKernel)

CONSTRAINT_TYPES = ("interval", "edge_min_slope", "low_point", "edge_align",
                    "surface_align", "max_slope", "min_slope_oriented")
UNIT_RTOL = 1e-9
DEFAULT_CONTOUR_INTERVAL = 0.25


@dataclass(frozen=True)
class Drain:
    points: np.ndarray
    side: str | None = None


@dataclass
class ConstraintGroup:
    """One constraint object of the document, expanded into specs."""

    type: str
    specs: list
    source: dict = field(default_factory=dict)


@dataclass
class Scenario:
    mesh: Mesh
    initial_heights: np.ndarray
    constraints: list  # of ConstraintGroup
    objective: CurvatureObjective | None = None
    drains: list = field(default_factory=list)
    solver: SolverConfig = field(default_factory=SolverConfig)

    @property
    def specs(self) -> list:
        return [s for g in self.constraints for s in g.specs]


@dataclass
class SolutionReport:
    final_heights: np.ndarray
    diagnostics: dict
    triangle_residuals: np.ndarray
    triangle_feasible: np.ndarray


# -- drains ------------------------------------------------------------------

def _nearest_on_segment(c, a, b):
    d = b - a
    dd = float(d @ d)
    t = 0.0 if dd == 0 else min(1.0, max(0.0, float((c - a) @ d) / dd))
    return a + t * d


def assign_drain_directions(mesh: Mesh, drains, triangles=None) -> np.ndarray:
    """Unit vector from each triangle centroid toward its nearest drain.

    Ties go to the earlier drain. A centroid lying on a drain takes the
    segment normal on the drain's declared ``side`` (relative to the
    polyline direction).
    """
    if not drains:
        raise ValidationError("nearest-drain directions requested but no drains declared")
    tris = mesh.triangles if triangles is None else triangles
    scale = max(mesh.extent(), 1.0)
    out = np.empty((len(tris), 2))
    for r, tri in enumerate(tris):
        c = mesh.centroid(tri)
        best = (math.inf, None, None, None)
        for di, dr in enumerate(drains):
            pts = dr.points
            segs = [(pts[0], pts[0])] if len(pts) == 1 else zip(pts[:-1], pts[1:])
            for a, b in segs:
                p = _nearest_on_segment(c, a, b)
                dist = float(np.hypot(*(p - c)))
                if dist < best[0] - 1e-12 * scale:
                    best = (dist, p, (a, b), di)
        dist, p, (a, b), di = best
        if dist > 1e-12 * scale:
            out[r] = (p - c) / dist
            continue
        side = drains[di].side
        d = b - a
        if side is None or not np.any(d):
            raise ValidationError(
                f"triangle {tuple(k + 1 for k in tri)} lies on drain {di + 1}, "
                "which declares no side")
        normal = np.array([-d[1], d[0]]) if side == "left" else np.array([d[1], -d[0]])
        out[r] = normal / np.hypot(*normal)
    return out


# -- parsing -----------------------------------------------------------------


def _require(doc, key, ctx="scenario"):
    if key not in doc:
        raise ValidationError(f"{ctx}: missing key {key!r}")
    return doc[key]


def _vertex(idx, n, ctx):
    if isinstance(idx, bool) or not isinstance(idx, (int, np.integer)):
        if isinstance(idx, float) and idx.is_integer():
            idx = int(idx)
        else:
            raise ValidationError(f"{ctx}: vertex id {idx!r} is not an integer")
    if not 1 <= idx <= n:
        raise ValidationError(f"{ctx}: vertex id {idx} outside 1..{n}")
    return int(idx) - 1


def _number(x, ctx, name):
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ValidationError(f"{ctx}: {name} must be a number, got {x!r}")
    x = float(x)
    if not math.isfinite(x):
        raise ValidationError(f"{ctx}: {name} must be finite")
    return x


def _parse_drains(raw) -> list:
    drains = []
    for k, d in enumerate(raw or []):
        ctx = f"drain {k + 1}"
        side = None
        if isinstance(d, dict):
            side = d.get("side")
            if side not in (None, "left", "right"):
                raise ValidationError(f"{ctx}: side must be 'left' or 'right'")
            d = _require(d, "points", ctx)
        pts = np.asarray(d, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) == 0:
            raise ValidationError(f"{ctx}: expected a nonempty list of [x, y] points")
        drains.append(Drain(pts, side))
    return drains


def _triangles_of(c, mesh, ctx):
    raw = c.get("triangles", "all")
    if raw == "all":
        return list(mesh.triangles)
    known = set(mesh.triangles)
    tris = []
    for t in raw:
        tri = tuple(sorted(_vertex(k, mesh.n, ctx) for k in t))
        if tri not in known:
            raise ValidationError(f"{ctx}: {[k + 1 for k in tri]} is not a mesh triangle")
        tris.append(tri)
    return tris


def _edge_alphas(c, mesh, center, nbrs, ctx):
    if "alphas" in c:
        alphas = [_number(a, ctx, "alpha") for a in c["alphas"]]
    elif "slopes" in c:
        slopes = [_number(a, ctx, "slope") for a in c["slopes"]]
        alphas = [s * float(np.hypot(*(mesh.xy[j] - mesh.xy[center]))) for s, j in zip(slopes, nbrs)]
    else:
        s = _number(c.get("slope", 0.0), ctx, "slope")
        alphas = [s * float(np.hypot(*(mesh.xy[j] - mesh.xy[center]))) for j in nbrs]
    if len(alphas) != len(nbrs):
        raise ValidationError(f"{ctx}: one slope margin per neighbor required")
    return tuple(alphas)


def _parse_constraint(c, k, mesh, drains) -> ConstraintGroup:
    if not isinstance(c, dict) or "type" not in c:
        raise ValidationError(f"constraint {k}: expected an object with a 'type'")
    kind = c["type"]
    ctx = f"constraint {k} ({kind})"
    n = mesh.n
    try:
        if kind == "interval":
            entries = {}
            for e in _require(c, "entries", ctx):
                i, lo, hi = e
                lo = -math.inf if lo is None else float(lo)
                hi = math.inf if hi is None else float(hi)
                entries[_vertex(i, n, ctx)] = (lo, hi)
            specs = [IntervalSpec(entries)]
        elif kind == "edge_min_slope":
            i, j = _vertex(_require(c, "i", ctx), n, ctx), _vertex(_require(c, "j", ctx), n, ctx)
            if (min(i, j), max(i, j)) not in mesh.edges:
                raise ValidationError(f"{ctx}: ({i + 1}, {j + 1}) is not a mesh edge")
            length = float(np.hypot(*(mesh.xy[i] - mesh.xy[j])))
            if "alpha" in c:
                alpha = _number(c["alpha"], ctx, "alpha")
            else:
                alpha = _number(_require(c, "slope", ctx), ctx, "slope") * length
            upper = c.get("upper")
            upper = None if upper is None else _number(upper, ctx, "upper")
            specs = [EdgeMinSlopeSpec(i, j, alpha, upper)]
        elif kind == "low_point":
            center = _vertex(_require(c, "center", ctx), n, ctx)
            if "neighbors" in c:
                nbrs = tuple(_vertex(j, n, ctx) for j in c["neighbors"])
            else:
                nbrs = tuple(mesh.neighbors(center))
            specs = [LowPointSpec(center, nbrs, _edge_alphas(c, mesh, center, nbrs, ctx))]
        elif kind == "edge_align":
            path = tuple(_vertex(j, n, ctx) for j in _require(c, "path", ctx))
            for a, b in zip(path[:-1], path[1:]):
                if (min(a, b), max(a, b)) not in mesh.edges:
                    raise ValidationError(f"{ctx}: path step ({a + 1}, {b + 1}) is not a mesh edge")
            t = tuple(float(x) for x in linear.cumulative_shadow(mesh.xy[list(path)]))
            specs = [EdgeAlignSpec(path, t)]
        elif kind == "surface_align":
            if "triangles" in c:
                members = sorted({v for tri in _triangles_of(c, mesh, ctx) for v in tri})
            else:
                members = [_vertex(j, n, ctx) for j in _require(c, "vertices", ctx)]
            if len(set(members)) != len(members):
                raise ValidationError(f"{ctx}: duplicate vertices")
            if linear.positions_collinear(mesh.xy[members]):
                raise ValidationError(f"{ctx}: vertex positions are collinear")
            specs = [SurfaceAlignSpec(tuple(members))]
        elif kind == "max_slope":
            s = _number(_require(c, "slope", ctx), ctx, "slope")
            specs = [MaxSlopeSpec(t, s) for t in _triangles_of(c, mesh, ctx)]
        elif kind == "min_slope_oriented":
            s = _number(_require(c, "slope", ctx), ctx, "slope")
            tris = _triangles_of(c, mesh, ctx)
            if "directions" in c:
                qs = np.asarray(c["directions"], dtype=float).reshape(-1, 2)
                if len(qs) != len(tris):
                    raise ValidationError(f"{ctx}: one direction per triangle required")
            else:
                direction = c.get("direction", "nearest_drain")
                if direction == "nearest_drain":
                    qs = assign_drain_directions(mesh, drains, tris)
                else:
                    qs = np.tile(np.asarray(direction, dtype=float).reshape(2), (len(tris), 1))
            norms = np.hypot(qs[:, 0], qs[:, 1])
            if np.any(np.abs(norms - 1.0) > UNIT_RTOL):
                raise ValidationError(f"{ctx}: drain direction is not a unit vector")
            specs = [OrientedMinSlopeSpec(t, s, tuple(q)) for t, q in zip(tris, qs)]
        else:
            raise ValidationError(f"constraint {k}: unknown type {kind!r}")
    except ValidationError:
        raise
    except (ValueError, TypeError, KeyError) as exc:
        raise ValidationError(f"{ctx}: {exc}") from exc
    return ConstraintGroup(kind, specs, c)


def _parse_solver(raw) -> SolverConfig:
    raw = raw or {}
    known = {"method", "gamma", "tolerance", "max_iterations"}
    extra = set(raw) - known
    if extra:
        raise ValidationError(f"solver: unknown keys {sorted(extra)}")
    try:
        return SolverConfig(**raw)
    except (ValueError, TypeError) as exc:
        raise ValidationError(f"solver: {exc}") from exc


def parse_scenario(text: str) -> Scenario:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.lineno, exc.msg) from exc
    if not isinstance(doc, dict):
        raise ParseError(1, "top level must be a JSON object")
    verts = np.asarray(_require(doc, "vertices"), dtype=float)
    if verts.ndim != 2 or verts.shape[1] != 2:
        raise ValidationError("vertices: expected a list of [x, y] pairs")
    n = len(verts)
    edges = [(_vertex(a, n, "edges"), _vertex(b, n, "edges")) for a, b in _require(doc, "edges")]
    try:
        mesh = build_mesh(verts, edges)
    except (CollinearTriangle, DanglingIndex, ValueError) as exc:
        raise ValidationError(f"mesh: {exc}") from exc

    z0 = np.asarray(doc.get("initial_heights", np.zeros(n)), dtype=float)
    if z0.shape != (n,) or not np.all(np.isfinite(z0)):
        raise ValidationError(f"initial_heights: expected {n} finite numbers")
    drains = _parse_drains(doc.get("drains"))
    groups = [_parse_constraint(c, k + 1, mesh, drains)
              for k, c in enumerate(doc.get("constraints", []))]

    objective = None
    if doc.get("objective") is not None:
        o = doc["objective"]
        try:
            objective = CurvatureObjective(curvature.build_pairs(mesh), o.get("norm", "l1"),
                                           float(o.get("weight", 1.0)))
        except (ValueError, CollinearTriangle) as exc:
            raise ValidationError(f"objective: {exc}") from exc
    return Scenario(mesh, z0, groups, objective, drains, _parse_solver(doc.get("solver")))


def load_scenario(path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        return parse_scenario(fh.read())


def _num(x):
    if x is None or not math.isfinite(x):
        return None
    return float(x)


def _render_group(g: ConstraintGroup) -> dict:
    one = lambda v: v + 1  # noqa: E731
    if g.type == "interval":
        (spec,) = g.specs
        return {"type": "interval",
                "entries": [[one(i), _num(lo), _num(hi)] for i, (lo, hi) in sorted(spec.entries.items())]}
    if g.type == "edge_min_slope":
        (s,) = g.specs
        out = {"type": "edge_min_slope", "i": one(s.i), "j": one(s.j), "alpha": s.alpha}
        if s.upper is not None:
            out["upper"] = s.upper
        return out
    if g.type == "low_point":
        (s,) = g.specs
        return {"type": "low_point", "center": one(s.center),
                "neighbors": [one(j) for j in s.neighbors], "alphas": list(s.alphas)}
    if g.type == "edge_align":
        (s,) = g.specs
        return {"type": "edge_align", "path": [one(j) for j in s.path]}
    if g.type == "surface_align":
        (s,) = g.specs
        return {"type": "surface_align", "vertices": [one(j) for j in s.members]}
    tris = [[one(k) for k in s.tri] for s in g.specs]
    if g.type == "max_slope":
        return {"type": "max_slope", "triangles": tris, "slope": g.specs[0].s_max if g.specs else 0.0}
    return {"type": "min_slope_oriented", "triangles": tris,
            "slope": g.specs[0].s_min if g.specs else 0.0,
            "directions": [list(s.q) for s in g.specs]}


def scenario_document(sc: Scenario) -> dict:
    doc = {
        "vertices": sc.mesh.xy.tolist(),
        "edges": [[i + 1, j + 1] for i, j in sorted(sc.mesh.edges)],
        "initial_heights": [float(z) for z in sc.initial_heights],
        "drains": [({"points": d.points.tolist(), "side": d.side} if d.side else d.points.tolist())
                   for d in sc.drains],
        "constraints": [_render_group(g) for g in sc.constraints],
        "solver": {"method": sc.solver.method, "gamma": sc.solver.gamma,
                   "tolerance": sc.solver.tolerance, "max_iterations": int(sc.solver.max_iterations)},
    }
    if sc.objective is not None:
        doc["objective"] = {"norm": sc.objective.norm_kind, "weight": sc.objective.weight}
    return doc


def render_scenario(sc: Scenario) -> str:
    return json.dumps(scenario_document(sc), indent=1) + "\n"


# -- terms -------------------------------------------------------------------

def spec_term(spec, mesh: Mesh, label: str = "") -> ProxTerm:
    """Wrap one constraint spec as a footprint-local projection term."""
    if isinstance(spec, IntervalSpec):
        idx = sorted(spec.entries)
        lo = np.array([spec.entries[i][0] for i in idx])
        hi = np.array([spec.entries[i][1] for i in idx])
        return ProxTerm(tuple(idx), IntervalKernel(lo, hi), label)
    if isinstance(spec, EdgeMinSlopeSpec):
        hi = math.inf if spec.upper is None else spec.upper
        return ProxTerm((spec.i, spec.j), EdgeSlopeKernel(spec.alpha, hi), label)
    if isinstance(spec, LowPointSpec):
        return ProxTerm((spec.center,) + tuple(spec.neighbors), LowPointKernel(tuple(spec.alphas)), label)
    if isinstance(spec, EdgeAlignSpec):
        return ProxTerm(spec.path, EdgeAlignKernel(tuple(spec.t)), label)
    if isinstance(spec, SurfaceAlignSpec):
        pos = mesh.xy[list(spec.members)]
        if linear.positions_collinear(pos):
            raise DegeneratePositions(f"{label}: collinear positions")
        return ProxTerm(spec.members, SurfaceAlignKernel(pos), label)
    if isinstance(spec, MaxSlopeSpec):
        return ProxTerm(spec.tri, MaxSlopeKernel(tuple(triangle_frame(mesh, spec.tri)), spec.s_max), label)
    if isinstance(spec, OrientedMinSlopeSpec):
        return ProxTerm(spec.tri, MinSlopeKernel(tuple(triangle_frame(mesh, spec.tri)), spec.s_min, spec.q), label)
    raise TypeError(f"unsupported constraint spec {type(spec).__name__}")


def group_label(g: ConstraintGroup, k: int) -> str:
    return f"{g.type}:{k}"


def constraint_terms(sc: Scenario) -> list[ProxTerm]:
    terms = []
    for k, g in enumerate(sc.constraints, start=1):
        for s in g.specs:
            terms.append(spec_term(s, sc.mesh, group_label(g, k)))
    return terms


def objective_terms(obj: CurvatureObjective | None) -> list[ProxTerm]:
    if obj is None or obj.weight == 0:
        return []
    terms = []
    for p in obj.pairs:
        if obj.norm_kind == "l1":
            terms.append(ProxTerm(p.footprint, AbsLinearKernel(p.uvec, obj.weight), "curvature:u"))
            terms.append(ProxTerm(p.footprint, AbsLinearKernel(p.vvec, obj.weight), "curvature:v"))
        else:
            terms.append(ProxTerm(p.footprint, MaxPairKernel(p.uvec, p.vvec, obj.weight), "curvature"))
    return terms


def scenario_terms(sc: Scenario, with_objective: bool = True) -> list[ProxTerm]:
    terms = constraint_terms(sc)
    return terms + objective_terms(sc.objective) if with_objective else terms


def group_residuals(sc: Scenario, heights) -> list[dict]:
    """Largest term residual per constraint object, in document order."""
    h = np.asarray(heights, dtype=float)
    out = []
    for k, g in enumerate(sc.constraints, start=1):
        terms = [spec_term(s, sc.mesh, group_label(g, k)) for s in g.specs]
        r = constraint_residuals(terms, h) if terms else np.zeros(0)
        out.append({"constraint": group_label(g, k), "terms": len(terms),
                    "max_residual": float(r.max()) if r.size else 0.0})
    return out


# -- export ------------------------------------------------------------------

def triangle_residuals(mesh: Mesh, terms, heights) -> np.ndarray:
    """Per triangle, the largest residual among constraint terms living on it.

    A term lives on a triangle when its footprint is a subset of the
    triangle's corners (slope constraints, edge constraints on its sides,
    single-vertex intervals).
    """
    h = np.asarray(heights, dtype=float)
    res = constraint_residuals(terms, h)
    out = np.zeros(len(mesh.triangles))
    index = {tri: r for r, tri in enumerate(mesh.triangles)}
    by_vertex: dict = {}
    for r, tri in enumerate(mesh.triangles):
        for v in tri:
            by_vertex.setdefault(v, []).append(r)
    for t, rr in zip(terms, res):
        if t.kind != "constraint" or rr == 0:
            continue
        fp = set(t.footprint)
        if len(fp) == 3 and tuple(sorted(fp)) in index:
            cands = [index[tuple(sorted(fp))]]
        elif len(fp) <= 2:
            cands = [r for r in by_vertex.get(next(iter(fp)), []) if fp <= set(mesh.triangles[r])]
        else:
            continue
        for r in cands:
            out[r] = max(out[r], rr)
    return out


def build_report(sc: Scenario, terms, heights, diagnostics: dict) -> SolutionReport:
    tr = triangle_residuals(sc.mesh, terms, heights)
    return SolutionReport(np.asarray(heights, dtype=float), diagnostics, tr, tr < sc.solver.tolerance)


def contour_segments(mesh: Mesh, heights, interval: float = DEFAULT_CONTOUR_INTERVAL) -> list:
    """Piecewise-linear level lines as ``(level, x1, y1, x2, y2)`` tuples."""
    if not interval > 0:
        raise ValueError("contour interval must be positive")
    h = np.asarray(heights, dtype=float)
    xy = mesh.xy
    segs = []
    for tri in mesh.triangles:
        zt = h[list(tri)]
        lo, hi = math.ceil(zt.min() / interval), math.floor(zt.max() / interval)
        for m in range(lo, hi + 1):
            level = m * interval
            pts = []
            for a, b in ((0, 1), (1, 2), (2, 0)):
                za, zb = zt[a], zt[b]
                if (za > level) != (zb > level):
                    t = (level - za) / (zb - za)
                    pts.append(xy[tri[a]] + t * (xy[tri[b]] - xy[tri[a]]))
            if len(pts) == 2 and np.any(pts[0] != pts[1]):
                segs.append((level, *pts[0], *pts[1]))
    return segs


def export_solution(report: SolutionReport, sc: Scenario, out_dir,
                    contour_interval: float = DEFAULT_CONTOUR_INTERVAL) -> list[str]:
    os.makedirs(out_dir, exist_ok=True)
    fmt = lambda x: format(float(x), ".17g")  # noqa: E731
    paths = []

    def table(name, header, rows):
        path = os.path.join(out_dir, name)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
        paths.append(path)

    table("heights.csv", ["id", "x", "y", "z"],
          [[i + 1, fmt(x), fmt(y), fmt(z)] for i, ((x, y), z) in enumerate(zip(sc.mesh.xy, report.final_heights))])
    table("triangles.csv", ["triangle", "v1", "v2", "v3", "max_residual", "feasible"],
          [[r + 1, *(k + 1 for k in tri), fmt(report.triangle_residuals[r]), int(report.triangle_feasible[r])]
           for r, tri in enumerate(sc.mesh.triangles)])
    table("contours.csv", ["level", "x1", "y1", "x2", "y2"],
          [[fmt(v) for v in s] for s in contour_segments(sc.mesh, report.final_heights, contour_interval)])
    path = os.path.join(out_dir, "report.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.diagnostics, fh, indent=1, sort_keys=True)
        fh.write("\n")
    paths.append(path)
    return paths


def initial_objective(sc: Scenario) -> float:
    return objective_total(objective_terms(sc.objective), sc.initial_heights)

