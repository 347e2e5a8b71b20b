"""Closed-form projections onto the polyhedral and affine mesh constraints.

Every function takes the footprint subvector of the height vector and
returns a new array; coordinates outside the footprint are the caller's
business (see :func:`gradeopt.solver.embed`).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegeneratePositions

PIVOT_GUARD = 1e-12


@dataclass(frozen=True)
class IntervalSpec:
    entries: dict  # vertex index -> (lower, upper)

    def __post_init__(self):
        for i, (lo, hi) in self.entries.items():
            if lo > hi:
                raise ValueError(f"interval on vertex {i} has lower {lo} > upper {hi}")


@dataclass(frozen=True)
class EdgeMinSlopeSpec:
    """``z_i - z_j >= alpha``; with ``upper`` set the slab ``alpha <= z_i - z_j <= upper``."""

    i: int
    j: int
    alpha: float
    upper: float | None = None

    def __post_init__(self):
        if self.i == self.j:
            raise ValueError("edge slope constraint needs two distinct vertices")
        if self.upper is not None and self.upper < self.alpha:
            raise ValueError("edge slope upper bound below lower bound")


@dataclass(frozen=True)
class LowPointSpec:
    center: int
    neighbors: tuple
    alphas: tuple

    def __post_init__(self):
        if not self.neighbors:
            raise ValueError("low point needs at least one neighbor")
        if self.center in self.neighbors:
            raise ValueError("low point center listed among its neighbors")
        if len(self.neighbors) != len(self.alphas):
            raise ValueError("one alpha per low point neighbor required")


@dataclass(frozen=True)
class EdgeAlignSpec:
    path: tuple
    t: tuple

    def __post_init__(self):
        if len(self.path) < 3:
            raise ValueError("edge alignment needs a path of at least 3 vertices")
        if np.any(np.diff(self.t) <= 0):
            raise ValueError("edge alignment path revisits a planar position")


@dataclass(frozen=True)
class SurfaceAlignSpec:
    members: tuple

    def __post_init__(self):
        if len(self.members) < 3:
            raise ValueError("surface alignment needs at least 3 vertices")


def project_interval(z, lower, upper) -> np.ndarray:
    return np.clip(np.asarray(z, dtype=float), lower, upper)


def project_edge_min_slope(zi, zj, alpha):
    """Project onto the halfspace ``zi - zj >= alpha`` (elementwise)."""
    deficit = np.maximum(alpha - (np.asarray(zi, dtype=float) - zj), 0.0)
    return zi + 0.5 * deficit, zj - 0.5 * deficit


def project_edge_slope_slab(zi, zj, lo, hi):
    """Project onto ``lo <= zi - zj <= hi``; ``hi`` may be ``inf``."""
    d = np.asarray(zi, dtype=float) - zj
    shift = 0.5 * (np.clip(d, lo, hi) - d)
    return zi + shift, zj - shift


def project_low_point(z, alphas) -> np.ndarray:
    """Project ``z = (z_center, z_neighbors...)`` onto ``{x_i - x_1 >= alpha_i}``.

    Sorts the shifted neighbor values, takes the largest prefix length ``k``
    whose last element is no larger than the prefix mean, and lifts every
    neighbor to at least that mean.
    """
    z = np.asarray(z, dtype=float)
    alphas = np.asarray(alphas, dtype=float)
    shifted = z[1:] - alphas
    delta = np.concatenate(([z[0]], np.sort(shifted, kind="stable")))
    means = np.cumsum(delta) / np.arange(1, len(delta) + 1)
    k = int(np.nonzero(delta <= means)[0][-1])  # 0-based, k=0 always qualifies
    x1 = means[k]
    out = np.empty_like(z)
    out[0] = x1
    out[1:] = np.maximum(x1, shifted) + alphas
    return out


def cumulative_shadow(points) -> np.ndarray:
    p = np.asarray(points, dtype=float)
    seg = np.hypot(*np.diff(p, axis=0).T)
    return np.concatenate(([0.0], np.cumsum(seg)))


def project_edge_alignment(z, t) -> np.ndarray:
    """Least-squares line through ``(t_i, z_i)``, evaluated at ``t``."""
    z = np.asarray(z, dtype=float)
    t = np.asarray(t, dtype=float)
    tc = t - t.mean()
    stt = tc @ tc
    if stt <= PIVOT_GUARD * max(1.0, float(t @ t)):
        raise DegeneratePositions("edge alignment: all path positions coincide")
    beta = (tc @ z) / stt
    return z.mean() + beta * tc


def project_surface_alignment(z, positions) -> np.ndarray:
    """Least-squares plane through ``(x_i, y_i, z_i)``, evaluated at the positions."""
    z = np.asarray(z, dtype=float)
    p = np.asarray(positions, dtype=float)
    pc = p - p.mean(axis=0)
    scale = max(float(np.max(np.abs(pc))), 1e-300)
    pc = pc / scale
    # centering decouples the intercept, leaving a 2x2 system for the slopes
    gxx, gxy, gyy = pc[:, 0] @ pc[:, 0], pc[:, 0] @ pc[:, 1], pc[:, 1] @ pc[:, 1]
    det = gxx * gyy - gxy * gxy
    if det <= PIVOT_GUARD * max(gxx * gyy, 1e-300):
        raise DegeneratePositions("surface alignment: positions are collinear")
    rx, ry = pc[:, 0] @ z, pc[:, 1] @ z
    beta = (gyy * rx - gxy * ry) / det
    gamma = (gxx * ry - gxy * rx) / det
    return z.mean() + beta * pc[:, 0] + gamma * pc[:, 1]


def check_low_point(z, alphas) -> float:
    z = np.asarray(z, dtype=float)
    return float(np.max(np.maximum(0.0, np.asarray(alphas) - (z[1:] - z[0]))))


def positions_collinear(positions: Sequence) -> bool:
    p = np.asarray(positions, dtype=float)
    pc = p - p.mean(axis=0)
    sv = np.linalg.svd(pc, compute_uv=False)
    return len(sv) < 2 or sv[1] <= PIVOT_GUARD * max(sv[0], 1e-300)
