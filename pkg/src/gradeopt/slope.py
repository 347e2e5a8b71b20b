"""Triangle slope projections.

A slope constraint on one triangle depends only on its normal (-u, -v, 1),
so the three-height projection reduces to minimizing the strictly convex
quadratic

    phi(u, v) = 1/2 [u v] [[A, C], [C, B]] [u v]^T - wa u - wb v

over the constraint set in the (u, v) plane, then mapping the minimizer
back to heights. Two constraint kinds are handled here:

* maximum slope: ``u^2 + v^2 <= s^2`` (a disk),
* oriented minimum slope: the triangle descends toward a planar unit
  direction ``q`` with slope at least ``s``; after rotating by ``q`` and
  scaling the along-``q`` axis by ``s`` this becomes the left half of a
  hyperbola, ``u < 0, v^2 - u^2 + 1 <= 0``.

Internally each problem is normalized (heights centered, frame divided by
its largest offset, heights divided by the matching scale) so that the
Lagrange multiplier polynomials stay well conditioned; every rescale is
undone in the back-map.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import NoCandidateFound
from .mesh import TriangleFrame
from .polynomial import (ferrari_candidates_batch, resolvent_lambda_batch,
                         resolvent_positive_lambda)

log = logging.getLogger(__name__)

VERTEX_FEASIBLE_TOL = 1e-12
BOUNDARY_TOL = 1e-4
D_ZERO_RTOL = 1e-10


@dataclass(frozen=True)
class MaxSlopeSpec:
    tri: tuple
    s_max: float

    def __post_init__(self):
        if not self.s_max > 0:
            raise ValueError("maximum slope must be positive")


@dataclass(frozen=True)
class OrientedMinSlopeSpec:
    tri: tuple
    s_min: float
    q: tuple

    def __post_init__(self):
        if not self.s_min > 0:
            raise ValueError("minimum slope must be positive")
        q = np.asarray(self.q, dtype=float)
        nq = float(np.hypot(*q))
        if nq == 0:
            raise ValueError("drain direction must be nonzero")
        object.__setattr__(self, "q", (float(q[0] / nq), float(q[1] / nq)))


@dataclass(frozen=True)
class QuadraticForm2D:
    A: float
    B: float
    C: float
    wa: float
    wb: float
    frame: TriangleFrame
    centering_offset: float
    scale_record: dict = field(default_factory=dict)

    def vertex(self):
        det = self.A * self.B - self.C * self.C
        return ((self.B * self.wa - self.C * self.wb) / det,
                (self.A * self.wb - self.C * self.wa) / det)

    def phi(self, u, v):
        return (0.5 * (self.A * u * u + 2 * self.C * u * v + self.B * v * v)
                - self.wa * u - self.wb * v)


# -- vectorized core ---------------------------------------------------------

def _coefficients(F, W):
    """A, B, C, wa, wb for frames ``F`` (K, 4) and centered heights ``W`` (K, 3)."""
    a1, b1, a2, b2 = F.T
    A = 2.0 * (a1 * a1 + a2 * a2 - a1 * a2)
    B = 2.0 * (b1 * b1 + b2 * b2 - b1 * b2)
    C = 2.0 * a1 * b1 + 2.0 * a2 * b2 - a1 * b2 - a2 * b1
    wa = 3.0 * (W[:, 0] * a1 + W[:, 1] * a2)
    wb = 3.0 * (W[:, 0] * b1 + W[:, 1] * b2)
    return A, B, C, wa, wb


def _heights(F, u, v):
    a1, b1, a2, b2 = F.T
    h3 = -((a1 + a2) * u + (b1 + b2) * v) / 3.0
    return np.column_stack([a1 * u + b1 * v + h3, a2 * u + b2 * v + h3, h3])


def _normalize(F, W):
    F = np.asarray(F, dtype=float).reshape(-1, 4)
    W = np.asarray(W, dtype=float).reshape(-1, 3)
    offset = W.mean(axis=1)
    L = np.max(np.abs(F), axis=1)
    return F / L[:, None], W - offset[:, None], offset, L


def max_slope_resolvent(A, B, C, wa, wb):
    """R1..R5 of the multiplier equation ``(l^2 + R1 l + R2)^2 = R3 l^2 + 2 R4 l + R5``."""
    return (A + B, A * B - C * C, wa * wa + wb * wb, wa * wa * B + wb * wb * A - 2.0 * wa * wb * C,
            (wa * B - wb * C) ** 2 + (wb * A - wa * C) ** 2)


def max_slope_batch(F, W, s) -> np.ndarray:
    """Project each row of heights ``W`` onto ``{slope <= s}`` for frames ``F``."""
    Fn, Wc, offset, L = _normalize(F, W)
    s = np.broadcast_to(np.asarray(s, dtype=float), offset.shape)
    hs = L * s
    Wn = Wc / hs[:, None]
    A, B, C, wa, wb = _coefficients(Fn, Wn)
    det = A * B - C * C
    u0 = (B * wa - C * wb) / det
    v0 = (A * wb - C * wa) / det
    out = np.array(W, dtype=float).reshape(-1, 3)
    active = u0 * u0 + v0 * v0 - 1.0 > VERTEX_FEASIBLE_TOL
    if not np.any(active):
        return out
    A, B, C, wa, wb = (x[active] for x in (A, B, C, wa, wb))
    R = max_slope_resolvent(A, B, C, wa, wb)
    lam, ok = resolvent_lambda_batch(*R)
    for k in np.nonzero(~ok)[0]:
        lam[k] = resolvent_positive_lambda(*(r[k] for r in R))
    u, v = _disk_point(A, B, C, wa, wb, lam)
    out[active] = _heights(Fn[active], u, v) * hs[active, None] + offset[active, None]
    return out


def _disk_point(A, B, C, wa, wb, lam):
    # secular-equation Newton polish: |x(lam)|^2 - 1 is decreasing for lam > 0
    for _ in range(2):
        a11, a22 = A + lam, B + lam
        d = a11 * a22 - C * C
        u = (wa * a22 - wb * C) / d
        v = (wb * a11 - wa * C) / d
        # (H + lam I)^{-1} x
        iu = (u * a22 - v * C) / d
        iv = (v * a11 - u * C) / d
        f = u * u + v * v - 1.0
        df = -2.0 * (u * iu + v * iv)
        with np.errstate(divide="ignore", invalid="ignore"):
            lam_new = lam - np.where(df != 0, f / df, 0.0)
        lam = np.where(np.isfinite(lam_new) & (lam_new > 0), lam_new, lam)
    a11, a22 = A + lam, B + lam
    d = a11 * a22 - C * C
    u = (wa * a22 - wb * C) / d
    v = (wb * a11 - wa * C) / d
    nrm = np.hypot(u, v)
    return u / nrm, v / nrm


def _min_slope_frames(F, s, q):
    """Rotate frames by Q = [[q1, q2], [q2, -q1]] and scale the first axis by s."""
    a1, b1, a2, b2 = F.T
    q1, q2 = q[:, 0], q[:, 1]
    return np.column_stack([s * (q1 * a1 + q2 * b1), q2 * a1 - q1 * b1,
                            s * (q1 * a2 + q2 * b2), q2 * a2 - q1 * b2])


def _hyperbola_candidates(A, B, C, wa, wb):
    """KKT points on the left hyperbola branch; returns (u, v, valid) of shape (K, 4)."""
    R1, R2 = B - A, C * C - A * B
    R3 = wa * wa - wb * wb
    R4 = wa * wa * B + wb * wb * A - 2.0 * wa * wb * C
    R5 = (wa * B - wb * C) ** 2 - (wa * C - wb * A) ** 2
    lam = ferrari_candidates_batch(1.0, 2.0 * R1, R1 * R1 + 2.0 * R2 - R3,
                                   2.0 * (R1 * R2 - R4), R2 * R2 - R5)
    A, B, C, wa, wb = (x[:, None] for x in (A, B, C, wa, wb))
    D = -lam * lam + (A - B) * lam + (A * B - C * C)
    Du = lam * wa + wa * B - wb * C
    Dv = -lam * wb + wb * A - wa * C
    with np.errstate(divide="ignore", invalid="ignore"):
        u = Du / D
        v = Dv / D
        # D = 0: second KKT row plus the boundary equation, negative u root
        bl = B + lam
        qa = C * C - bl * bl
        disc = (wb * C) ** 2 - qa * (wb * wb + bl * bl)
        u0 = (wb * C + np.sqrt(np.maximum(disc, 0.0))) / qa
        v0 = (wb - C * u0) / bl
    dzero = np.abs(D) <= D_ZERO_RTOL * (np.abs(A) + np.abs(B) + np.abs(lam)) ** 2
    u = np.where(dzero, u0, u)
    v = np.where(dzero, v0, v)
    g = v * v - u * u + 1.0
    valid = (np.isfinite(lam) & (lam > 0) & np.isfinite(u) & np.isfinite(v) & (u < 0)
             & (np.abs(g) <= BOUNDARY_TOL * np.maximum(1.0, u * u)))
    return u, v, valid


def _branch_seeds(A, B, C, wa, wb):
    """KKT candidates snapped onto the left branch through their ``v``.

    When ``A`` is tiny next to ``B`` (a small minimum slope) the multiplier
    quartic has a near-double root and ``u = Du / D`` loses most of its
    digits, while ``v`` stays accurate. Every snapped seed is feasible, so
    comparing them by ``phi`` is safe; the polish step restores precision.
    """
    cu, cv, strict = _hyperbola_candidates(A, B, C, wa, wb)
    usable = np.isfinite(cu) & np.isfinite(cv)
    cu = -np.sqrt(1.0 + np.where(usable, cv, 0.0) ** 2)
    return cu, cv, usable, strict


def _hyperbola_fallback(A, B, C, wa, wb):
    """Global minimizer of phi on the left branch by sampling plus golden refinement."""
    from scipy.optimize import minimize_scalar

    det = A * B - C * C
    v0 = (A * wb - C * wa) / det
    u0 = (B * wa - C * wb) / det
    T = np.arcsinh(10.0 * (1.0 + abs(u0) + abs(v0))) + 1.0
    tau = np.linspace(-T, T, 4001)

    def phi(t):
        u, v = -np.cosh(t), np.sinh(t)
        return 0.5 * (A * u * u + 2 * C * u * v + B * v * v) - wa * u - wb * v

    k = int(np.argmin(phi(tau)))
    lo, hi = tau[max(k - 1, 0)], tau[min(k + 1, len(tau) - 1)]
    t = minimize_scalar(phi, bounds=(lo, hi), method="bounded", options={"xatol": 1e-13}).x
    return -np.cosh(t), np.sinh(t)


def _polish_on_branch(A, B, C, wa, wb, v, steps=8):
    """Newton steps for phi along ``u = -cosh t, v = sinh t``, kept only if phi drops."""
    t = np.arcsinh(v)

    def phi_derivs(t):
        u, v = -np.cosh(t), np.sinh(t)
        gu, gv = A * u + C * v - wa, C * u + B * v - wb
        f = 0.5 * (A * u * u + 2 * C * u * v + B * v * v) - wa * u - wb * v
        d1 = -gu * v - gv * u
        d2 = A * v * v + 2 * C * u * v + B * u * u + gu * u + gv * v
        return f, d1, d2

    f, d1, d2 = phi_derivs(t)
    for _ in range(steps):
        with np.errstate(divide="ignore", invalid="ignore"):
            t_new = t - np.where(d2 > 0, d1 / d2, 0.0)
        f_new, d1_new, d2_new = phi_derivs(t_new)
        keep = np.isfinite(f_new) & (f_new <= f)
        t = np.where(keep, t_new, t)
        f, d1, d2 = np.where(keep, f_new, f), np.where(keep, d1_new, d1), np.where(keep, d2_new, d2)
    return -np.cosh(t), np.sinh(t)


def min_slope_batch(F, W, s, q, fallback=True) -> np.ndarray:
    """Project each row of ``W`` onto the oriented minimum slope set ``(q, s)``."""
    Fn, Wc, offset, L = _normalize(F, W)
    s = np.broadcast_to(np.asarray(s, dtype=float), offset.shape)
    q = np.asarray(q, dtype=float).reshape(-1, 2)
    q = np.broadcast_to(q, (len(offset), 2))
    Fh = _min_slope_frames(Fn, s, q)
    Wn = Wc / L[:, None]
    A, B, C, wa, wb = _coefficients(Fh, Wn)
    det = A * B - C * C
    u0 = (B * wa - C * wb) / det
    v0 = (A * wb - C * wa) / det
    out = np.array(W, dtype=float).reshape(-1, 3)
    active = ~((u0 < 0) & (v0 * v0 - u0 * u0 + 1.0 <= VERTEX_FEASIBLE_TOL))
    if not np.any(active):
        return out
    A, B, C, wa, wb = (x[active] for x in (A, B, C, wa, wb))
    cu, cv, valid, _ = _branch_seeds(A, B, C, wa, wb)
    phi = 0.5 * (A[:, None] * cu * cu + 2 * C[:, None] * cu * cv + B[:, None] * cv * cv) \
        - wa[:, None] * cu - wb[:, None] * cv
    phi = np.where(valid, phi, np.inf)
    best = np.argmin(phi, axis=1)
    rows = np.arange(len(best))
    u, v = cu[rows, best], cv[rows, best]
    for k in np.nonzero(~valid.any(axis=1))[0]:
        if not fallback:
            raise NoCandidateFound(
                f"no KKT point on the left hyperbola branch (A,B,C,wa,wb)="
                f"{(A[k], B[k], C[k], wa[k], wb[k])}")
        log.warning("oriented min slope: closed form found no candidate, using boundary search")
        u[k], v[k] = _hyperbola_fallback(A[k], B[k], C[k], wa[k], wb[k])
    u, v = _polish_on_branch(A, B, C, wa, wb, v)
    idx = np.nonzero(active)[0]
    out[idx] = _heights(Fh[idx], u, v) * L[idx, None] + offset[idx, None]
    return out


# -- scalar API ----------------------------------------------------------------

def reduce_to_uv(frame: TriangleFrame, w1, w2, w3) -> QuadraticForm2D:
    """Reduce the three-height projection objective to a quadratic in (u, v)."""
    w = np.array([w1, w2, w3], dtype=float)
    offset = float(w.mean())
    A, B, C, wa, wb = (float(x[0]) for x in _coefficients(np.asarray(frame, dtype=float)[None, :],
                                                           (w - offset)[None, :]))
    return QuadraticForm2D(A, B, C, wa, wb, TriangleFrame(*map(float, frame)), offset,
                           {"length": 1.0, "height": 1.0})


def recover_heights(form: QuadraticForm2D, u, v):
    """Map a (u, v) point of ``form`` back to the three triangle heights."""
    rec = form.scale_record
    h = _heights(np.asarray(form.frame, dtype=float)[None, :], np.atleast_1d(u), np.atleast_1d(v))[0]
    h = h * rec.get("height", 1.0) + form.centering_offset
    return tuple(float(x) for x in h)


def project_max_slope(frame: TriangleFrame, w1, w2, w3, s_max):
    return tuple(float(x) for x in max_slope_batch(np.asarray(frame, float), [w1, w2, w3], s_max)[0])


def project_oriented_min_slope(frame: TriangleFrame, w1, w2, w3, spec: OrientedMinSlopeSpec):
    out = min_slope_batch(np.asarray(frame, float), [w1, w2, w3], spec.s_min, spec.q, fallback=False)
    return tuple(float(x) for x in out[0])


def max_slope_violation(F, H, s):
    """Normalized residual ``max(0, (u^2 + v^2) / s^2 - 1)`` per row."""
    from .mesh import normal_uv

    F = np.asarray(F, dtype=float).reshape(-1, 4)
    H = np.asarray(H, dtype=float).reshape(-1, 3)
    u, v = normal_uv(F.T, H[:, 0], H[:, 1], H[:, 2])
    return np.maximum(0.0, (u * u + v * v) / np.asarray(s, dtype=float) ** 2 - 1.0)


def min_slope_violation(F, H, s, q):
    """Normalized residual of the oriented minimum slope constraint per row.

    In the rotated, scaled coordinates ``(uh, vh)`` the set is
    ``uh <= 0, vh^2 - uh^2 + 1 <= 0``; on the wrong side (``uh > 0``) the
    residual continues as ``vh^2 + uh^2 + 1`` so it stays positive.
    """
    from .mesh import normal_uv

    F = np.asarray(F, dtype=float).reshape(-1, 4)
    H = np.asarray(H, dtype=float).reshape(-1, 3)
    q = np.broadcast_to(np.asarray(q, dtype=float).reshape(-1, 2), (len(F), 2))
    u, v = normal_uv(F.T, H[:, 0], H[:, 1], H[:, 2])
    uh = (q[:, 0] * u + q[:, 1] * v) / np.asarray(s, dtype=float)
    vh = q[:, 1] * u - q[:, 0] * v
    g = np.where(uh <= 0, vh * vh - uh * uh + 1.0, vh * vh + uh * uh + 1.0)
    return np.maximum(0.0, g)


def check_slope_feasibility(frame: TriangleFrame, h1, h2, h3, spec) -> float:
    F = np.asarray(frame, dtype=float)
    if isinstance(spec, MaxSlopeSpec):
        return float(max_slope_violation(F, [h1, h2, h3], spec.s_max)[0])
    if isinstance(spec, OrientedMinSlopeSpec):
        return float(min_slope_violation(F, [h1, h2, h3], spec.s_min, spec.q)[0])
    raise TypeError(f"not a slope constraint: {spec!r}")
