"""Real roots of cubics (Cardano) and quartics (Ferrari).

The ``*_batch`` helpers operate elementwise on arrays of coefficients and
are what the slope projections call inside the solver loop; the scalar
functions are thin wrappers with the filtering/merging applied.
"""
from __future__ import annotations

import numpy as np

from .errors import NoPositiveRoot

MERGE_RTOL = 1e-7
RESIDUAL_RTOL = 1e-8
CASE_2B_RTOL = 1e-10
FLUSH_RTOL = 1e-150


def _flush(c):
    # coefficients this far below the largest one only cause under/overflow
    return np.where(np.abs(c) < FLUSH_RTOL, 0.0, c)


def _cubic_eval(c3, c2, c1, c0, y):
    return ((c3 * y + c2) * y + c1) * y + c0


def _newton_polish(coeffs, x, steps):
    """Newton steps on the polynomial with ``coeffs`` (highest first).

    A step is kept only if it does not increase the residual.
    """
    x = np.array(x, dtype=float)
    with np.errstate(all="ignore"):
        for _ in range(steps):
            f = np.zeros_like(x)
            df = np.zeros_like(x)
            for c in coeffs:
                df = df * x + f
                f = f * x + c
            x_new = x - f / df
            f_new = np.zeros_like(x)
            for c in coeffs:
                f_new = f_new * x_new + c
            better = np.isfinite(x_new) & (np.abs(f_new) <= np.abs(f))
            x = np.where(better, x_new, x)
    return x


def cardano_largest_root_batch(c3, c2, c1, c0) -> np.ndarray:
    """Largest real root of each cubic ``c3 y^3 + c2 y^2 + c1 y + c0``.

    When the cubic has a single real root that root is returned.
    """
    c3, c2, c1, c0 = np.broadcast_arrays(*(np.asarray(c, dtype=float) for c in (c3, c2, c1, c0)))
    scale = np.maximum.reduce([np.abs(c3), np.abs(c2), np.abs(c1), np.abs(c0)])
    scale = np.where(scale > 0, scale, 1.0)
    k3, k2, k1, k0 = (_flush(c / scale) for c in (c3, c2, c1, c0))
    a, b, c = k2 / k3, k1 / k3, k0 / k3
    p = b - a * a / 3.0
    q = 2.0 * a ** 3 / 27.0 - a * b / 3.0 + c
    disc = (q / 2.0) ** 2 + (p / 3.0) ** 3
    with np.errstate(all="ignore"):
        # one real root
        sq = np.sqrt(np.maximum(disc, 0.0))
        A = -np.where(q >= 0, 1.0, -1.0) * np.cbrt(np.abs(q) / 2.0 + sq)
        B = np.where(A != 0, -p / (3.0 * A), 0.0)
        x_one = A + B
        # three real roots: the trigonometric form is accurate for the root of
        # largest magnitude only; the other two come from the deflated quadratic
        mneg = np.sqrt(np.maximum(-p / 3.0, 0.0))
        m3 = mneg ** 3
        arg = np.where(m3 > 0, (-q / 2.0) / np.where(m3 > 0, m3, 1.0), 0.0)
        theta = np.arccos(np.clip(arg, -1.0, 1.0)) / 3.0
        trig = np.stack([2.0 * mneg * np.cos(theta - 2.0 * np.pi * k / 3.0) for k in range(3)]) - a / 3.0
        pick = np.argmax(np.abs(trig), axis=0)
        r1 = np.take_along_axis(trig, pick[None], axis=0)[0]
        r1 = _newton_polish((k3, k2, k1, k0), r1, 2)
        e1 = a + r1
        e0 = np.where(np.abs(r1) > 1.0, -c / np.where(r1 != 0, r1, 1.0), b + e1 * r1)
        q1, q2 = _quadratic_roots(e1, e0)
        x_three = np.fmax(r1, np.fmax(q1, q2))  # complex quadratic: r1 is the only real root
    y = np.where((disc > 0) | ~np.isfinite(x_three), x_one - a / 3.0, x_three)
    return _newton_polish((k3, k2, k1, k0), y, 4)


def cardano_one_real_root(c3, c2, c1, c0) -> float:
    if c3 == 0:
        raise ValueError("leading cubic coefficient must be nonzero")
    return float(cardano_largest_root_batch(c3, c2, c1, c0))


def _quadratic_roots(B, C):
    """Real roots of ``y^2 + B y + C``; NaN where complex."""
    disc = B * B - 4.0 * C
    tol = 1e-12 * (B * B + 4.0 * np.abs(C))
    real = disc >= -tol
    sq = np.sqrt(np.maximum(disc, 0.0))
    y1 = -0.5 * (B + np.where(B >= 0, sq, -sq))
    with np.errstate(divide="ignore", invalid="ignore"):
        y2 = np.where(y1 != 0, C / y1, -0.5 * (B - np.where(B >= 0, sq, -sq)))
    return np.where(real, y1, np.nan), np.where(real, y2, np.nan)


def ferrari_candidates_batch(q4, q3, q2, q1, q0) -> np.ndarray:
    """Up to four real roots per quartic, shape ``(..., 4)``, NaN-padded.

    Roots are Newton-polished but neither sorted nor de-duplicated.
    """
    q4, q3, q2, q1, q0 = np.broadcast_arrays(*(np.asarray(c, dtype=float) for c in (q4, q3, q2, q1, q0)))
    scale = np.maximum.reduce([np.abs(q4), np.abs(q3), np.abs(q2), np.abs(q1), np.abs(q0)])
    scale = np.where(scale > 0, scale, 1.0)
    k = [_flush(c / scale) for c in (q4, q3, q2, q1, q0)]
    a, b, c, d = k[1] / k[0], k[2] / k[0], k[3] / k[0], k[4] / k[0]
    p = b - 3.0 * a * a / 8.0
    q = c - a * b / 2.0 + a ** 3 / 8.0
    r = d - a * c / 4.0 + a * a * b / 16.0 - 3.0 * a ** 4 / 256.0

    # resolvent: 8m^3 + 8p m^2 + (2p^2 - 8r) m - q^2 = 0, largest root m >= 0
    m = cardano_largest_root_batch(8.0, 8.0 * p, 2.0 * p * p - 8.0 * r, -q * q)
    m = np.maximum(m, 0.0)
    use_ferrari = m > 1e-14 * (1.0 + np.abs(p))
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.sqrt(2.0 * m)
        qs = np.where(use_ferrari, q / (2.0 * np.where(use_ferrari, s, 1.0)), 0.0)
        f1, f2 = _quadratic_roots(-s, p / 2.0 + m + qs)
        f3, f4 = _quadratic_roots(s, p / 2.0 + m - qs)
        # biquadratic y^4 + p y^2 + r
        z1, z2 = _quadratic_roots(p, r)
        b1 = np.where(z1 >= 0, np.sqrt(z1), np.nan)
        b2 = np.where(z2 >= 0, np.sqrt(z2), np.nan)
    ys = np.stack([
        np.where(use_ferrari, f1, b1), np.where(use_ferrari, f2, -b1),
        np.where(use_ferrari, f3, b2), np.where(use_ferrari, f4, -b2),
    ], axis=-1)
    xs = ys - (a / 4.0)[..., None]
    kk = tuple(ki[..., None] for ki in k)
    return _newton_polish(kk, xs, 3)


def poly_scale(coeffs, x) -> np.ndarray:
    """``sum |c_i| |x|^i``: the natural magnitude of evaluating a polynomial at ``x``."""
    ax = np.abs(x)
    out = np.zeros_like(ax, dtype=float)
    for c in coeffs:
        out = out * ax + abs(c)
    return out


def ferrari_real_roots(q4, q3, q2, q1, q0) -> list[float]:
    """All real roots of the quartic, ascending, near-duplicates merged."""
    if q4 == 0:
        raise ValueError("leading quartic coefficient must be nonzero")
    coeffs = (q4, q3, q2, q1, q0)
    cand = ferrari_candidates_batch(*coeffs)
    if q0 != 0:
        # roots of very different magnitude: the small ones are the large
        # roots of the reversed quartic, where Ferrari keeps them accurate
        rev = ferrari_candidates_batch(q0, q1, q2, q3, q4)
        rev = rev[np.isfinite(rev) & (rev != 0)]
        k = max(abs(c) for c in coeffs)
        cand = np.concatenate([cand, _newton_polish(tuple(c / k for c in coeffs), 1.0 / rev, 3)])
    cand = cand[np.isfinite(cand)]
    if cand.size:
        res = np.abs(np.polyval(coeffs, cand))
        cand = cand[res <= RESIDUAL_RTOL * poly_scale(coeffs, cand)]
    roots: list[float] = []
    for x in np.sort(cand):
        if roots and abs(x - roots[-1]) < MERGE_RTOL * max(1.0, abs(x)):
            continue
        roots.append(float(x))
    return roots


def lambda_quartic(R1, R2, R3, R4, R5):
    """Expanded coefficients of ``(l^2 + R1 l + R2)^2 - (R3 l^2 + 2 R4 l + R5)``."""
    return (1.0, 2.0 * R1, R1 * R1 + 2.0 * R2 - R3, 2.0 * (R1 * R2 - R4), R2 * R2 - R5)


def _lambda_residual(R, lam):
    R1, R2, R3, R4, R5 = R
    g = lam * lam + R1 * lam + R2
    f = g * g - (R3 * lam * lam + 2.0 * R4 * lam + R5)
    df = 2.0 * g * (2.0 * lam + R1) - 2.0 * R3 * lam - 2.0 * R4
    mag = g * g + np.abs(R3) * lam * lam + 2.0 * np.abs(R4 * lam) + np.abs(R5)
    return f, df, mag


def resolvent_lambda_batch(R1, R2, R3, R4, R5):
    """Closed-form positive root of ``(l^2+R1 l+R2)^2 = R3 l^2 + 2R4 l + R5``.

    Follows the perfect-square construction: a real root ``y0`` of the
    zero-discriminant cubic, then the threshold case (``R3 + 2 y0 ~ 0``) or
    the sign-fixed quadratic. Returns ``(lam, ok)`` where ``ok`` flags rows
    whose result is finite, positive and a root to working precision.
    """
    R = [np.asarray(x, dtype=float) for x in np.broadcast_arrays(R1, R2, R3, R4, R5)]
    R1, R2, R3, R4, R5 = R
    y0 = cardano_largest_root_batch(
        -2.0, R1 * R1 - R3 - 4.0 * R2, 2.0 * R1 * R4 - 2.0 * R2 * R3 - 2.0 * R5, R4 * R4 - R3 * R5)
    e = R3 + 2.0 * y0
    g = R4 + R1 * y0
    case_b = np.abs(e) <= CASE_2B_RTOL * np.maximum.reduce([np.abs(R3), np.abs(y0), np.ones_like(y0)])
    case_b |= e < 0  # exact arithmetic rules this out; treat round-off as the threshold case
    with np.errstate(invalid="ignore", divide="ignore"):
        lam_b = 0.5 * (-R1 + np.sqrt(np.maximum(R1 * R1 - 4.0 * R2 + 2.0 * R3, 0.0)))
        r = np.sqrt(np.maximum(e, 0.0)) * np.where(g >= 0, 1.0, -1.0)
        c0 = R2 + y0 - g / r
        lam_c = 0.5 * (r - R1 + np.sqrt((r - R1) ** 2 - 4.0 * c0))
    lam = np.where(case_b, lam_b, lam_c)
    for _ in range(2):
        f, df, _mag = _lambda_residual(R, lam)
        with np.errstate(invalid="ignore", divide="ignore"):
            step = np.where(df != 0, f / df, 0.0)
        f_new, _, _ = _lambda_residual(R, lam - step)
        lam = np.where(np.isfinite(step) & (np.abs(f_new) <= np.abs(f)), lam - step, lam)
    f, _, mag = _lambda_residual(R, lam)
    ok = np.isfinite(lam) & (lam > 0) & (np.abs(f) <= RESIDUAL_RTOL * np.maximum(mag, 1e-300))
    return lam, ok


def resolvent_positive_lambda(R1, R2, R3, R4, R5) -> float:
    """The unique positive root of the max-slope multiplier quartic.

    Falls back to :func:`ferrari_real_roots` on the expanded quartic if the
    closed form breaks down numerically.
    """
    lam, ok = resolvent_lambda_batch(R1, R2, R3, R4, R5)
    if bool(ok):
        return float(lam)
    pos = [x for x in ferrari_real_roots(*lambda_quartic(R1, R2, R3, R4, R5)) if x > 0]
    if not pos:
        raise NoPositiveRoot(f"no positive root for R = {(R1, R2, R3, R4, R5)}")
    return pos[-1] if len(pos) == 1 else _pick_secular(pos, R1, R2, R3, R4, R5)


def _pick_secular(pos, *R):
    # several positive roots only arise from round-off; keep the best-conditioned residual
    res = [abs(_lambda_residual(R, x)[0]) / max(_lambda_residual(R, x)[2], 1e-300) for x in pos]
    return pos[int(np.argmin(res))]
