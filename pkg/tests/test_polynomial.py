import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from gradeopt.errors import NoPositiveRoot
from gradeopt.polynomial import (cardano_largest_root_batch, cardano_one_real_root,
                                 ferrari_real_roots, lambda_quartic,
                                 resolvent_lambda_batch, resolvent_positive_lambda)
from gradeopt.slope import max_slope_resolvent
from oracles import real_roots_bisection

coef = st.floats(-100, 100, allow_nan=False)


def test_cardano_examples():
    assert cardano_one_real_root(1, 0, 0, -1) == pytest.approx(1.0)
    assert min(abs(cardano_one_real_root(1, -6, 11, -6) - r) for r in (1, 2, 3)) < 1e-12
    assert cardano_one_real_root(1, 0, 1, 0) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(ValueError):
        cardano_one_real_root(0, 1, 1, 1)


@settings(max_examples=500, deadline=None)
@given(st.floats(0.01, 100) | st.floats(-100, -0.01), coef, coef, coef)
def test_cardano_residual(c3, c2, c1, c0):
    y = cardano_one_real_root(c3, c2, c1, c0)
    scale = max(abs(c3), abs(c2), abs(c1), abs(c0)) * max(1.0, abs(y)) ** 3
    assert abs(np.polyval([c3, c2, c1, c0], y)) <= 1e-9 * max(1.0, scale)


def test_cardano_returns_largest_real_root():
    rng = np.random.default_rng(0)
    c = rng.normal(size=(2000, 4))
    y = cardano_largest_root_batch(*c.T)
    for row, yy in zip(c, y):
        assert yy == pytest.approx(max(real_roots_bisection(row)), abs=1e-7)


def test_ferrari_examples():
    assert_allclose(ferrari_real_roots(*np.poly([1, -2, 3, -4])), [-4, -2, 1, 3], atol=1e-12)
    assert ferrari_real_roots(1, 0, 0, 0, 1) == []
    assert_allclose(ferrari_real_roots(1, 0, -2, 0, 1), [-1, 1], atol=1e-7)
    with pytest.raises(ValueError):
        ferrari_real_roots(0, 1, 1, 1, 1)


def test_ferrari_matches_bisection_scan():
    rng = np.random.default_rng(1)
    for _ in range(2000):
        c = rng.normal(size=5)
        got = ferrari_real_roots(*c)
        ref = real_roots_bisection(c)
        assert len(got) == len(ref), (c, got, ref)
        assert_allclose(got, ref, atol=1e-6, rtol=1e-6)


def test_resolvent_worked_instance():
    R = max_slope_resolvent(2.0, 2.0, -1.0, 3.0, 0.0)
    lam = resolvent_positive_lambda(*R)
    pos = [r for r in ferrari_real_roots(*lambda_quartic(*R)) if r > 0]
    assert pos == [pytest.approx(lam, abs=1e-10)]
    # the stationary point lies on the unit circle
    A, B, C, wa, wb = 2.0, 2.0, -1.0, 3.0, 0.0
    u, v = np.linalg.solve([[A + lam, C], [C, B + lam]], [wa, wb])
    assert u * u + v * v == pytest.approx(1.0, abs=1e-10)


def test_resolvent_threshold_construction():
    # (l^2 + l - 2)^2 = 0 built around y0 = -1; the largest cubic root is 3.5
    R = (1.0, -1.0, 2.0, 1.0, -3.0)
    assert resolvent_positive_lambda(*R) == pytest.approx(1.0, abs=1e-9)


def test_resolvent_threshold_with_constant_uses_fallback():
    # R3 + 2 y0 = 0 for the only real y0 but a nonzero leftover constant
    R = (1.0, 1.0, 2.0, 1.0, 5.0)
    lam, ok = resolvent_lambda_batch(*R)
    assert not ok
    assert resolvent_positive_lambda(*R) == pytest.approx(1.0, abs=1e-9)


def test_resolvent_no_positive_root():
    with pytest.raises(NoPositiveRoot):
        resolvent_positive_lambda(10.0, 30.0, 0.0, 0.0, 1.0)


def test_resolvent_perturbation_is_stable():
    rng = np.random.default_rng(5)
    for _ in range(200):
        A, B = rng.uniform(0.5, 3, size=2)
        C = rng.uniform(-0.9, 0.9) * np.sqrt(A * B)
        wa, wb = rng.normal(size=2) * 5
        if np.hypot(*np.linalg.solve([[A, C], [C, B]], [wa, wb])) <= 1.01:
            continue  # vertex inside the disk: no positive multiplier
        R = np.array(max_slope_resolvent(A, B, C, wa, wb))
        lam = resolvent_positive_lambda(*R)
        dR = rng.normal(size=5) * 1e-9 * np.maximum(1, np.abs(R))
        lam2 = resolvent_positive_lambda(*(R + dR))
        q = np.polyder(np.array(lambda_quartic(*R)))
        bound = 1e-9 * np.sum(np.maximum(1, np.abs(R)) * (1 + lam) ** 4) / abs(np.polyval(q, lam))
        assert abs(lam2 - lam) <= 10 * bound + 1e-12
