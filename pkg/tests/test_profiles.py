import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.polynomial import Polynomial

from delone_lab.profiles import (INF, PolyPiece, QuotientProfile, ball_mode, coordinate_profile,
                                 cosine, poly_bump, profile_from_json, sine_bump)


def central_difference(prof, s, order, h):
    if order == 1:
        return (prof.eval(s + h, 0) - prof.eval(s - h, 0)) / (2 * h)
    return (prof.eval(s + h, 0) - 2 * prof.eval(s, 0) + prof.eval(s - h, 0)) / h ** 2


@pytest.mark.parametrize("prof", [sine_bump(0.4), poly_bump(0.4, 3), cosine(2 * math.pi),
                                  ball_mode(0.5, 3), coordinate_profile(0.4)])
@pytest.mark.parametrize("order", [1, 2])
def test_analytic_derivative_matches_fd_at_second_order(prof, order):
    s = np.linspace(-0.3, 0.3, 13)
    exact = prof.eval(s, order)
    e1 = np.max(np.abs(central_difference(prof, s, order, 1e-3) - exact))
    e2 = np.max(np.abs(central_difference(prof, s, order, 5e-4) - exact))
    if e1 > 1e-8:
        assert 3.0 < e1 / e2 < 5.0   # O(h^2)


def test_smoothness_orders():
    assert poly_bump(0.3, 3).smoothness == 3
    assert sine_bump(0.3).smoothness == 1
    assert cosine(1.0).smoothness == INF
    assert ball_mode(0.5, 1).smoothness == 1


def test_bump_vanishes_with_derivatives_at_ends():
    b = poly_bump(0.3, 3)
    for k in range(3):
        assert np.allclose(b.eval(np.array([-0.3, 0.3]), k), 0.0, atol=1e-12)
    assert b.eval(np.array([0.0]), 0)[0] == 1.0


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 0.5), st.integers(1, 5), st.floats(-0.9, 0.9))
def test_bump_sum_and_product_rules(eps, m, u):
    f, g = poly_bump(eps, m), sine_bump(eps)
    s = np.array([u * eps])
    assert np.allclose((f + g).eval(s, 1), f.eval(s, 1) + g.eval(s, 1))
    lhs = (f * g).eval(s, 1)
    assert np.allclose(lhs, f.eval(s, 1) * g.eval(s, 0) + f.eval(s, 0) * g.eval(s, 1))


def test_quotient_rule_against_closed_form():
    f = PolyPiece(Polynomial([1.0, 2.0]), -1, 1, INF)
    g = PolyPiece(Polynomial([3.0, 0.0, 1.0]), -1, 1, INF)
    q = QuotientProfile(f, g)
    s = np.linspace(-0.9, 0.9, 7)
    h = (1 + 2 * s) / (3 + s ** 2)
    dh = (2 * (3 + s ** 2) - (1 + 2 * s) * 2 * s) / (3 + s ** 2) ** 2
    assert np.allclose(q.eval(s, 0), h)
    assert np.allclose(q.eval(s, 1), dh)


def test_json_roundtrip():
    p = poly_bump(0.3, 4, 0.1, 2.0) + sine_bump(0.3) * 0.5
    q = profile_from_json(p.to_json())
    s = np.linspace(-0.4, 0.4, 9)
    assert np.array_equal(p.eval(s, 0), q.eval(s, 0))


def test_ball_mode_orthonormal_and_rayleigh():
    from delone_lab.quadrature import composite_nodes, merge_breaks
    eps = 0.5
    x, w = composite_nodes(merge_breaks(-eps, eps, [], 0.05), 24)
    V = np.array([ball_mode(eps, j).eval(x, 0) for j in range(1, 6)])
    assert np.max(np.abs((V * w) @ V.T - np.eye(5))) < 1e-12
    d1 = ball_mode(eps, 1).eval(x, 1)
    assert math.fsum(w * d1 * d1) == pytest.approx(math.pi ** 2, abs=1e-8)
