import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from delone_lab.calculus import TlcFunction, comb_function, letter_indicator, mu_integral
from delone_lab.diffusion import (OrbitIndicator, brownian_endpoints, equilibrium_distance,
                                  gauss_rule, heat_kernel, ito_residual, koopman_apply,
                                  orbit_heat_kernel, sample_path, semigroup_apply_mc,
                                  semigroup_apply_quadrature, strong_feller_probe)
from delone_lab.errors import InputError
from delone_lab.golden import GoldenNumber
from delone_lab.hull import HullPoint, same_point, translate
from delone_lab.profiles import cosine, poly_bump, sine_bump

from factories import random_point
from oracles import torus_decay


def torus_cos(torus):
    return TlcFunction(torus, 0, {"z": cosine(2 * math.pi)}, "tile")


def test_heat_kernel_closed_form_and_symmetry():
    assert heat_kernel(1.0, 0.0) == pytest.approx(0.3989423, abs=1e-7)
    s = np.linspace(-3, 3, 31)
    assert np.array_equal(heat_kernel(0.7, s), heat_kernel(0.7, -s))
    with pytest.raises(InputError):
        heat_kernel(0.0, 1.0)


def test_gauss_rule_normalised():
    for t in (0.01, 1.0, 10.0):
        _, w = gauss_rule(t)
        assert math.fsum(w) == 1.0


def test_sample_path_trivial_and_deterministic(fib):
    p = HullPoint(fib)
    assert sample_path(p, [0.0], 1).states == [p]
    a = sample_path(p, np.linspace(0, 1, 11), 42)
    b = sample_path(p, np.linspace(0, 1, 11), 42)
    assert np.array_equal(a.increments, b.increments)
    assert all(same_point(x, y) for x, y in zip(a.states, b.states))


def test_brownian_variance():
    t, n = 0.7, 100000
    w = brownian_endpoints(t, n, 3)
    var = w.var()
    # var of the sample variance of a Gaussian is 2 t^2 / n
    assert abs(var - t) < 3 * math.sqrt(2 * t * t / n)


@pytest.mark.parametrize("t", [0.01, 0.1, 1.0, 10.0])
def test_conservative_quadrature(fib, t):
    one = TlcFunction.constant(fib, 1.0)
    p = HullPoint(fib, None, GoldenNumber(2, 3), 0.17)
    assert semigroup_apply_quadrature(one, t, p).value == 1.0


def test_torus_quadrature(torus):
    f = torus_cos(torus)
    p = HullPoint(torus)
    for t in (0.01, 0.1, 1.0):
        assert semigroup_apply_quadrature(f, t, p).value == pytest.approx(torus_decay(t), abs=1e-12)


def test_small_time_limit_and_finer_rule(fib):
    f = comb_function(fib, 0.4, poly_bump(0.4, 4))
    p = HullPoint(fib, None, 0, 0.1)
    d = [abs(semigroup_apply_quadrature(f, t, p).value - f(p)) for t in (0.01, 0.001, 0.0001)]
    # |T_t f - f| ~ t f''/2 for a C^2 profile: tenfold decay per decade of t
    assert 0.08 < d[1] / d[0] < 0.12 and 0.08 < d[2] / d[1] < 0.12
    a = semigroup_apply_quadrature(f, 0.01, p, nodes=24).value
    b = semigroup_apply_quadrature(f, 0.01, p, nodes=48).value
    assert abs(a - b) < 1e-12


def test_mc_constant_and_torus(fib, torus):
    one = TlcFunction.constant(fib, 1.0)
    assert semigroup_apply_mc(one, 0.3, HullPoint(fib), 1000, 5).value == 1.0
    est = semigroup_apply_mc(torus_cos(torus), 0.1, HullPoint(torus), 100000, 9)
    assert abs(est.value - torus_decay(0.1)) < 3 * est.error


def test_mc_error_scaling(torus):
    f = torus_cos(torus)
    a = semigroup_apply_mc(f, 0.1, HullPoint(torus), 20000, 1).error
    b = semigroup_apply_mc(f, 0.1, HullPoint(torus), 40000, 1).error
    assert 0.6 <= b / a <= 0.85


def test_mc_thread_count_does_not_change_result(torus, monkeypatch):
    f = torus_cos(torus)
    monkeypatch.setenv("DELONE_LAB_THREADS", "1")
    a = semigroup_apply_mc(f, 0.1, HullPoint(torus), 70000, 77)
    monkeypatch.setenv("DELONE_LAB_THREADS", "4")
    b = semigroup_apply_mc(f, 0.1, HullPoint(torus), 70000, 77)
    assert a == b


def test_koopman(fib, torus):
    f = comb_function(fib, 0.4, sine_bump(0.4))
    p = HullPoint(fib, None, 0, 0.2)
    assert koopman_apply(f, 0.0)(p) == f(p)
    g = torus_cos(torus)
    q = HullPoint(torus, None, 0, 0.3)
    assert koopman_apply(g, 0.25)(q) == pytest.approx(math.cos(2 * math.pi * (0.3 + 0.25)))


def test_koopman_commutes_with_semigroup(fib):
    f = comb_function(fib, 0.4, poly_bump(0.4, 3), word="ab", level=1)
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(20):
        p = random_point(fib, rng)
        for tau in (0.1, 1.0):
            lhs = semigroup_apply_quadrature(f, 0.5, translate(p, tau)).value
            rhs = semigroup_apply_quadrature(koopman_apply(f, tau), 0.5, p).value
            worst = max(worst, abs(lhs - rhs))
    assert worst <= 1e-8


def test_orbit_heat_kernel(fib):
    p = HullPoint(fib)
    assert orbit_heat_kernel(0.5, p, p) == pytest.approx((2 * math.pi * 0.5) ** -0.5)
    assert orbit_heat_kernel(0.5, p, HullPoint(fib, ("b", "a"))) == 0.0
    rng = np.random.default_rng(2)
    for _ in range(100):
        a, b = rng.uniform(-5, 5, 2)
        x, y = translate(p, float(a)), translate(p, float(b))
        assert orbit_heat_kernel(0.3, x, y) == orbit_heat_kernel(0.3, y, x)


def test_equilibrium(fib, torus):
    p = HullPoint(fib)
    one = TlcFunction.constant(fib, 1.0)
    assert equilibrium_distance(p, 1.0, [(one, 1.0)]) == 0.0
    g = torus_cos(torus)
    q = HullPoint(torus, None, 0, 0.1)
    for t in (0.1, 0.5):
        assert equilibrium_distance(q, t, [(g, 0.0)]) == pytest.approx(torus_decay(t) * abs(g(q)), abs=1e-12)
    ind = letter_indicator(fib, "a")
    m = mu_integral(ind)
    assert equilibrium_distance(p, 25.0, [(ind, m)]) < equilibrium_distance(p, 1.0, [(ind, m)])


def test_strong_feller_failure(fib):
    r = strong_feller_probe(fib, "a", ["ababaabaa"])
    assert r.inside > 1 / 3 and r.outside < 1 / 9
    assert r.delta < 0.1
    with pytest.raises(InputError):
        strong_feller_probe(fib, "a", [])
    with pytest.raises(InputError):
        strong_feller_probe(fib, "a", ["aa", "ab"])


def test_orbit_indicator_is_invariant(fib):
    f = OrbitIndicator(fib, ("a", "a"))
    for addr, expect in ((("a", "a"), 1.0), (("b", "a"), 0.0)):
        p = HullPoint(fib, addr, 0, 0.3)
        assert semigroup_apply_quadrature(f, 2.0, p).value == expect


def test_mixing_at_large_time(fib):
    r = strong_feller_probe(fib, "a", ["ababaabaa"])
    from delone_lab.diffusion import _ball_indicator
    f = _ball_indicator(fib, ["ababaabaa"], 0.25)
    target = mu_integral(f)
    a = semigroup_apply_quadrature(f, 400.0, r.inside_point).value
    b = semigroup_apply_quadrature(f, 400.0, r.outside_point).value
    assert abs(a - target) < 0.2 * target and abs(b - target) < 0.2 * target


def test_ito_constant_is_exact_zero(fib):
    r = ito_residual(TlcFunction.constant(fib, 3.0), HullPoint(fib), 0.1, 100, 1)
    assert r["residual"] == 0.0


def test_ito_torus_and_comb(fib, torus):
    r = ito_residual(torus_cos(torus), HullPoint(torus), 0.1, 10000, 4)
    assert r["within_3se"]
    f = comb_function(fib, 0.4, poly_bump(0.4, 4))
    r = ito_residual(f, HullPoint(fib, None, 0, 0.05), 0.1, 10000, 5)
    assert r["within_3se"]


@settings(max_examples=10, deadline=None)
@given(st.floats(0.01, 3.0), st.floats(-2, 2))
def test_semigroup_is_a_contraction(torus, t, s):
    f = torus_cos(torus)
    v = semigroup_apply_quadrature(f, t, HullPoint(torus, None, 0, s)).value
    assert abs(v) <= 1.0 + 1e-12
