import math
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from delone_lab.golden import PHI, GoldenNumber, golden_sign, parse_golden

ints = st.integers(min_value=-10 ** 6, max_value=10 ** 6)


def test_phi_squared_is_phi_plus_one():
    phi = GoldenNumber(0, 1)
    assert phi * phi == phi + 1


@pytest.mark.parametrize("text,a,b", [("phi", 0, 1), ("1", 1, 0), ("2+3phi", 2, 3),
                                      ("-phi", 0, -1), ("1 - 2*phi", 1, -2)])
def test_parse(text, a, b):
    assert parse_golden(text) == GoldenNumber(a, b)


def test_parse_rejects_garbage():
    with pytest.raises(ValueError):
        parse_golden("2x")


@given(ints, ints)
def test_sign_matches_high_precision(a, b):
    # sqrt 5 bracketed by rationals tight enough for |a|, |b| <= 1e6 unless exactly zero
    lo, hi = Fraction(2236067977499789, 10 ** 15), Fraction(2236067977499790, 10 ** 15)
    v_lo = Fraction(2 * a + b) + b * (lo if b > 0 else hi)
    v_hi = Fraction(2 * a + b) + b * (hi if b > 0 else lo)
    s = golden_sign(a, b)
    if a == 0 and b == 0:
        assert s == 0
    elif v_lo > 0:
        assert s == 1
    elif v_hi < 0:
        assert s == -1


@given(ints, ints, ints, ints)
def test_ring_laws(a, b, c, d):
    x, y = GoldenNumber(a, b), GoldenNumber(c, d)
    assert x + y == y + x
    assert x * y == y * x
    assert (x - y) + y == x
    assert math.isclose((x * y).to_float(), x.to_float() * y.to_float(), rel_tol=1e-9, abs_tol=1e-3)


@given(ints, ints)
def test_norm_is_multiplicative_with_conjugate(a, b):
    x = GoldenNumber(a, b)
    assert x * x.conjugate() == GoldenNumber(x.norm(), 0)


@given(ints, ints, ints, ints)
def test_order_agrees_with_floats_when_separated(a, b, c, d):
    x, y = GoldenNumber(a, b), GoldenNumber(c, d)
    if abs(x.to_float() - y.to_float()) > 1e-3:
        assert (x < y) == (x.to_float() < y.to_float())


def test_float_value():
    assert GoldenNumber(1, 1).to_float() == pytest.approx(PHI ** 2)
