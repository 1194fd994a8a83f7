import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from delone_lab.calculus import TlcFunction, comb_function, inner, letter_indicator
from delone_lab.ergodic import transversal_measure
from delone_lab.errors import InputError
from delone_lab.hull import HullPoint
from delone_lab.profiles import cosine, sine_bump
from delone_lab.spectral import (ball_dirichlet_basis, cantor_basis, dirichlet_energy,
                                 energy_by_ergodic_average, heat_evolve_spectral,
                                 koopman_eigen_search, local_laplacian, poincare_check,
                                 product_eigenbasis, schrodinger_evolve)

from oracles import PHI


def test_cantor_level0_two_cell_closed_form(fib):
    C = cantor_basis(fib, 0)
    wa, wb = transversal_measure(fib, 0).weights
    # the second vector is proportional to sqrt(wb/wa) 1_a - sqrt(wa/wb) 1_b
    v = np.array([math.sqrt(wb / wa), -math.sqrt(wa / wb)])
    v = v / math.sqrt(wa * v[0] ** 2 + wb * v[1] ** 2)
    got = C.vectors[1] * np.sign(C.vectors[1][0])
    assert np.allclose(got, v, atol=1e-12)
    assert np.allclose(C.vectors[0], 1 / math.sqrt(wa + wb))


@pytest.mark.parametrize("level", [0, 1, 2, 3])
def test_cantor_gram_identity(fib, level):
    C = cantor_basis(fib, level)
    assert len(C) == len(fib.cells(level))
    assert np.max(np.abs(C.gram() - np.eye(len(C)))) < 1e-12


def test_ball_basis():
    B = ball_dirichlet_basis(0.5, 6)
    assert B.eigenvalues[0] == pytest.approx(math.pi ** 2)
    assert np.max(np.abs(B.gram(0) - np.eye(6))) < 1e-12
    assert B.gram(1)[0, 0] == pytest.approx(B.eigenvalues[0], abs=1e-8)


def test_level1_spectrum_table(fib):
    op = local_laplacian(fib, 1, 0.5, 2, root="a")
    rows = op.spectrum_table()
    assert [(j, m) for j, m, _ in rows] == [(1, 2), (2, 2)]
    assert rows[0][2] == pytest.approx(-math.pi ** 2 / 2, abs=1e-10)
    assert rows[1][2] == pytest.approx(-2 * math.pi ** 2, abs=1e-10)


@pytest.mark.parametrize("level", [0, 1, 2])
def test_assembled_spectrum_matches_closed_form(fib, level):
    op = local_laplacian(fib, level, 0.5, 8)
    ev = op.eigenvalues()
    expected = np.sort(np.repeat(-0.5 * (np.arange(1, 9) * math.pi / 1.0) ** 2, len(fib.cells(level))))
    assert np.max(np.abs(ev - expected)) < 1e-8 * np.max(np.abs(expected))
    assert np.all(ev <= 0)
    mult = [m for _, m, _ in op.spectrum_table()]
    assert mult == [len(fib.cells(level))] * 8


def test_product_mode_is_eigenfunction(fib):
    basis = product_eigenbasis(fib, 1, 0.4, 4)
    f = basis.vector(1, 1)
    lap = f.derivative(2, strict=False)
    # L^O f = 1/2 f'' = -1/2 lambda_1 f pointwise inside the chart
    p = HullPoint(fib, None, 0, 0.1)
    assert 0.5 * lap(p) == pytest.approx(-0.5 * basis.ball.eigenvalues[0] * f(p), rel=1e-10)


def test_energy_diagonal(fib):
    basis = product_eigenbasis(fib, 1, 0.5, 4)
    lam = basis.ball.eigenvalues
    for (i, j) in [(0, 1), (1, 2), (2, 4)]:
        b = basis.vector(i, j)
        assert dirichlet_energy(b, b) == pytest.approx(0.5 * lam[j - 1], abs=1e-8)
    assert abs(dirichlet_energy(basis.vector(0, 1), basis.vector(1, 1))) < 1e-8
    assert abs(dirichlet_energy(basis.vector(0, 1), basis.vector(0, 2))) < 1e-8
    assert dirichlet_energy(TlcFunction.constant(fib, 1.0), TlcFunction.constant(fib, 1.0)) == 0.0


def test_energy_identity_random(fib):
    op = local_laplacian(fib, 2, 0.5, 8)
    rng = np.random.default_rng(0)
    for _ in range(5):
        c = rng.normal(size=len(op.basis))
        f = op.basis.realize(c)
        lhs = dirichlet_energy(f, f)
        rhs = -float(c @ op.apply(c))
        assert abs(lhs - rhs) <= 1e-8


def test_energy_by_ergodic_average(fib):
    f = comb_function(fib, 0.4, sine_bump(0.4))
    E = dirichlet_energy(f, f)
    p = HullPoint(fib)
    assert energy_by_ergodic_average(TlcFunction.constant(fib, 1.0), TlcFunction.constant(fib, 1.0),
                                     p, [10.0]) == [0.0]
    a = energy_by_ergodic_average(f, f, p, [1e4])[0]
    b = energy_by_ergodic_average(f, f, HullPoint(fib, ("b", "a"), 0, 0.3), [1e4])[0]
    assert abs(a - E) < 1e-2 * E and abs(b - E) < 1e-2 * E


def test_poincare(fib):
    op = local_laplacian(fib, 1, 0.5, 4)
    n = len(op.basis)
    e = np.zeros(n)
    e[op.basis.index(0, 1)] = 1.0
    holds, ratio = poincare_check(op, e)
    assert holds and ratio == pytest.approx(1.0)
    e = np.zeros(n)
    e[op.basis.index(1, 2)] = 1.0
    assert poincare_check(op, e)[1] == pytest.approx(0.25)
    rng = np.random.default_rng(1)
    assert all(poincare_check(op, rng.normal(size=n))[0] for _ in range(100))


def test_coefficients_reject_outside_span(fib):
    basis = product_eigenbasis(fib, 0, 0.4, 3)
    c = np.arange(1.0, len(basis) + 1)
    assert np.allclose(basis.coefficients(basis.realize(c)), c)
    with pytest.raises(InputError):
        basis.coefficients(basis.vector(0, 1) + comb_function(fib, 0.4, sine_bump(0.2)))


def test_heat_and_schrodinger(fib):
    op = local_laplacian(fib, 1, 0.5, 4)
    c = np.random.default_rng(2).normal(size=len(op.basis))
    assert np.array_equal(heat_evolve_spectral(op, c, 0.0), c)
    e = np.zeros(len(op.basis))
    e[op.basis.index(0, 1)] = 1.0
    assert heat_evolve_spectral(op, e, 1.0)[op.basis.index(0, 1)] == pytest.approx(math.exp(-math.pi ** 2 / 2))
    for t in (0.1, 0.5, 1, 2, 5, 10):
        out = schrodinger_evolve(op, c, t)
        assert abs(np.linalg.norm(out) - np.linalg.norm(c)) < 1e-10


def test_koopman_scan_torus(torus):
    g = TlcFunction(torus, 0, {"z": cosine(2 * math.pi)}, "tile")
    c = koopman_eigen_search(g, [0.0, 0.5, 1.0], 1000.0)
    assert c[1.0] > 0.4 and c[0.5] < 1e-2 and c[0.0] < 1e-2


def test_koopman_scan_mean(fib):
    ind = TlcFunction(fib, 0, {}, "tile", const=0.7)
    assert koopman_eigen_search(ind, [0.0], 100.0)[0.0] == pytest.approx(0.7)


def test_koopman_scan_fibonacci_golden_vs_random(fib):
    g = letter_indicator(fib, "a")
    # return module Z[phi] has dual frequencies (m + n phi)/sqrt 5
    golden = [1 / math.sqrt(5), PHI / math.sqrt(5), (PHI - 1) / math.sqrt(5)]
    controls = [math.sqrt(2) / 3, math.e / 5, math.pi / 7, math.sqrt(3) / 4]
    c = koopman_eigen_search(g, golden + controls, 1e5)
    assert min(c[a] for a in golden) >= 10 * max(c[a] for a in controls)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_self_adjoint_on_realised_functions(fib, seed):
    # <1/2 f'', g> = <f, 1/2 g''> through the calculus quadrature, not the symbol
    basis = product_eigenbasis(fib, 1, 0.5, 6)
    rng = np.random.default_rng(seed)
    f = basis.realize(rng.normal(size=len(basis)))
    g = basis.realize(rng.normal(size=len(basis)))
    lhs = 0.5 * inner(f, g, 2, 0, strict=False)
    rhs = 0.5 * inner(f, g, 0, 2, strict=False)
    assert abs(lhs - rhs) < 1e-10 and abs(lhs + dirichlet_energy(f, g)) < 1e-8


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 3.0), st.floats(0.0, 3.0))
def test_heat_semigroup_consistency(fib, s, t):
    op = local_laplacian(fib, 1, 0.5, 4)
    c = np.linspace(-1.0, 1.0, len(op.basis))
    a = heat_evolve_spectral(op, heat_evolve_spectral(op, c, s), t)
    b = heat_evolve_spectral(op, c, s + t)
    assert np.max(np.abs(a - b)) <= 1e-14 * np.max(np.abs(c))
    assert np.linalg.norm(b) <= np.linalg.norm(c)
