"""The 19 acceptance criteria, one test each, each printing a PASS/FAIL line.

Run alone with `pytest tests/test_acceptance.py -v` or `python tests/test_acceptance.py`.
"""

import math

import numpy as np
import pytest

from delone_lab.calculus import (TlcFunction, comb_function, coordinate_functions, ibp_residual,
                                 index_rank, l2_norm, letter_indicator, mu_integral,
                                 product_coordinate_functions, sobolev_norm, tlc_project)
from delone_lab.diffusion import (OrbitIndicator, equilibrium_distance, ito_residual, koopman_apply,
                                  semigroup, semigroup_apply_mc, semigroup_apply_quadrature,
                                  strong_feller_probe)
from delone_lab.ergodic import (cluster_frequency, cylinder_measure, occupation_mc,
                                transversal_measure, word_cluster)
from delone_lab.golden import GoldenNumber
from delone_lab.hodge import (disjoint_union, hodge_complement_dim, hodge_star_apply,
                              liouville_kernel_dim, orbit_variance, rauzy_space)
from delone_lab.hull import (CellCylinder, Chart, HullPoint, ProductHullPoint, hull_metric,
                             orbit_metric, translate)
from delone_lab.profiles import cosine, poly_bump, sine_bump
from delone_lab.sets import periodic_spec, spec_from_json
from delone_lab.spectral import (cantor_basis, dirichlet_energy, koopman_eigen_search,
                                 local_laplacian, poincare_check, schrodinger_evolve)

from factories import random_point, random_tlc
from oracles import PHI, factor_count, fib_word, torus_decay

LEVELS = [(1, 4), (2, 8), (3, 16)]


@pytest.fixture
def report(capsys):
    def emit(n, title, ok, detail=""):
        with capsys.disabled():
            print(f"\nACCEPTANCE {n:2d} {'PASS' if ok else 'FAIL'}  {title}  {detail}", flush=True)
        assert ok, f"criterion {n} failed: {detail}"
    return emit


def _torus_cos(torus):
    return TlcFunction(torus, 0, {"z": cosine(2 * math.pi)}, "tile")


def test_01_torus_oracle(torus, report):
    f = _torus_cos(torus)
    p = HullPoint(torus)
    q = semigroup_apply_quadrature(f, 0.1, p).value
    exact = math.exp(-2 * math.pi ** 2 * 0.1)
    mc = semigroup_apply_mc(f, 0.1, p, 100_000, seed=2024)
    ok = abs(q - 0.138911) <= 1e-6 and abs(q - torus_decay(0.1)) < 1e-12 \
        and abs(mc.value - exact) <= 3 * mc.error
    report(1, "torus T_0.1 cos", ok, f"quad={q:.9f} mc={mc.value:.5f}±{mc.error:.5f}")


def test_02_conservativity(fib, report):
    one = TlcFunction.constant(fib, 1.0)
    pts = [HullPoint(fib), HullPoint(fib, ("b", "a"), GoldenNumber(3, 5), -0.4)]
    vals = [semigroup_apply_quadrature(one, t, p).value for t in (0.01, 0.1, 1.0, 10.0) for p in pts]
    report(2, "T_t 1 = 1 bit-exactly", all(v == 1.0 for v in vals), f"values={set(vals)}")


def test_03_semigroup_law(fib, report):
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(10):
        f = random_tlc(fib, rng)
        inner_f = semigroup(f, 0.2)
        for _ in range(2):
            p = random_point(fib, rng)
            a = semigroup_apply_quadrature(inner_f, 0.1, p).value
            b = semigroup_apply_quadrature(f, 0.3, p).value
            worst = max(worst, abs(a - b))
    report(3, "T_0.1 T_0.2 = T_0.3", worst <= 1e-6, f"max residual={worst:.2e}")


def test_04_koopman_commutation(fib, report):
    rng = np.random.default_rng(4)
    f = random_tlc(fib, rng, level=1)
    worst = 0.0
    for _ in range(100):
        p = random_point(fib, rng)
        for tau in (0.1, 1.0):
            lhs = semigroup_apply_quadrature(f, 0.5, translate(p, tau)).value
            rhs = semigroup_apply_quadrature(koopman_apply(f, tau), 0.5, p).value
            worst = max(worst, abs(lhs - rhs))
    report(4, "U_tau T_t = T_t U_tau", worst <= 1e-8, f"sup residual={worst:.2e}")


def test_05_fibonacci_frequencies(fib, report):
    word = fib_word(20)
    oracle = {w: factor_count(word, w) / len(word) for w in ("a", "b", "aa")}
    target = {"a": 0.6180340, "b": 0.3819660, "aa": 0.2360680}
    got = {w: cluster_frequency(word_cluster(fib, w), fib, [1e4]).per_tile_value for w in target}
    ok = all(abs(got[w] - oracle[w]) <= 1e-3 and abs(oracle[w] - target[w]) <= 1e-3 for w in target)
    report(5, "per-tile frequencies", ok, " ".join(f"{w}={got[w]:.6f}" for w in target))


def test_06_cylinder_measure(fib, report):
    eps = 0.4
    O = Chart(CellCylinder(fib, "a"), eps)
    freq = transversal_measure(fib, 0).as_dict()["a"]
    m = cylinder_measure(O)
    frac, se = occupation_mc(O, HullPoint(fib), 1e5, 40_000, seed=6)
    ok = abs(m - freq * 2 * eps) < 1e-14 and abs(frac - m) <= 0.02 * m
    report(6, "cylinder measure vs occupation", ok, f"mu={m:.5f} occupation={frac:.5f}±{se:.5f}")


def test_07_strong_feller_failure(fib, report):
    r = strong_feller_probe(fib, "a", ["ababaabaa"])
    ind = OrbitIndicator(fib, ("a", "a"))
    exact = all(semigroup_apply_quadrature(ind, t, HullPoint(fib, a, 0, 0.3)).value == ind(HullPoint(fib, a))
                for t in (0.1, 1.0, 10.0) for a in (("a", "a"), ("b", "a")))
    ok = r.inside > 1 / 3 and r.outside < 1 / 9 and exact
    report(7, "no strong Feller", ok, f"inside={r.inside:.4f} outside={r.outside:.4f} "
                                      f"t={r.t} delta={r.delta:.4f}")


def test_08_equilibrium(fib, torus, report):
    fs = [letter_indicator(fib, "a"), comb_function(fib, 0.25, sine_bump(0.25)),
          comb_function(fib, 0.3, poly_bump(0.3, 3), word="b"),
          comb_function(fib, 0.4, poly_bump(0.4, 4), word="ab", level=1),
          comb_function(fib, 0.45, poly_bump(0.45, 2), word="a")]
    tests = [(f, mu_integral(f)) for f in fs]
    p = HullPoint(fib)
    d = [equilibrium_distance(p, t, tests) for t in (0.5, 2.0, 8.0, 32.0)]
    mono = all(b <= a for a, b in zip(d, d[1:]))
    g = _torus_cos(torus)
    q = HullPoint(torus, None, 0, 0.1)
    rate = max(abs(semigroup_apply_quadrature(g, t, q).value - math.exp(-2 * math.pi ** 2 * t) * g(q))
               for t in (0.01, 0.05, 0.1, 0.3))
    report(8, "equilibrium", mono and rate <= 1e-6,
           "distances=" + ",".join(f"{v:.4f}" for v in d) + f" torus rate err={rate:.1e}")


def test_09_ito(fib, torus, report):
    cases = [(_torus_cos(torus), HullPoint(torus)),
             (comb_function(fib, 0.4, poly_bump(0.4, 4)), HullPoint(fib, None, 0, 0.05)),
             (comb_function(fib, 0.3, poly_bump(0.3, 3), word="ab", level=1), HullPoint(fib, None, 0, -0.1))]
    res = [ito_residual(f, p, 0.1, 10_000, seed=90 + k, dt=1e-3) for k, (f, p) in enumerate(cases)]
    ok = all(r["within_3se"] for r in res)
    report(9, "Ito residual", ok, " ".join(f"{r['residual']:+.4f}/{r['se']:.4f}" for r in res))


def test_10_integration_by_parts(fib, report):
    rng = np.random.default_rng(10)
    worst = 0.0
    for order in (1, 2):
        for _ in range(20):
            worst = max(worst, ibp_residual(random_tlc(fib, rng), random_tlc(fib, rng), order))
    report(10, "integration by parts", worst < 1e-8, f"max residual={worst:.2e}")


def test_11_phi_projection(fib, report):
    rng = np.random.default_rng(11)
    contract, exact = True, 0.0
    for _ in range(20):
        f = random_tlc(fib, rng, level=2)
        for k in (0, 1, 2):
            for i in (0, 1):
                contract &= sobolev_norm(tlc_project(f, i), k) <= sobolev_norm(f, k) * (1 + 1e-12)
        exact = max(exact, l2_norm(tlc_project(f, 2) - f))
    report(11, "Phi_i projection", contract and exact < 1e-14, f"contract={contract} recovery={exact:.1e}")


def test_12_local_spectrum(fib, report):
    eps, J = 0.5, 8
    lam = 0.5 * (np.arange(1, J + 1) * math.pi / (2 * eps)) ** 2
    err, mult_ok = 0.0, True
    for level in range(4):
        op = local_laplacian(fib, level, eps, J)
        count = len(cantor_basis(fib, level))
        expected = np.sort(np.repeat(-lam, count))
        err = max(err, float(np.max(np.abs(op.eigenvalues() - expected))))
        mult_ok &= [m for _, m, _ in op.spectrum_table()] == [count] * J
    op = local_laplacian(fib, 2, eps, J)
    rng = np.random.default_rng(12)
    poinc = all(poincare_check(op, rng.normal(size=len(op.basis)), slack=1e-10)[0] for _ in range(100))
    report(12, "local spectrum", err <= 1e-8 and mult_ok and poinc,
           f"eig err={err:.1e} multiplicity={mult_ok} poincare={poinc}")


def test_13_energy_identity(fib, report):
    op = local_laplacian(fib, 2, 0.5, 8)
    rng = np.random.default_rng(13)
    worst = 0.0
    for _ in range(20):
        c = rng.normal(size=len(op.basis))
        f = op.basis.realize(c)
        worst = max(worst, abs(dirichlet_energy(f, f) + float(c @ op.apply(c))))
    report(13, "energy identity", worst <= 1e-8, f"max residual={worst:.2e}")


def test_14_schrodinger_unitarity(fib, report):
    op = local_laplacian(fib, 2, 0.5, 8)
    c = np.random.default_rng(14).normal(size=len(op.basis))
    n0 = np.linalg.norm(c)
    worst = max(abs(np.linalg.norm(schrodinger_evolve(op, c, t)) - n0)
                for t in (0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0))
    report(14, "Schrodinger unitarity", worst <= 1e-10, f"max norm drift={worst:.1e}")


def test_15_liouville(fib, report):
    dims = [liouville_kernel_dim(rauzy_space(fib, i, J)) for i, J in LEVELS]
    control = liouville_kernel_dim(disjoint_union(rauzy_space(fib, 2, 8), rauzy_space(fib, 2, 8)))
    report(15, "Liouville kernel", dims == [1, 1, 1] and control == 2, f"dims={dims} control={control}")


def test_16_hodge(fib, report):
    res = [hodge_complement_dim(fib, i, J) for i, J in LEVELS]
    dims = [r.dimension for r in res]
    gaps = [r.gap_ratio for r in res]
    var = 0.0
    for r in res:
        star = r.form_space.form_function(r.complement[:, 0])
        for p in (HullPoint(fib), HullPoint(fib, ("b", "a"), 0, 0.3)):
            var = max(var, orbit_variance(star, p) / star(p) ** 2)
    rng = np.random.default_rng(16)
    iso = max(abs(np.linalg.norm(hodge_star_apply(v)) - np.linalg.norm(v))
              for v in rng.normal(size=(100, 24)))
    ok = dims == [1, 1, 1] and min(gaps) >= 1e6 and var < 1e-8 and iso <= 1e-10
    report(16, "Hodge complement", ok, f"dims={dims} min gap={min(gaps):.1e} variance={var:.1e}")


def test_17_index(fib, report):
    rng = np.random.default_rng(17)
    fs = coordinate_functions(fib)
    pts = []
    while len(pts) < 50:
        p = random_point(fib, rng)
        if any(abs(f(p, 1)) > 0 for f in fs):
            pts.append(p)
    r1 = {int(v) for v in index_rank(fs, pts)}
    pr = spec_from_json({"kind": "product", "factors": [fib.to_json(), fib.to_json()]})
    pp = []
    while len(pp) < 50:
        q = ProductHullPoint(random_point(fib, rng), random_point(fib, rng))
        if abs(q.first.shift) < 0.2 and abs(q.second.shift) < 0.2:
            pp.append(q)
    r2 = {int(v) for v in index_rank(product_coordinate_functions(pr), pp)}
    report(17, "pointwise index", r1 == {1} and r2 == {2}, f"d=1 ranks={r1} product ranks={r2}")


def test_18_metric_suite(fib, torus, report):
    tol = 1e-9
    rng = np.random.default_rng(18)
    sym, tri = True, 0.0
    for _ in range(200):
        a = random_point(fib, rng, span=20)
        b = translate(a, float(rng.uniform(-0.3, 0.3))) if rng.random() < 0.5 else random_point(fib, rng, 20)
        c = random_point(fib, rng, span=20)
        dab, dba = hull_metric(a, b, tol), hull_metric(b, a, tol)
        sym &= dab == dba
        tri = max(tri, dab - hull_metric(a, c, tol) - hull_metric(c, b, tol))
    bound = True
    for _ in range(200):
        a = random_point(fib, rng, span=20)
        b = translate(a, float(rng.uniform(-1.0, 1.0)))
        bound &= hull_metric(a, b, tol) <= 2 * orbit_metric(a, b) + 2 * tol
    # a radius-sqrt2 window always holds >= 2 points of Z; one of kZ never matches it
    disjoint = []
    for k in (2, 3, 4, 5):
        zk = periodic_spec(k)
        for _ in range(5):
            a = HullPoint(torus, None, 0, float(rng.uniform(0, 1)))
            b = HullPoint(zk, None, 0, float(rng.uniform(0, k)))
            disjoint.append(hull_metric(a, b, tol))
    dis_ok = all(v == 2 ** -0.5 for v in disjoint)
    report(18, "metric suite", sym and tri <= 2 * tol and bound and dis_ok,
           f"symmetric={sym} triangle excess={tri:.1e} orbit bound={bound} disjoint={dis_ok}")


def test_19_koopman_scan(fib, torus, report):
    c = koopman_eigen_search(_torus_cos(torus), [0.5, 1.0], 1e3)
    golden = [1 / math.sqrt(5), PHI / math.sqrt(5), (PHI - 1) / math.sqrt(5)]
    controls = [math.sqrt(2) / 3, math.e / 5, math.pi / 7, math.sqrt(3) / 4]
    f = koopman_eigen_search(letter_indicator(fib, "a"), golden + controls, 1e5)
    lo, hi = min(f[a] for a in golden), max(f[a] for a in controls)
    ok = c[1.0] > 0.4 and c[0.5] < 1e-2 and lo >= 10 * hi
    report(19, "Koopman scan", ok, f"torus c(1)={c[1.0]:.3f} c(0.5)={c[0.5]:.1e} "
                                   f"golden min={lo:.3f} control max={hi:.1e}")


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
