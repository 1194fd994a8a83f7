"""The orbit-wise Brownian diffusion X_t = phi_{W_t}(Λ) and its transition semigroup.

T_t f(Λ) = ∫ p(t, s) f(phi_s Λ) ds is computed either by composite Gauss-Legendre on
[-8 sqrt t, 8 sqrt t], split at the breakpoints of f and renormalised so that the weights sum
to one exactly, or by Monte Carlo with a counter-based generator (Philox). Monte Carlo work is
cut into fixed chunks, each with its own jumped stream, and chunk sums are reduced in order, so
the result does not depend on the number of worker threads.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import Polynomial

from .calculus import HullFunction, ProductFunction, ShiftedFunction, TlcFunction, laplacian
from .errors import InputError
from .golden import GoldenNumber
from .hull import HullPoint, ProductHullPoint, hull_metric, orbit_metric, translate
from .profiles import PolyPiece
from .quadrature import composite_nodes, merge_breaks

TRUNCATION = 8.0
CHUNK = 1 << 14
_QUAD_NODES = 24
_QUAD_WIDTH = 0.25


def worker_count() -> int:
    try:
        n = int(os.environ.get("DELONE_LAB_THREADS", "1"))
    except ValueError:
        n = 1
    return max(1, n)


# ----------------------------------------------------------------------------
# Gaussian kernel


def heat_kernel(t: float, s, d: int = 1):
    """(2 pi t)^{-d/2} exp(-|s|^2 / 2t)."""
    if t <= 0:
        raise InputError("t must be positive")
    s = np.asarray(s, dtype=np.float64)
    sq = s * s if d == 1 or s.ndim == 0 else np.sum(s * s, axis=-1)
    out = (2.0 * math.pi * t) ** (-d / 2) * np.exp(-sq / (2.0 * t))
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class GaussianKernel:
    t: float
    d: int = 1

    def __post_init__(self):
        if self.t <= 0:
            raise InputError("t must be positive")

    def __call__(self, s):
        return heat_kernel(self.t, s, self.d)


@dataclass(frozen=True)
class SemigroupEstimate:
    value: float
    error: float
    method: str
    n: int


@dataclass(frozen=True)
class PathSample:
    seed: int
    times: np.ndarray = field(compare=False)
    states: list = field(compare=False)
    increments: np.ndarray = field(compare=False)


# ----------------------------------------------------------------------------
# quadrature backend


def _normalised(w: np.ndarray) -> np.ndarray:
    """Scale to sum one, then nudge the largest weight until math.fsum gives exactly 1.0."""
    w = w / math.fsum(w)
    j = int(np.argmax(w))
    for _ in range(8):
        r = 1.0 - math.fsum(w)
        if r == 0.0:
            break
        w[j] += r
    return w


def gauss_rule(t: float, rel_breaks=(), nodes: int = _QUAD_NODES, width: float = _QUAD_WIDTH):
    """Nodes s and normalised weights for ∫ p(t,s) g(s) ds, split at rel_breaks."""
    if t <= 0:
        raise InputError("t must be positive")
    c = TRUNCATION * math.sqrt(t)
    b = merge_breaks(-c, c, np.asarray(rel_breaks, dtype=np.float64),
                     min(width, c / 4))
    s, w = composite_nodes(b, nodes)
    return s, _normalised(w * heat_kernel(t, s))


def _tail_bound() -> float:
    return math.erfc(TRUNCATION / math.sqrt(2.0))


def _quad_1d(f: HullFunction, t: float, orbit, y: float, nodes: int):
    c = TRUNCATION * math.sqrt(t)
    rel = f.breaks(orbit, y - c, y + c) - y
    s, w = gauss_rule(t, rel[np.abs(rel) < c], nodes)
    return math.fsum(w * f.along(orbit, y + s))


def semigroup_apply_quadrature(f, t: float, p, nodes: int = _QUAD_NODES) -> SemigroupEstimate:
    """Deterministic T_t f(p); error = rule difference against half the nodes plus tail mass."""
    if t <= 0:
        raise InputError("t must be positive")
    if isinstance(f, ProductFunction):
        vals = []
        for c, g, h in f.terms:
            a = semigroup_apply_quadrature(g, t, p.first, nodes)
            b = semigroup_apply_quadrature(h, t, p.second, nodes)
            vals.append((c * a.value * b.value, abs(c) * (a.error * abs(b.value) + b.error * abs(a.value))))
        return SemigroupEstimate(math.fsum(v for v, _ in vals), math.fsum(e for _, e in vals),
                                 "quadrature", nodes)
    orbit, y = p.orbit, p.position
    v = _quad_1d(f, t, orbit, y, nodes)
    coarse = _quad_1d(f, t, orbit, y, max(nodes // 2, 2))
    return SemigroupEstimate(v, abs(v - coarse) + _tail_bound(), "quadrature", nodes)


class SemigroupFunction(HullFunction):
    """The hull function T_t f, evaluated by quadrature at every requested orbit point."""

    def __init__(self, f: HullFunction, t: float, nodes: int = _QUAD_NODES):
        if t <= 0:
            raise InputError("t must be positive")
        self.f, self.t, self.nodes = f, float(t), nodes

    def along(self, orbit, y, order=0):
        if order:
            raise InputError("derivatives of T_t f are not provided")
        y = np.atleast_1d(np.asarray(y, dtype=np.float64))
        return np.array([_quad_1d(self.f, self.t, orbit, float(v), self.nodes) for v in y])

    def breaks(self, orbit, lo, hi):
        return np.empty(0)


def semigroup(f: HullFunction, t: float) -> SemigroupFunction:
    return SemigroupFunction(f, t)


# ----------------------------------------------------------------------------
# Monte Carlo backend


def _chunk_normals(seed: int, chunk: int, size: int, shape=()) -> np.ndarray:
    gen = np.random.Generator(np.random.Philox(key=int(seed) & (2 ** 64 - 1)).jumped(chunk))
    return gen.standard_normal((size,) + tuple(shape))


def _chunks(n: int):
    return [(c, min(CHUNK, n - c * CHUNK)) for c in range((n + CHUNK - 1) // CHUNK)]


def _map_chunks(fn, n: int):
    jobs = _chunks(n)
    workers = worker_count()
    if workers == 1 or len(jobs) == 1:
        return [fn(c, m) for c, m in jobs]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(lambda job: fn(*job), jobs))


def semigroup_apply_mc(f: HullFunction, t: float, p: HullPoint, n: int, seed: int) -> SemigroupEstimate:
    """Mean of f(phi_{W_t} p) over n seeded Gaussian draws, with its standard error."""
    if t <= 0:
        raise InputError("t must be positive")
    if n < 1:
        raise InputError("n must be >= 1")
    orbit, y = p.orbit, p.position
    sd = math.sqrt(t)

    def chunk(c, m):
        v = f.along(orbit, y + sd * _chunk_normals(seed, c, m))
        return math.fsum(v), math.fsum(v * v)

    parts = _map_chunks(chunk, n)
    s1 = math.fsum(a for a, _ in parts)
    s2 = math.fsum(b for _, b in parts)
    mean = s1 / n
    var = max(s2 / n - mean * mean, 0.0) * n / max(n - 1, 1)
    return SemigroupEstimate(mean, math.sqrt(var / n), "monte_carlo", n)


def sample_path(p: HullPoint, t_grid, seed: int) -> PathSample:
    """States phi_{W_t} p on the grid; W built from seeded increments of variance dt."""
    t = np.asarray(t_grid, dtype=np.float64)
    if t.ndim != 1 or len(t) == 0 or t[0] != 0.0 or np.any(np.diff(t) <= 0):
        raise InputError("time grid must start at 0 and increase strictly")
    dt = np.diff(t)
    z = _chunk_normals(seed, 0, len(dt)) if len(dt) else np.empty(0)
    inc = z * np.sqrt(dt)
    W = np.concatenate(([0.0], np.cumsum(inc)))
    states = [p] + [translate(p, float(w)) for w in W[1:]]
    return PathSample(int(seed), t, states, inc)


def brownian_endpoints(t: float, n: int, seed: int) -> np.ndarray:
    """n samples of W_t in the chunked stream layout used by semigroup_apply_mc."""
    sd = math.sqrt(t)
    return np.concatenate([sd * _chunk_normals(seed, c, m) for c, m in _chunks(n)])


# ----------------------------------------------------------------------------
# Koopman operators and orbit kernel


def koopman_apply(f, tau):
    """(U_tau f)(p) = f(phi_tau p)."""
    if isinstance(f, ProductFunction):
        raise InputError("Koopman shifts of product functions act per factor; shift the factors")
    return ShiftedFunction(f, float(tau))


def orbit_heat_kernel(t: float, p1, p2) -> float:
    """Gaussian density at the orbit displacement, zero across different orbits."""
    d = orbit_metric(p1, p2)
    if math.isinf(d):
        return 0.0
    if t <= 0:
        raise InputError("t must be positive")
    dim = 2 if isinstance(p1, ProductHullPoint) else 1
    return (2 * math.pi * t) ** (-dim / 2) * math.exp(-d * d / (2 * t))


class OrbitIndicator(HullFunction):
    """1 on the orbit with the given address, 0 on every other orbit."""

    def __init__(self, spec, address=None):
        self.spec = spec
        self.address = spec.normalize_address(spec.default_address if address is None else address)

    def along(self, orbit, y, order=0):
        y = np.atleast_1d(np.asarray(y, dtype=np.float64))
        if order:
            return np.zeros(y.shape)
        hit = orbit.spec == self.spec and orbit.address == self.address
        return np.full(y.shape, 1.0 if hit else 0.0)


# ----------------------------------------------------------------------------
# experiments


def equilibrium_distance(p: HullPoint, t: float, tests) -> float:
    """max_j |T_t f_j(p) - ∫ f_j dmu| for tests given as (f, mean) pairs."""
    return max(abs(semigroup_apply_quadrature(f, t, p).value - m) for f, m in tests)


@dataclass(frozen=True)
class StrongFellerResult:
    inside: float
    outside: float
    t: float
    delta: float
    inside_point: HullPoint
    outside_point: HullPoint


def _ball_indicator(spec, words, half: float) -> TlcFunction:
    level = len(words[0]) - 1
    one = PolyPiece(Polynomial([1.0]), -half, half, 0)
    return TlcFunction(spec, level, {w: one for w in words}, "vertex", half)


def strong_feller_probe(spec, chart_word: str, subcell_words, half_width: float = 0.25,
                        t_start: float = 1.0, t_min: float = 1e-4, scan: int = 4000):
    """Evaluate T_t(1_E x 1_B') inside E and at a nearby transversal point of C minus E.

    E is the union of `subcell_words`, all extending `chart_word`; B' = [-half_width, half_width].
    t is halved from t_start until inside > 1/3 and outside < 1/9 (or t_min is reached).
    The nearby point is the vertex of C minus E, among the first `scan` vertices, whose
    two-sided word agreement with the inside point is longest; delta is its hull distance.
    """
    words = list(subcell_words)
    if not words:
        raise InputError("E is empty")
    level = len(words[0]) - 1
    if any(len(w) != level + 1 or not w.startswith(chart_word) for w in words):
        raise InputError("E must be level cells inside the chart cylinder")
    inside_c = [w for w in spec.cells(level) if w.startswith(chart_word)]
    rest = [w for w in inside_c if w not in words]
    if not rest:
        raise InputError("E fills the whole cylinder")
    f = _ball_indicator(spec, words, half_width)
    orb = spec.orbit()
    ids = orb.cell_ids(level, 0, scan)
    table = {w: i for i, w in enumerate(spec.cells(level))}
    in_ids = {table[w] for w in words}
    out_ids = {table[w] for w in rest}
    k_in = next(k for k in range(scan) if ids[k] in in_ids)
    A, B, _ = orb.coords(0, scan)
    p_in = HullPoint(spec, None, GoldenNumber(int(A[k_in]), int(B[k_in])))
    codes = orb.tile_codes(-scan, 2 * scan)

    def agreement(k):
        n = 0
        while n < scan and codes[scan + k_in + n] == codes[scan + k + n] \
                and codes[scan + k_in - 1 - n] == codes[scan + k - 1 - n]:
            n += 1
        return n

    k_out = max((k for k in range(scan) if ids[k] in out_ids), key=agreement)
    p_out = HullPoint(spec, None, GoldenNumber(int(A[k_out]), int(B[k_out])))
    delta = hull_metric(p_in, p_out, 1e-4)
    t = t_start
    while True:
        a = semigroup_apply_quadrature(f, t, p_in).value
        b = semigroup_apply_quadrature(f, t, p_out).value
        if (a > 1 / 3 and b < 1 / 9) or t <= t_min:
            return StrongFellerResult(a, b, t, delta, p_in, p_out)
        t /= 2


def ito_residual(f: TlcFunction, p: HullPoint, t: float, n_paths: int, seed: int,
                 dt: float = 1e-3) -> dict:
    """MC estimate of E[f(X_t)] - f(p) - 1/2 ∫_0^t E[Δf(X_s)] ds.

    Paths are simulated on the dt/2 grid; the time integral is a trapezoid sum at dt and at
    dt/2 and the Richardson combination (4 I_{dt/2} - I_dt)/3 enters the residual.
    """
    if t <= 0 or dt <= 0:
        raise InputError("t and dt must be positive")
    steps = max(1, int(round(t / dt)))
    h = t / (2 * steps)
    lap = laplacian(f)
    orbit, y = p.orbit, p.position
    f0 = float(f.along(orbit, np.array([y]))[0])

    def chunk(c, m):
        z = _chunk_normals(seed, c, m, (2 * steps,))
        W = np.concatenate((np.zeros((m, 1)), np.cumsum(z * math.sqrt(h), axis=1)), axis=1)
        L = lap.along(orbit, (y + W).ravel()).reshape(W.shape)
        fine = h * (L[:, 0] / 2 + L[:, 1:-1].sum(axis=1) + L[:, -1] / 2)
        Lc = L[:, ::2]
        coarse = 2 * h * (Lc[:, 0] / 2 + Lc[:, 1:-1].sum(axis=1) + Lc[:, -1] / 2)
        integral = (4 * fine - coarse) / 3
        r = f.along(orbit, y + W[:, -1]) - f0 - 0.5 * integral
        return math.fsum(r), math.fsum(r * r), math.fsum(np.abs(fine - coarse))

    parts = _map_chunks(chunk, n_paths)
    s1 = math.fsum(a for a, _, _ in parts)
    s2 = math.fsum(b for _, b, _ in parts)
    mean = s1 / n_paths
    var = max(s2 / n_paths - mean * mean, 0.0) * n_paths / max(n_paths - 1, 1)
    se = math.sqrt(var / n_paths)
    return {"residual": mean, "se": se, "within_3se": abs(mean) <= 3 * se,
            "richardson_gap": math.fsum(c for _, _, c in parts) / n_paths * 0.5,
            "steps": steps}
