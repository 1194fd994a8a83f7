"""Transversally locally constant (tlc) functions and their orbit calculus.

A one-dimensional tlc function is stored in one of two frames:

* vertex frame: near each vertex x_k (|s| <= radius) the value is profile[cell](s), where the
  cell is the right-word of length level+1 starting at x_k; zero elsewhere.
* tile frame: on the tile [x_k, x_{k+1}) the value is profile[cell](s) with s = y - x_k.

Plus an additive constant in both frames. A vertex-frame function converts exactly to a tile
frame one level finer, which is the common ground for sums, products and L2(mu) integrals.
Derivatives act on the profiles. The projection Phi_i averages profiles over the children of a
level-i cell with the frequency weights nu_C.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import Polynomial

from .ergodic import mean_tile_length, transversal_measure
from .errors import DivergenceError, InputError
from .hull import CellCylinder, HullPoint, ProductHullPoint
from .profiles import (INF, DerivProfile, PolyPiece, ProductProfile, Profile, QuotientProfile,
                       SumProfile, ZeroProfile, coordinate_profile, poly_bump, profile_from_json)
from .quadrature import composite_nodes, merge_breaks
from .sets import delone_constants

_QUAD_NODES = 24
_QUAD_WIDTH = 0.25


class HullFunction:
    """A function on the hull, evaluated along orbits by `along(orbit, y, order)`."""

    dimension = 1
    smoothness = INF

    def along(self, orbit, y, order: int = 0) -> np.ndarray:
        raise NotImplementedError

    def breaks(self, orbit, lo: float, hi: float) -> np.ndarray:
        """Points in [lo, hi] where the function may lose smoothness."""
        k0, k1 = orbit.vertex_range(lo, hi)
        return orbit.coords(k0, k1)[2]

    def __call__(self, p, order: int = 0):
        if isinstance(p, HullPoint):
            return float(self.along(p.orbit, np.array([p.position]), order)[0])
        return np.array([self(q, order) for q in p])

    def integral_along(self, p: HullPoint, lo: float, hi: float, nodes: int = 16,
                       order: int = 0) -> float:
        """∫_lo^hi f(phi_t p) dt by Gauss-Legendre on the smooth pieces."""
        t0 = p.position
        orb = p.orbit
        b = merge_breaks(t0 + lo, t0 + hi, self.breaks(orb, t0 + lo - 1, t0 + hi + 1), 1.0)
        x, w = composite_nodes(b, nodes)
        return math.fsum(w * self.along(orb, x, order))


class ShiftedFunction(HullFunction):
    """(U_tau f)(p) = f(phi_tau p)."""

    def __init__(self, f: HullFunction, tau: float):
        self.f, self.tau = f, float(tau)
        self.smoothness = f.smoothness

    def along(self, orbit, y, order=0):
        return self.f.along(orbit, np.asarray(y, dtype=np.float64) + self.tau, order)

    def breaks(self, orbit, lo, hi):
        return self.f.breaks(orbit, lo + self.tau, hi + self.tau) - self.tau


class CallableFunction(HullFunction):
    """Wraps g(orbit, y, order) for tests and ad-hoc hull functions."""

    def __init__(self, fn, smoothness: int = INF):
        self.fn = fn
        self.smoothness = smoothness

    def along(self, orbit, y, order=0):
        return np.asarray(self.fn(orbit, np.asarray(y, dtype=np.float64), order), dtype=np.float64)


class TlcFunction(HullFunction):
    def __init__(self, spec, level: int, profiles: dict, frame: str = "vertex",
                 radius: float | None = None, const: float = 0.0):
        if spec.dimension != 1:
            raise InputError("TlcFunction is one-dimensional; use ProductFunction in d=2")
        if frame not in ("vertex", "tile"):
            raise InputError("frame must be 'vertex' or 'tile'")
        cells = spec.cells(level)
        unknown = set(profiles) - set(cells)
        if unknown:
            raise InputError(f"words {sorted(unknown)} are not level-{level} cells")
        if frame == "vertex":
            if radius is None or radius <= 0:
                raise InputError("vertex frame needs a positive radius")
            if 2 * radius > float(spec.float_lengths.min()) + 1e-12:
                raise InputError("vertex radius exceeds half the minimal gap")
            for w, prof in profiles.items():
                sup = prof.support()
                if sup is None or sup[0] < -radius - 1e-12 or sup[1] > radius + 1e-12:
                    raise InputError(f"profile of cell {w!r} is not supported in the radius")
        self.spec = spec
        self.level = int(level)
        self.profiles = {w: p for w, p in profiles.items() if not isinstance(p, ZeroProfile)}
        self.frame = frame
        self.radius = None if frame == "tile" else float(radius)
        self.const = float(const)
        self.smoothness = min((p.smoothness for p in self.profiles.values()), default=INF)

    # -- construction helpers

    @classmethod
    def constant(cls, spec, c: float) -> TlcFunction:
        return cls(spec, 0, {}, "tile", const=c)

    def with_profiles(self, profiles: dict, const: float | None = None) -> TlcFunction:
        return TlcFunction(self.spec, self.level, profiles, self.frame, self.radius,
                           self.const if const is None else const)

    # -- evaluation

    def _cell_table(self):
        return {w: i for i, w in enumerate(self.spec.cells(self.level))}

    def along(self, orbit, y, order: int = 0) -> np.ndarray:
        y = np.atleast_1d(np.asarray(y, dtype=np.float64))
        out = np.full(y.shape, self.const if order == 0 else 0.0)
        if not self.profiles or y.size == 0:
            return out
        k, s = orbit.locate(y)
        if self.frame == "vertex":
            lens = orbit.spec.float_lengths[orbit.tile_codes(int(k.min()), int(k.max()) + 1)]
            ln = lens[k - k.min()]
            right = s > 0.5 * ln
            k = np.where(right, k + 1, k)
            s = np.where(right, s - ln, s)
        kmin = int(k.min())
        ids = orbit.cell_ids(self.level, kmin, int(k.max()) + 1)[k - kmin]
        table = self._cell_table()
        for w, prof in self.profiles.items():
            sel = ids == table[w]
            if sel.any():
                out[sel] += prof.eval(s[sel], order)
        return out

    def breaks(self, orbit, lo, hi):
        k0, k1 = orbit.vertex_range(lo - 2, hi + 2)
        x = orbit.coords(k0, k1)[2]
        rel = sorted({b for p in self.profiles.values() for b in p.breakpoints()})
        if self.frame == "vertex" and self.radius is not None:
            rel = sorted(set(rel) | {-self.radius, self.radius})
        if not rel:
            return x
        return np.concatenate((x, (x[:, None] + np.array(rel)[None, :]).ravel()))

    # -- calculus

    def derivative(self, order: int = 1, strict: bool = True) -> TlcFunction:
        """D^order f; strict=False takes piecewise derivatives beyond the Sobolev order."""
        if order < 0:
            raise InputError("derivative order must be >= 0")
        if order == 0:
            return self
        if strict and order > self.smoothness:
            raise InputError(f"function has Sobolev order {self.smoothness} < {order}")
        return TlcFunction(self.spec, self.level,
                           {w: DerivProfile(p, order) for w, p in self.profiles.items()},
                           self.frame, self.radius, 0.0)

    def lift(self, level: int) -> TlcFunction:
        """Same function written on the finer partition of the given level."""
        if level < self.level:
            raise InputError("cannot lift to a coarser level")
        if level == self.level:
            return self
        m = self.level + 1
        prof = {w: self.profiles[w[:m]] for w in self.spec.cells(level) if w[:m] in self.profiles}
        return TlcFunction(self.spec, level, prof, self.frame, self.radius, self.const)

    def to_tile_frame(self) -> TlcFunction:
        if self.frame == "tile":
            return self
        m = self.level + 1
        lengths = self.spec.float_lengths
        idx = self.spec.letter_index
        prof = {}
        for w in self.spec.cells(self.level + 1):
            left = self.profiles.get(w[:m])
            right = self.profiles.get(w[1:])
            parts = []
            if left is not None:
                parts.append(left)
            if right is not None:
                parts.append(right.shifted(float(lengths[idx[w[0]]])))
            if parts:
                prof[w] = parts[0] if len(parts) == 1 else SumProfile(parts, [1.0] * len(parts))
        return TlcFunction(self.spec, self.level + 1, prof, "tile", None, self.const)

    def _common(self, other: TlcFunction):
        if other.spec != self.spec:
            raise InputError("functions live on different hulls")
        if self.frame == other.frame == "vertex" and self.radius == other.radius:
            a, b = self, other
        else:
            a, b = self.to_tile_frame(), other.to_tile_frame()
        L = max(a.level, b.level)
        return a.lift(L), b.lift(L)

    def __add__(self, other):
        if isinstance(other, (int, float)):
            return self.with_profiles(dict(self.profiles), self.const + float(other))
        a, b = self._common(other)
        prof = dict(a.profiles)
        for w, p in b.profiles.items():
            prof[w] = SumProfile((prof[w], p), (1.0, 1.0)) if w in prof else p
        return a.with_profiles(prof, a.const + b.const)

    __radd__ = __add__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            c = float(other)
            return self.with_profiles({w: SumProfile((p,), (c,)) for w, p in self.profiles.items()},
                                      self.const * c)
        a, b = self._common(other)
        prof = {}
        for w in set(a.profiles) | set(b.profiles):
            terms, coefs = [], []
            if w in a.profiles and w in b.profiles:
                terms.append(ProductProfile(a.profiles[w], b.profiles[w]))
                coefs.append(1.0)
            if w in a.profiles and b.const:
                terms.append(a.profiles[w])
                coefs.append(b.const)
            if w in b.profiles and a.const:
                terms.append(b.profiles[w])
                coefs.append(a.const)
            if terms:
                prof[w] = SumProfile(terms, coefs)
        return a.with_profiles(prof, a.const * b.const)

    __rmul__ = __mul__

    def to_json(self) -> dict:
        return {"level": self.level, "frame": self.frame, "radius": self.radius,
                "const": self.const,
                "profiles": {w: p.to_json() for w, p in sorted(self.profiles.items())}}

    @classmethod
    def from_json(cls, spec, doc: dict) -> TlcFunction:
        extra = set(doc) - {"level", "frame", "radius", "const", "profiles"}
        if extra:
            raise InputError(f"unknown keys {sorted(extra)}")
        prof = {w: profile_from_json(p) for w, p in doc.get("profiles", {}).items()}
        return cls(spec, int(doc.get("level", 0)), prof, doc.get("frame", "vertex"),
                   doc.get("radius"), float(doc.get("const", 0.0)))


# ----------------------------------------------------------------------------
# integrals against mu


def _cell_integrals(f: TlcFunction, g: TlcFunction | None, order_f: int = 0, order_g: int = 0):
    """Per-cell ∫ f^(order_f) g^(order_g) over the chart fibre, as (weights, values)."""
    spec = f.spec
    tm = transversal_measure(spec, f.level)
    lengths = spec.float_lengths
    idx = spec.letter_index
    vals = np.zeros(len(tm.cells))
    for i, w in enumerate(tm.cells):
        pf = f.profiles.get(w)
        pg = None if g is None else g.profiles.get(w)
        if f.frame == "vertex":
            lo, hi = -f.radius, f.radius
        else:
            lo, hi = 0.0, float(lengths[idx[w[0]]])
        cf = f.const if order_f == 0 else 0.0
        cg = 1.0 if g is None else (g.const if order_g == 0 else 0.0)
        if pf is None and (pg is None or cf == 0.0):
            continue
        inner = set()
        for p in (pf, pg):
            if p is not None:
                inner.update(p.breakpoints())
        b = merge_breaks(lo, hi, sorted(inner), _QUAD_WIDTH)
        x, wts = composite_nodes(b, _QUAD_NODES)
        fv = pf.eval(x, order_f) if pf is not None else 0.0
        if g is None:
            vals[i] = math.fsum(wts * fv)
            continue
        gv = pg.eval(x, order_g) if pg is not None else 0.0
        # the constant-constant term is added once, outside the cell sum
        vals[i] = math.fsum(wts * (fv * gv + cg * fv + cf * gv))
    return tm.weights, vals


def mu_integral(f: TlcFunction, order: int = 0) -> float:
    """∫ D^order f dmu."""
    if order:
        f = f.derivative(order)
    w, v = _cell_integrals(f, None)
    return math.fsum(w * v) + f.const


def inner(f: TlcFunction, g: TlcFunction, order_f: int = 0, order_g: int = 0,
          strict: bool = True) -> float:
    """<D^order_f f, D^order_g g> in L2(mu), by chart disintegration nu_C x Lebesgue."""
    f = f.derivative(order_f, strict)
    g = g.derivative(order_g, strict)
    a, b = f._common(g)
    w, v = _cell_integrals(a, b)
    return math.fsum(w * v) + a.const * b.const


def l2_norm(f: TlcFunction) -> float:
    return math.sqrt(max(inner(f, f), 0.0))


def sobolev_norm(f, k: int) -> float:
    """(sum_{j<=k} ||D^j f||^2)^{1/2} in L2(mu)."""
    if isinstance(f, ProductFunction):
        return f.sobolev_norm(k)
    if k > f.smoothness:
        raise InputError(f"function has Sobolev order {f.smoothness} < {k}")
    return math.sqrt(math.fsum(inner(f, f, j, j) for j in range(k + 1)))


def ibp_residual(f: TlcFunction, g: TlcFunction, order: int) -> float:
    """|<D^a f, g> - (-1)^a <f, D^a g>| with piecewise derivatives.

    A nonzero value flags boundary terms: profiles that jump across tile ends.
    """
    lhs = inner(f, g, order, 0, strict=False)
    return abs(lhs - (-1) ** order * inner(f, g, 0, order, strict=False))


# ----------------------------------------------------------------------------
# constructors


def comb_function(spec, eps: float, eta: Profile, word: str | None = None,
                  center: HullPoint | None = None, level: int = 0) -> TlcFunction:
    """Bump eta placed at every vertex whose level cell equals `word` (or the cell of `center`).

    Without a word or centre the bump sits at every vertex (the full Dirac comb).
    """
    r, _ = delone_constants(spec, 50.0)
    if not 0 < eps <= r / 2 + 1e-12:
        raise InputError(f"eps must lie in (0, {r / 2}] for disjoint charts")
    if center is not None:
        k = center.vertex_of_offset()
        if k is None or center.shift != 0.0:
            raise InputError("centre must be a transversal point")
        ids = center.orbit.cell_ids(level, k, k + 1)
        word = spec.cells(level)[int(ids[0])]
    if word is None:
        cells = spec.cells(level)
    else:
        level = len(word) - 1
        if word not in spec.cells(level):
            raise InputError(f"{word!r} is not a legal word")
        cells = [word]
    return TlcFunction(spec, level, {w: eta for w in cells}, "vertex", eps)


def cell_comb(cylinder: CellCylinder, eps: float, eta: Profile) -> TlcFunction:
    return comb_function(cylinder.spec, eps, eta, word=cylinder.word)


def letter_indicator(spec, letter: str) -> TlcFunction:
    """1 on tiles of the given letter (discontinuous; used for averages only)."""
    ln = spec.length_of(letter).to_float()
    one = PolyPiece(Polynomial([1.0]), 0.0, ln, 0)
    return TlcFunction(spec, 0, {letter: one}, "tile")


def pullback(f: HullFunction, p: HullPoint, order: int = 0):
    """t -> D^order f(phi_t p), the orbit function h_p^* f."""
    orb, t0 = p.orbit, p.position

    def g(t):
        return f.along(orb, t0 + np.atleast_1d(np.asarray(t, dtype=np.float64)), order)
    return g


def directional_derivative(f, alpha):
    """D^alpha f; alpha is an int in d=1 or a pair in d=2."""
    if isinstance(f, ProductFunction):
        return f.derivative(tuple(alpha))
    n = int(alpha if np.isscalar(alpha) else alpha[0])
    return f.derivative(n)


def gradient(f) -> list:
    if isinstance(f, ProductFunction):
        return [f.derivative((1, 0)), f.derivative((0, 1))]
    return [f.derivative(1)]


def laplacian(f):
    if isinstance(f, ProductFunction):
        return f.derivative((2, 0)) + f.derivative((0, 2))
    return f.derivative(2)


def carre_du_champ(f, g):
    """Gamma(f, g) = <grad f, grad g>."""
    gf, gg = gradient(f), gradient(g)
    out = gf[0] * gg[0]
    for a, b in zip(gf[1:], gg[1:]):
        out = out + a * b
    return out


# ----------------------------------------------------------------------------
# projection Phi_i


def tlc_project(f: TlcFunction, i: int) -> TlcFunction:
    """Conditional nu_C-average of f over the level-i cells, frame by frame."""
    if i < 0:
        raise InputError("level must be >= 0")
    if f.level <= i:
        return f
    tm = transversal_measure(f.spec, f.level)
    groups: dict = {}
    for w, wt in zip(tm.cells, tm.weights):
        groups.setdefault(w[:i + 1], []).append((w, wt))
    prof = {}
    for c, kids in groups.items():
        total = math.fsum(wt for _, wt in kids)
        parts = [(f.profiles[w], wt / total) for w, wt in kids if w in f.profiles]
        if parts:
            prof[c] = SumProfile([p for p, _ in parts], [a for _, a in parts])
    return TlcFunction(f.spec, i, prof, f.frame, f.radius, f.const)


# ----------------------------------------------------------------------------
# partitions of unity


@dataclass(frozen=True)
class CoverChart:
    """Chart {phi_t(L') : L' in cell(word), |t - center| < radius} with center >= 0 in the tile."""

    word: str
    radius: float
    center: float = 0.0


def _chart_bump(spec, chart: CoverChart, m: int) -> TlcFunction:
    level = len(chart.word) - 1
    if chart.center == 0.0:
        return comb_function(spec, chart.radius, poly_bump(chart.radius, m), word=chart.word)
    ln = spec.length_of(chart.word[0]).to_float()
    if chart.center - chart.radius < 0 or chart.center + chart.radius > ln:
        raise InputError("off-vertex charts must sit inside their tile")
    return TlcFunction(spec, level, {chart.word: poly_bump(chart.radius, m, chart.center)}, "tile")


def _check_cover(spec, cover, level: int) -> None:
    lengths = spec.float_lengths
    idx = spec.letter_index
    for w in spec.cells(level + 1):
        ln = float(lengths[idx[w[0]]])
        iv = []
        for ch in cover:
            m = len(ch.word)
            if ch.center == 0.0:
                if w[:m] == ch.word:
                    iv.append((-ch.radius, ch.radius))
                if w[1:1 + m] == ch.word:
                    iv.append((ln - ch.radius, ln + ch.radius))
            elif w[:m] == ch.word:
                iv.append((ch.center - ch.radius, ch.center + ch.radius))
        iv.sort()
        reach = None
        for a, b in iv:
            if reach is None:
                if a >= 0:
                    break
                reach = b
            elif a < reach:
                reach = max(reach, b)
        if reach is None or reach <= ln:
            raise DivergenceError(f"cover leaves a gap in tiles of cell {w!r}")


def partition_of_unity(spec, cover: list, m: int = 3) -> list:
    """chi_j = psi_j / sum psi, psi_j the polynomial bump of chart j."""
    if not cover:
        raise InputError("empty cover")
    level = max(len(ch.word) for ch in cover) - 1
    _check_cover(spec, cover, level)
    psis = [_chart_bump(spec, ch, m).to_tile_frame() for ch in cover]
    L = max(p.level for p in psis)
    psis = [p.lift(L) for p in psis]
    total = psis[0]
    for p in psis[1:]:
        total = total + p
    out = []
    for p in psis:
        prof = {w: QuotientProfile(q, total.profiles[w]) for w, q in p.profiles.items()}
        out.append(TlcFunction(spec, L, prof, "tile"))
    return out


# ----------------------------------------------------------------------------
# d = 2 products


class ProductFunction(HullFunction):
    """Sum of coef * f(x) g(y) on a product hull; factors are TlcFunctions or constants."""

    dimension = 2

    def __init__(self, spec, terms):
        self.spec = spec
        self.terms = [(float(c), self._lift(spec.first, f), self._lift(spec.second, g))
                      for c, f, g in terms]
        self.smoothness = min((min(f.smoothness, g.smoothness) for _, f, g in self.terms),
                              default=INF)

    @staticmethod
    def _lift(spec, f):
        return TlcFunction.constant(spec, f) if isinstance(f, (int, float)) else f

    def __call__(self, p: ProductHullPoint, order=(0, 0)):
        return math.fsum(c * f(p.first, order[0]) * g(p.second, order[1])
                         for c, f, g in self.terms)

    def derivative(self, alpha) -> ProductFunction:
        a, b = alpha
        return ProductFunction(self.spec, [(c, f.derivative(a), g.derivative(b))
                                           for c, f, g in self.terms])

    def __add__(self, other):
        return ProductFunction(self.spec, self.terms + other.terms)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return ProductFunction(self.spec, [(c * other, f, g) for c, f, g in self.terms])
        return ProductFunction(self.spec, [(c1 * c2, f1 * f2, g1 * g2)
                                           for c1, f1, g1 in self.terms
                                           for c2, f2, g2 in other.terms])

    __rmul__ = __mul__

    def inner(self, other) -> float:
        return math.fsum(c1 * c2 * inner(f1, f2) * inner(g1, g2)
                         for c1, f1, g1 in self.terms for c2, f2, g2 in other.terms)

    def sobolev_norm(self, k: int) -> float:
        if k > self.smoothness:
            raise InputError(f"function has Sobolev order {self.smoothness} < {k}")
        total = []
        for n in range(k + 1):
            for a in range(n + 1):
                d = self.derivative((a, n - a))
                total.append(d.inner(d))
        return math.sqrt(math.fsum(total))


# ----------------------------------------------------------------------------
# index


def coordinate_functions(spec, eps: float | None = None, level: int = 0) -> list:
    """Comb functions with slope one at the vertices of each level cell."""
    r, _ = delone_constants(spec, 50.0)
    eps = r / 2 if eps is None else eps
    prof = coordinate_profile(eps)
    return [comb_function(spec, eps, prof, word=w) for w in spec.cells(level)]


def index_rank(functions, points, rel_tol: float = 1e-8) -> np.ndarray:
    """Rank of the Gram matrix (Gamma(f_i, f_j)) at each sample point."""
    ranks = []
    for p in points:
        if isinstance(p, ProductHullPoint):
            grads = np.array([[f(p, (1, 0)), f(p, (0, 1))] for f in functions])
        else:
            grads = np.array([[f(p, 1)] for f in functions])
        G = grads @ grads.T
        sv = np.linalg.svd(G, compute_uv=False)
        ranks.append(0 if sv.size == 0 or sv[0] == 0 else int(np.sum(sv > rel_tol * sv[0])))
    return np.array(ranks)


def product_coordinate_functions(spec, eps: float | None = None) -> list:
    """x- and y-coordinate combs tensored with the constant one."""
    out = []
    for f in coordinate_functions(spec.first, eps):
        out.append(ProductFunction(spec, [(1.0, f, 1.0)]))
    for g in coordinate_functions(spec.second, eps):
        out.append(ProductFunction(spec, [(1.0, 1.0, g)]))
    return out


def density_constant(spec) -> float:
    """Sum of the per-volume cell weights times tile lengths; equals one."""
    return transversal_measure(spec, 0).weights.sum() * mean_tile_length(spec)
