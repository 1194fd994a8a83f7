"""Points of the hull, the metrics rho and rho_orb, cylinder sets and foliated charts.

A hull point is stored as (orbit address, offset): it is the set Λ - t where Λ is the
reference tiling named by the address and t = offset + shift. The offset is an exact
element of Z[phi]; the float shift carries non-exact translations such as Brownian
increments.

The hull metric works on candidate shifts only. Two discrete sets that agree on a ball
must match some point of one set to a point of the other, so the infimum over the
translations s, t in B_eps reduces to finitely many relative shifts u = q - p.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import DomainError, InputError
from .golden import GoldenNumber, golden_to_float
from .sets import Cluster, CutAndProjectSpec, Orbit, PeriodicSpec

EPS_FLOOR = 1e-4
RHO_CAP = 2.0 ** -0.5
_MATCH_TOL = 1e-9


@dataclass(frozen=True)
class HullPoint:
    """The set Λ_address - (offset + shift)."""

    spec: object
    address: tuple = None
    offset: GoldenNumber = field(default_factory=GoldenNumber)
    shift: float = 0.0

    def __post_init__(self):
        if self.spec.dimension != 1:
            raise InputError("use ProductHullPoint for two-dimensional specs")
        addr = self.spec.default_address if self.address is None else self.address
        object.__setattr__(self, "address", self.spec.normalize_address(addr))
        object.__setattr__(self, "offset", GoldenNumber.coerce(self.offset))
        object.__setattr__(self, "shift", float(self.shift))

    dimension = 1

    @property
    def orbit(self) -> Orbit:
        return self.spec.orbit(self.address)

    @property
    def position(self) -> float:
        return self.offset.to_float() + self.shift

    def points(self, radius: float) -> np.ndarray:
        """Float coordinates of Λ' ∩ [-radius, radius] with Λ' = Λ - t."""
        t = self.position
        orb = self.orbit
        k0, k1 = orb.vertex_range(t - radius - 1.0, t + radius + 1.0)
        A, B, _ = orb.coords(k0, k1)
        rel = golden_to_float(A - self.offset.a, B - self.offset.b) - self.shift
        return rel[np.abs(rel) <= radius]

    def is_transversal(self) -> bool:
        """True when the origin is a point of the set (exact test)."""
        if self.shift != 0.0:
            return False
        return self.vertex_of_offset() is not None

    def vertex_of_offset(self):
        """Vertex index k with x_k == offset exactly, or None."""
        orb = self.orbit
        t = self.offset.to_float()
        k0, k1 = orb.vertex_range(t - 1e-6, t + 1e-6)
        A, B, _ = orb.coords(k0, k1)
        hit = np.nonzero((A == self.offset.a) & (B == self.offset.b))[0]
        return int(k0 + hit[0]) if len(hit) else None

    def patch(self, radius: float) -> Cluster:
        """Exact anchored patch of Λ' in the closed ball of the given radius."""
        orb = self.orbit
        t = self.position
        k0, k1 = orb.vertex_range(t - radius - 1.0, t + radius + 1.0)
        A, B, _ = orb.coords(k0, k1)
        rel = golden_to_float(A - self.offset.a, B - self.offset.b) - self.shift
        keep = np.abs(rel) <= radius
        return Cluster.from_exact(A[keep], B[keep])

    def exact_patch(self, radius: float) -> tuple:
        """Patch with coordinates relative to the origin (not re-anchored); transversal points only."""
        orb = self.orbit
        t = self.position
        k0, k1 = orb.vertex_range(t - radius - 1.0, t + radius + 1.0)
        A, B, _ = orb.coords(k0, k1)
        ra, rb = A - self.offset.a, B - self.offset.b
        rel = golden_to_float(ra, rb) - self.shift
        keep = np.abs(rel) <= radius
        return tuple(zip(ra[keep].tolist(), rb[keep].tolist()))

    def to_json(self) -> dict:
        doc = {"address": list(self.address), "offset": self.offset.to_json()}
        if self.shift:
            doc["shift"] = self.shift
        return doc

    @classmethod
    def from_json(cls, spec, doc: dict) -> HullPoint:
        return cls(spec, tuple(doc["address"]), GoldenNumber.from_json(doc["offset"]),
                   float(doc.get("shift", 0.0)))


@dataclass(frozen=True)
class ProductHullPoint:
    """Point of the hull of a product set: a pair of one-dimensional hull points."""

    first: HullPoint
    second: HullPoint

    dimension = 2

    @property
    def position(self) -> np.ndarray:
        return np.array([self.first.position, self.second.position])


def _add(p: HullPoint, t) -> HullPoint:
    if isinstance(t, (GoldenNumber, int, np.integer)):
        return HullPoint(p.spec, p.address, p.offset + GoldenNumber.coerce(t), p.shift)
    return HullPoint(p.spec, p.address, p.offset, p.shift + float(t))


def translate(p, t):
    """phi_t(Λ) = Λ - t; exact for Z[phi] translations."""
    if isinstance(p, ProductHullPoint):
        tx, ty = t
        return ProductHullPoint(_add(p.first, tx), _add(p.second, ty))
    return _add(p, t)


orbit_map = translate


# ----------------------------------------------------------------------------
# orbit relations


@lru_cache(maxsize=256)
def orbit_relation(spec, addr1: tuple, addr2: tuple, scan: int = 256):
    """Vertex shift m with Λ_addr2 = Λ_addr1 - x_m, or None if not found within the scan."""
    if addr1 == addr2:
        return 0
    if isinstance(spec, PeriodicSpec):
        return 0
    if isinstance(spec, CutAndProjectSpec):
        d = (addr2[0] - addr1[0]) % 1.0
        for m in range(-scan, scan + 1):
            r = (d - m * spec.slope) % 1.0
            if min(r, 1.0 - r) < 1e-12:
                return m
        return None
    o1, o2 = spec.orbit(addr1), spec.orbit(addr2)
    n = 8 * scan
    w2 = o2.tile_codes(-n, n)
    for m in sorted(range(-scan, scan + 1), key=abs):
        w1 = o1.tile_codes(m - n, m + n)
        if np.array_equal(w1, w2):
            return m
    return None


def relative_offset(p1: HullPoint, p2: HullPoint):
    """Real r with p2 = p1 - r on a common orbit (p2 = phi_r(p1)), or None for distinct orbits."""
    if p1.spec != p2.spec:
        return None
    m = orbit_relation(p1.spec, p1.address, p2.address)
    if m is None:
        return None
    A, B, _ = p1.orbit.coords(m, m + 1)
    xm = GoldenNumber(int(A[0]), int(B[0]))
    exact = xm + p2.offset - p1.offset
    return exact, p2.shift - p1.shift


def orbit_metric(p1, p2) -> float:
    """inf{|t| : Λ1 - t = Λ2}; +inf on different orbits."""
    if isinstance(p1, ProductHullPoint):
        d1 = orbit_metric(p1.first, p2.first)
        d2 = orbit_metric(p1.second, p2.second)
        return math.hypot(d1, d2) if math.isfinite(d1) and math.isfinite(d2) else math.inf
    rel = relative_offset(p1, p2)
    if rel is None:
        return math.inf
    exact, shift = rel
    r = exact.to_float() + shift
    if isinstance(p1.spec, PeriodicSpec):
        b = p1.spec.basis.to_float()
        r = r - b * round(r / b)
    return abs(r)


def same_point(p1, p2) -> bool:
    rel = relative_offset(p1, p2)
    if rel is None:
        return False
    exact, shift = rel
    if isinstance(p1.spec, PeriodicSpec):
        return orbit_metric(p1, p2) == 0.0
    return exact == GoldenNumber(0, 0) and shift == 0.0


# ----------------------------------------------------------------------------
# hull metric


def _symmetric_difference(P1: np.ndarray, P2: np.ndarray) -> np.ndarray:
    if len(P2):
        j = np.clip(np.searchsorted(P2, P1), 1, len(P2) - 1) if len(P2) > 1 else np.zeros(len(P1), int)
        near = np.minimum(np.abs(P2[j] - P1), np.abs(P2[np.maximum(j - 1, 0)] - P1))
        only1 = P1[near > _MATCH_TOL]
    else:
        only1 = P1
    if len(P1):
        i = np.clip(np.searchsorted(P1, P2), 1, len(P1) - 1) if len(P1) > 1 else np.zeros(len(P2), int)
        near = np.minimum(np.abs(P1[i] - P2), np.abs(P1[np.maximum(i - 1, 0)] - P2))
        only2 = P2[near > _MATCH_TOL]
    else:
        only2 = P2
    return np.sort(np.concatenate((only1, only2)))


def _free_shift(I_lo: float, I_hi: float, D: np.ndarray, R: float) -> bool:
    """Is there s in [I_lo, I_hi] such that no d in D lies in [s - R, s + R]?"""
    if I_lo > I_hi:
        return False
    bad = D[(D >= I_lo - R) & (D <= I_hi + R)]
    if len(bad) == 0:
        return True
    # forbidden s-intervals [d - R, d + R]; scan their union over [I_lo, I_hi]
    s = I_lo
    for d in bad:  # sorted
        if d - R > s:
            return True
        s = max(s, d + R)
        if s > I_hi:
            return False
    # strictly beyond the last closed interval
    return s < I_hi


def _feasible(P1: np.ndarray, P2: np.ndarray, eps: float) -> bool:
    R = 1.0 / eps
    core = R - eps
    c1 = P1[np.abs(P1) <= core]
    c2 = P2[np.abs(P2) <= core]
    if len(c1):
        p = c1[np.argmin(np.abs(c1))]
        us = P2[np.abs(P2 - p) <= 2 * eps + _MATCH_TOL] - p
    elif len(c2):
        q = c2[np.argmin(np.abs(c2))]
        us = q - P1[np.abs(P1 - q) <= 2 * eps + _MATCH_TOL]
    else:
        p_all = P1[np.abs(P1) <= R + eps]
        cand = [q - p for p in p_all for q in P2[np.abs(P2 - p) <= 2 * eps + _MATCH_TOL]]
        us = np.array(cand)
        # both windows empty is also a match
        if _free_shift(-eps, eps, P1, R) and _free_shift(-eps, eps, P2, R):
            return True
    for u in np.asarray(us, dtype=np.float64):
        D = _symmetric_difference(P1, P2 - u)
        lo = max(-eps, -eps - u)
        hi = min(eps, eps - u)
        if _free_shift(lo, hi, D, R):
            return True
    return False


def hull_metric(p1: HullPoint, p2: HullPoint, tol: float = 1e-6) -> float:
    """rho(Λ1, Λ2) = min(rho_bar, 2^{-1/2}) to within ±tol by bisection on eps.

    Bisection stops at EPS_FLOOR (patch radius 1e4). Same-orbit pairs closer than that get
    the exact value d/2: a non-trivial match would need a return vector of a radius 1/eps
    patch within 2 eps of d, which linear repetitivity rules out.

    Feasibility at eps means B_{1/eps} ∩ (Λ1 - s) = B_{1/eps} ∩ (Λ2 - t) for some
    s, t in the closed ball B_eps.
    """
    if tol <= 0:
        raise InputError("tol must be positive")
    if isinstance(p1, ProductHullPoint) or isinstance(p2, ProductHullPoint):
        raise InputError("hull_metric is implemented for one-dimensional hulls")
    if p1.spec == p2.spec and same_point(p1, p2):
        return 0.0

    def sets(eps):
        r = 1.0 / eps + 3.0 * eps + 2.0
        return p1.points(r), p2.points(r)

    # on a common orbit at distance d the trivial match gives rho <= d/2
    hi = RHO_CAP
    if p1.spec == p2.spec:
        hi = min(hi, 0.5 * orbit_metric(p1, p2))
    if hi < EPS_FLOOR:
        return hi
    if hi == RHO_CAP:
        P1, P2 = sets(RHO_CAP)
        if not _feasible(P1, P2, RHO_CAP):
            return RHO_CAP
    lo = 0.0
    while hi - lo > tol and hi > EPS_FLOOR:
        mid = 0.5 * (lo + hi)
        P1, P2 = sets(mid)
        if _feasible(P1, P2, mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


# ----------------------------------------------------------------------------
# cylinders and charts


@dataclass(frozen=True)
class CylinderSet:
    """C_{Λ,eps}: transversal points agreeing with the centre on the closed ball B_{1/eps}."""

    center: HullPoint
    epsilon: float

    def __post_init__(self):
        if self.epsilon <= 0:
            raise InputError("epsilon must be positive")
        if not self.center.is_transversal():
            raise InputError("cylinder centre must be a transversal point")

    @property
    def spec(self):
        return self.center.spec

    @property
    def radius(self) -> float:
        return 1.0 / self.epsilon

    def contains(self, q: HullPoint) -> bool:
        if q.spec != self.spec or not q.is_transversal():
            return False
        return q.exact_patch(self.radius) == self.center.exact_patch(self.radius)

    def vertex_mask(self, orbit: Orbit, k0: int, k1: int) -> np.ndarray:
        """Which vertices k in [k0, k1) of an orbit give a transversal point in the set."""
        target = self.center.exact_patch(self.radius)
        A, B, x = orbit.coords(k0 - 1, k1 + 1)
        out = np.zeros(k1 - k0, dtype=bool)
        R = self.radius
        lo_idx = np.searchsorted(x, x[1:-1] - R - 1e-9)
        hi_idx = np.searchsorted(x, x[1:-1] + R + 1e-9, side="right")
        n_target = len(target)
        for i in range(k1 - k0):
            k = i + 1
            a0, b0 = A[k], B[k]
            lo, hi = lo_idx[i], hi_idx[i]
            ra, rb = A[lo:hi] - a0, B[lo:hi] - b0
            rel = golden_to_float(ra, rb)
            keep = np.abs(rel) <= R
            if int(keep.sum()) != n_target:
                continue
            out[i] = tuple(zip(ra[keep].tolist(), rb[keep].tolist())) == target
        return out


@dataclass(frozen=True)
class CellCylinder:
    """Transversal points whose tiles w_0 ... w_{m-1} to the right of the origin spell `word`."""

    spec: object
    word: str

    def __post_init__(self):
        if not self.word or any(c not in self.spec.alphabet for c in self.word):
            raise InputError(f"bad cell word {self.word!r}")

    @property
    def level(self) -> int:
        return len(self.word) - 1

    def contains(self, q: HullPoint) -> bool:
        if q.spec != self.spec or not q.is_transversal():
            return False
        k = q.vertex_of_offset()
        return q.orbit.word(k, k + len(self.word)) == self.word

    def vertex_mask(self, orbit: Orbit, k0: int, k1: int) -> np.ndarray:
        cells = self.spec.cells(self.level)
        if self.word not in cells:
            return np.zeros(k1 - k0, dtype=bool)
        return orbit.cell_ids(self.level, k0, k1) == cells.index(self.word)


def cylinder_contains(C, q: HullPoint) -> bool:
    return C.contains(q)


@dataclass(frozen=True)
class Chart:
    """O = C × B_radius, embedded by (Λ', t) -> Λ' - t."""

    cylinder: object
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise InputError("chart radius must be positive")
        min_gap = float(self.cylinder.spec.float_lengths.min())
        if 2.0 * self.radius > min_gap + 1e-12:
            raise DomainError("chart radius too large: translated copies would overlap")

    @property
    def spec(self):
        return self.cylinder.spec


@dataclass(frozen=True)
class ChartedPoint:
    transversal_part: HullPoint
    ball_exact: GoldenNumber
    ball_shift: float

    @property
    def t(self) -> float:
        return self.ball_exact.to_float() + self.ball_shift


def chart_decompose(O: Chart, q: HullPoint) -> ChartedPoint:
    """Unique (Λ', t) with |t| < radius, Λ' in C and q = phi_t(Λ')."""
    orb = q.orbit
    T = q.position
    k0, k1 = orb.vertex_range(T - O.radius - 1e-9, T + O.radius + 1e-9)
    A, B, _ = orb.coords(k0, k1)
    for i in range(k1 - k0):
        base = HullPoint(q.spec, q.address, GoldenNumber(int(A[i]), int(B[i])))
        exact = q.offset - base.offset
        t = exact.to_float() + q.shift
        if abs(t) < O.radius and O.cylinder.contains(base):
            return ChartedPoint(base, exact, q.shift)
    raise DomainError("point is not in the chart")


def recompose(c: ChartedPoint) -> HullPoint:
    p = c.transversal_part
    return HullPoint(p.spec, p.address, p.offset + c.ball_exact, p.shift + c.ball_shift)


def in_chart(O: Chart, q: HullPoint) -> bool:
    try:
        chart_decompose(O, q)
    except DomainError:
        return False
    return True
