"""Delone set generators (substitution, cut-and-project, periodic, products) and patch queries.

One-dimensional sets are tilings of the line by letter tiles. Vertex k is the left
endpoint of tile k, vertex 0 sits at the origin, and every coordinate is an exact
element of Z[phi] stored as a pair of int64 arrays.
"""

from __future__ import annotations

import json
import math
import threading
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple, Union

import numpy as np

from .errors import DivergenceError, InputError
from .golden import PHI, GoldenNumber, golden_to_float, parse_golden

Number = Union[int, float, GoldenNumber]


def build_substitution_word(rule: dict, seed_letter: str, depth: int) -> str:
    """Return sigma^depth(seed_letter) as a string."""
    if depth < 0:
        raise InputError("depth must be >= 0")
    if seed_letter not in rule:
        raise InputError(f"unknown letter {seed_letter!r}")
    word = seed_letter
    for _ in range(depth):
        try:
            word = "".join(rule[c] for c in word)
        except KeyError as exc:
            raise InputError(f"unknown letter {exc.args[0]!r} in rule image") from None
    return word


def _apply_codes(codes: np.ndarray, images: list) -> np.ndarray:
    """Apply a substitution to an int8 letter array (vectorised per letter and slot)."""
    img_len = np.array([len(im) for im in images], dtype=np.int64)
    lens = img_len[codes]
    starts = np.concatenate(([0], np.cumsum(lens)[:-1]))
    out = np.empty(int(lens.sum()), dtype=np.int8)
    for letter, image in enumerate(images):
        mask = codes == letter
        base = starts[mask]
        for j, c in enumerate(image):
            out[base + j] = c
    return out


# ----------------------------------------------------------------------------
# specs


class _Spec1D:
    dimension = 1

    # subclasses provide: alphabet (tuple of letters), lengths (tuple of GoldenNumber)

    @property
    def letter_index(self) -> dict:
        return {c: i for i, c in enumerate(self.alphabet)}

    @property
    def length_arrays(self):
        la = np.array([g.a for g in self.lengths], dtype=np.int64)
        lb = np.array([g.b for g in self.lengths], dtype=np.int64)
        return la, lb

    @property
    def float_lengths(self) -> np.ndarray:
        return np.array([g.to_float() for g in self.lengths])

    def length_of(self, letter: str) -> GoldenNumber:
        return self.lengths[self.letter_index[letter]]

    def orbit(self, address=None) -> Orbit:
        if address is None:
            address = self.default_address
        address = self.normalize_address(address)
        key = (self, address)
        with _ORBIT_LOCK:
            orb = _ORBITS.get(key)
            if orb is None:
                orb = Orbit(self, address)
                _ORBITS[key] = orb
        return orb

    def cells(self, level: int) -> list:
        """Sorted list of legal words of length level+1 (the level-`level` transversal cells)."""
        if level < 0:
            raise InputError("level must be >= 0")
        with _ORBIT_LOCK:
            cached = _CELLS.get((self, level))
        if cached is not None:
            return cached
        words = self._factor_words(level + 1)
        with _ORBIT_LOCK:
            _CELLS[(self, level)] = words
        return words

    def _factor_words(self, m: int) -> list:
        # enumerate factors from growing windows of the reference orbit until stable
        orb = self.orbit()
        n = max(256, 64 * m)
        seen: set = set()
        stable = 0
        while stable < 2:
            orb.ensure(-n, n)
            w = orb.word(-n, n)
            found = {w[i:i + m] for i in range(len(w) - m + 1)}
            if found <= seen:
                stable += 1
            else:
                stable = 0
                seen |= found
            n *= 2
            if n > 1 << 22:
                raise DivergenceError("factor set did not stabilise")
        return sorted(seen)


@dataclass(frozen=True)
class SubstitutionSpec(_Spec1D):
    rule: tuple
    lengths: tuple
    alphabet: tuple

    kind = "substitution"

    @classmethod
    def create(cls, rule: dict, lengths: dict) -> SubstitutionSpec:
        alphabet = tuple(sorted(rule))
        if set(lengths) != set(alphabet):
            raise InputError("lengths must be given for exactly the rule letters")
        for letter, image in rule.items():
            if not image:
                raise InputError(f"empty image for {letter!r}")
            for c in image:
                if c not in rule:
                    raise InputError(f"unknown letter {c!r} in image of {letter!r}")
        glen = tuple(GoldenNumber.coerce(lengths[c]) for c in alphabet)
        if any(g.sign() <= 0 for g in glen):
            raise InputError("tile lengths must be strictly positive")
        spec = cls(tuple((c, rule[c]) for c in alphabet), glen, alphabet)
        if not spec.is_primitive():
            raise InputError("substitution rule is not primitive")
        return spec

    @property
    def rule_map(self) -> dict:
        return dict(self.rule)

    def matrix(self) -> np.ndarray:
        """Substitution matrix M[i, j] = number of letter i in sigma(letter j)."""
        idx = self.letter_index
        n = len(self.alphabet)
        m = np.zeros((n, n), dtype=np.int64)
        for c, image in self.rule:
            for x in image:
                m[idx[x], idx[c]] += 1
        return m

    def is_primitive(self) -> bool:
        m = (self.matrix() > 0).astype(np.int64)
        n = m.shape[0]
        p = np.eye(n, dtype=np.int64)
        for _ in range(n * n):
            p = np.minimum(p @ m, 1)
            if p.all():
                return True
        return False

    def seeds(self) -> list:
        """Legal two-letter seeds x|y whose sigma^p fixed point exists; returns (x, y, p)."""
        return _seeds(self)

    def _compute_seeds(self) -> list:
        rule = self.rule_map
        legal = set()
        for c in self.alphabet:
            w = c
            while len(w) < 512:
                w = "".join(rule[x] for x in w)
            legal |= {w[i:i + 2] for i in range(len(w) - 1)}
        out = []
        for pair in sorted(legal):
            x, y = pair
            for p in range(1, 4 * len(self.alphabet) + 1):
                wx = build_substitution_word(rule, x, p)
                wy = build_substitution_word(rule, y, p)
                if wx[-1] == x and wy[0] == y:
                    out.append((x, y, p))
                    break
        if not out:
            raise InputError("no two-sided fixed point seed found")
        return out

    @property
    def default_address(self) -> tuple:
        x, y, _ = self.seeds()[0]
        return (x, y)

    def normalize_address(self, address) -> tuple:
        address = tuple(address)
        if address not in {(x, y) for x, y, _ in self.seeds()}:
            raise InputError(f"address {address!r} is not a legal fixed-point seed")
        return address

    def addresses(self) -> list:
        return [(x, y) for x, y, _ in self.seeds()]

    def to_json(self) -> dict:
        return {
            "kind": "substitution",
            "rule": dict(self.rule),
            "lengths": {c: str(g) for c, g in zip(self.alphabet, self.lengths)},
        }


@dataclass(frozen=True)
class CutAndProjectSpec(_Spec1D):
    """Two-letter rotation coding: tile n is 'b' iff frac(n*slope + rho) lies in [1 - window, 1).

    The orbit address is the intercept rho.
    """

    slope: float
    window: float
    lengths: tuple
    alphabet: tuple = ("a", "b")

    kind = "cut_and_project"

    @classmethod
    def create(cls, slope: float, window: float | None = None, lengths: dict | None = None):
        slope = float(slope)
        if not 0.0 < slope < 1.0:
            raise InputError("slope must lie in (0, 1)")
        window = slope if window is None else float(window)
        if not 0.0 < window < 1.0:
            raise InputError("window must lie in (0, 1)")
        lengths = lengths or {"a": "phi", "b": "1"}
        glen = (GoldenNumber.coerce(lengths["a"]), GoldenNumber.coerce(lengths["b"]))
        if any(g.sign() <= 0 for g in glen):
            raise InputError("tile lengths must be strictly positive")
        return cls(slope, window, glen)

    @property
    def default_address(self) -> tuple:
        return (0.5,)

    def normalize_address(self, address) -> tuple:
        address = tuple(float(x) for x in address)
        if len(address) != 1:
            raise InputError("cut-and-project address is a single intercept")
        return (address[0] % 1.0,)

    def letters(self, rho: float, n0: int, n1: int) -> np.ndarray:
        n = np.arange(n0, n1, dtype=np.float64)
        frac = np.mod(n * self.slope + rho, 1.0)
        return (frac >= 1.0 - self.window).astype(np.int8)

    def arcs(self, m: int):
        """Partition of the intercept circle into arcs coding words of length m.

        Returns (words, arc lengths) merged by word.
        """
        pts = [0.0]
        for j in range(m):
            pts.append((-j * self.slope) % 1.0)
            pts.append((1.0 - self.window - j * self.slope) % 1.0)
        pts = np.unique(np.array(pts))
        bounds = np.append(pts, 1.0)
        out: dict = {}
        for lo, hi in zip(bounds[:-1], bounds[1:]):
            if hi - lo <= 0.0:
                continue
            mid = 0.5 * (lo + hi)
            codes = self.letters(mid, 0, m)
            w = "".join(self.alphabet[c] for c in codes)
            out[w] = out.get(w, 0.0) + (hi - lo)
        words = sorted(out)
        return words, np.array([out[w] for w in words])

    def _factor_words(self, m: int) -> list:
        return self.arcs(m)[0]

    def to_json(self) -> dict:
        return {
            "kind": "cut_and_project",
            "slope": self.slope,
            "window": self.window,
            "lengths": {c: str(g) for c, g in zip(self.alphabet, self.lengths)},
        }


@dataclass(frozen=True)
class PeriodicSpec(_Spec1D):
    """The lattice basis*Z; one tile letter 'z'."""

    basis: GoldenNumber

    kind = "periodic"
    alphabet = ("z",)

    @classmethod
    def create(cls, basis=1) -> PeriodicSpec:
        g = GoldenNumber.coerce(basis)
        if g.sign() <= 0:
            raise InputError("periodic basis must be positive")
        return cls(g)

    @property
    def lengths(self) -> tuple:
        return (self.basis,)

    @property
    def default_address(self) -> tuple:
        return ()

    def normalize_address(self, address) -> tuple:
        if tuple(address):
            raise InputError("periodic sets have a single orbit; address must be empty")
        return ()

    def _factor_words(self, m: int) -> list:
        return ["z" * m]

    def to_json(self) -> dict:
        return {"kind": "periodic", "basis": str(self.basis)}


@dataclass(frozen=True)
class ProductSpec:
    """Cartesian product of two one-dimensional specs (a Delone set in R^2)."""

    first: _Spec1D
    second: _Spec1D

    kind = "product"
    dimension = 2

    @property
    def factors(self) -> tuple:
        return (self.first, self.second)

    def to_json(self) -> dict:
        return {"kind": "product", "factors": [self.first.to_json(), self.second.to_json()]}


@lru_cache(maxsize=None)
def _seeds(spec: SubstitutionSpec) -> list:
    return spec._compute_seeds()


DeloneSpec = Union[SubstitutionSpec, CutAndProjectSpec, PeriodicSpec, ProductSpec]

FIBONACCI_RULE = {"a": "ab", "b": "a"}


def fibonacci_spec() -> SubstitutionSpec:
    return SubstitutionSpec.create(FIBONACCI_RULE, {"a": "phi", "b": "1"})


def periodic_spec(basis=1) -> PeriodicSpec:
    return PeriodicSpec.create(basis)


def spec_from_json(doc) -> DeloneSpec:
    if isinstance(doc, str):
        doc = json.loads(doc)
    if not isinstance(doc, dict) or "kind" not in doc:
        raise InputError("spec document needs a 'kind'")
    kind = doc["kind"]
    allowed = {
        "substitution": {"kind", "rule", "lengths"},
        "cut_and_project": {"kind", "slope", "window", "lengths"},
        "periodic": {"kind", "basis"},
        "product": {"kind", "factors"},
    }
    if kind not in allowed:
        raise InputError(f"unknown spec kind {kind!r}")
    extra = set(doc) - allowed[kind]
    if extra:
        raise InputError(f"unknown spec keys {sorted(extra)}")
    try:
        if kind == "substitution":
            return SubstitutionSpec.create(dict(doc["rule"]), dict(doc["lengths"]))
        if kind == "cut_and_project":
            return CutAndProjectSpec.create(doc["slope"], doc.get("window"), doc.get("lengths"))
        if kind == "periodic":
            return PeriodicSpec.create(_parse_number(doc.get("basis", "1")))
        factors = doc["factors"]
        if len(factors) != 2:
            raise InputError("product needs exactly two factors")
        a, b = (spec_from_json(f) for f in factors)
        if a.dimension != 1 or b.dimension != 1:
            raise InputError("product factors must be one-dimensional")
        return ProductSpec(a, b)
    except KeyError as exc:
        raise InputError(f"missing spec field {exc.args[0]!r}") from None


def spec_to_json(spec: DeloneSpec) -> str:
    return json.dumps(spec.to_json(), sort_keys=True)


def _parse_number(value):
    if isinstance(value, str):
        return parse_golden(value)
    return value


# ----------------------------------------------------------------------------
# orbits

_ORBITS: dict = {}
_CELLS: dict = {}
_ORBIT_LOCK = threading.RLock()


class Orbit:
    """A bi-infinite tiling word plus exact vertex coordinates, grown on demand."""

    def __init__(self, spec: _Spec1D, address: tuple):
        self.spec = spec
        self.address = address
        self._lock = threading.RLock()
        self._la, self._lb = spec.length_arrays
        self._left = np.zeros(0, dtype=np.int8)   # tiles -n_left .. -1
        self._right = np.zeros(0, dtype=np.int8)  # tiles 0 .. n_right-1
        self._sub_depth = 0
        self._cell_cache: dict = {}
        self._grow(64, 64)

    # -- growth -----------------------------------------------------------

    def _grow(self, n_left: int, n_right: int) -> None:
        spec = self.spec
        if isinstance(spec, SubstitutionSpec):
            x, y = self.address
            p = next(p for sx, sy, p in spec.seeds() if (sx, sy) == (x, y))
            idx = spec.letter_index
            images = [np.array([idx[c] for c in im], dtype=np.int8) for _, im in spec.rule]
            left = np.array([idx[x]], dtype=np.int8)
            right = np.array([idx[y]], dtype=np.int8)
            while len(left) < n_left or len(right) < n_right:
                for _ in range(p):
                    left = _apply_codes(left, images)
                    right = _apply_codes(right, images)
            self._left, self._right = left, right
        elif isinstance(spec, CutAndProjectSpec):
            rho = self.address[0]
            self._left = spec.letters(rho, -n_left, 0)
            self._right = spec.letters(rho, 0, n_right)
        else:
            self._left = np.zeros(n_left, dtype=np.int8)
            self._right = np.zeros(n_right, dtype=np.int8)
        self._rebuild()

    def _rebuild(self) -> None:
        codes = np.concatenate((self._left, self._right))
        la, lb = self._la[codes], self._lb[codes]
        n_left = len(self._left)
        ca = np.concatenate(([0], np.cumsum(la)))
        cb = np.concatenate(([0], np.cumsum(lb)))
        self._codes = codes
        self._origin = n_left
        self._A = ca - ca[n_left]
        self._B = cb - cb[n_left]
        self._x = golden_to_float(self._A, self._B)
        self._cell_cache = {}

    def ensure(self, k_lo: int, k_hi: int) -> None:
        """Make tiles with indices in [k_lo, k_hi) available."""
        with self._lock:
            need_left = max(0, -k_lo)
            need_right = max(0, k_hi)
            if need_left > len(self._left) or need_right > len(self._right):
                self._grow(max(need_left, 2 * len(self._left)), max(need_right, 2 * len(self._right)))

    def ensure_span(self, lo: float, hi: float) -> None:
        """Make vertex coordinates cover [lo, hi]."""
        with self._lock:
            while self._x[0] > lo or self._x[-1] < hi:
                n_left = len(self._left) * (2 if self._x[0] > lo else 1)
                n_right = len(self._right) * (2 if self._x[-1] < hi else 1)
                self._grow(n_left, n_right)

    # -- accessors ----------------------------------------------------------

    @property
    def k_min(self) -> int:
        return -self._origin

    @property
    def k_max(self) -> int:
        """Largest vertex index available."""
        return len(self._codes) - self._origin

    def vertex_index(self, k):
        return np.asarray(k) + self._origin

    def coords(self, k0: int, k1: int):
        """Exact vertex coordinates (A, B) and floats for vertices k0 <= k < k1."""
        self.ensure(k0, k1)
        i0, i1 = k0 + self._origin, k1 + self._origin
        return self._A[i0:i1], self._B[i0:i1], self._x[i0:i1]

    def tile_codes(self, k0: int, k1: int) -> np.ndarray:
        self.ensure(k0, k1)
        return self._codes[k0 + self._origin:k1 + self._origin]

    def word(self, k0: int, k1: int) -> str:
        alpha = self.spec.alphabet
        return "".join(alpha[c] for c in self.tile_codes(k0, k1))

    def vertex_range(self, lo: float, hi: float) -> tuple:
        """Vertex indices (k0, k1), k1 exclusive, with lo <= x_k <= hi (float test)."""
        self.ensure_span(lo, hi)
        i0 = int(np.searchsorted(self._x, lo, side="left"))
        i1 = int(np.searchsorted(self._x, hi, side="right"))
        return i0 - self._origin, i1 - self._origin

    def locate(self, t):
        """Tile index k and local coordinate s = t - x_k with x_k <= t < x_{k+1}."""
        t = np.asarray(t, dtype=np.float64)
        if t.size:
            self.ensure_span(float(t.min()) - 1.0, float(t.max()) + 1.0)
        i = np.searchsorted(self._x, t, side="right") - 1
        return i - self._origin, t - self._x[i]

    def cell_ids(self, level: int, k0: int, k1: int) -> np.ndarray:
        """Level-`level` cell index of vertices k0 <= k < k1 (word w_k ... w_{k+level})."""
        m = level + 1
        self.ensure(k0, k1 + m)
        with self._lock:
            table = self._cell_cache.get(level)
            if table is None:
                table = self._build_cells(level)
                self._cell_cache[level] = table
            return table[k0 + self._origin:k1 + self._origin]

    def _build_cells(self, level: int) -> np.ndarray:
        m = level + 1
        cells = self.spec.cells(level)
        base = len(self.spec.alphabet)
        weights = base ** np.arange(m - 1, -1, -1, dtype=np.int64)
        idx = self.spec.letter_index
        keys = np.array([sum(idx[c] * int(w) for c, w in zip(word, weights)) for word in cells],
                        dtype=np.int64)
        order = np.argsort(keys)
        codes = self._codes.astype(np.int64)
        n = len(codes) - m + 1
        enc = np.zeros(max(n, 0), dtype=np.int64)
        for j in range(m):
            enc += codes[j:j + n] * weights[j]
        pos = np.searchsorted(keys[order], enc)
        pos = np.minimum(pos, len(keys) - 1)
        ok = keys[order][pos] == enc
        if not ok.all():
            raise DivergenceError("orbit contains a word outside the enumerated language")
        out = np.full(len(codes), -1, dtype=np.int64)
        out[:n] = order[pos]
        return out


# ----------------------------------------------------------------------------
# clusters


@dataclass(frozen=True)
class Cluster:
    """Finite point patch anchored so its lexicographically least point is the origin.

    One-dimensional points are exact (a, b) pairs meaning a + b*phi; two-dimensional
    points are pairs of such pairs.
    """

    points: tuple
    dimension: int = 1

    def __len__(self) -> int:
        return len(self.points)

    @classmethod
    def from_exact(cls, A: np.ndarray, B: np.ndarray) -> Cluster:
        A = np.asarray(A, dtype=np.int64)
        B = np.asarray(B, dtype=np.int64)
        if len(A) == 0:
            return cls((), 1)
        # distinct Delone points are >= r apart, so float order is the exact order
        order = np.argsort(golden_to_float(A, B), kind="stable")
        A, B = A[order] - A[order[0]], B[order] - B[order[0]]
        return cls(tuple(zip(A.tolist(), B.tolist())), 1)

    @classmethod
    def from_exact_2d(cls, pts) -> Cluster:
        if not pts:
            return cls((), 2)
        g = [(GoldenNumber(*x), GoldenNumber(*y)) for x, y in pts]
        x0, y0 = min(g)
        anchored = sorted((x - x0, y - y0) for x, y in g)
        return cls(tuple((tuple(x), tuple(y)) for x, y in anchored), 2)

    def golden_points(self) -> list:
        if self.dimension == 1:
            return [GoldenNumber(a, b) for a, b in self.points]
        return [(GoldenNumber(*x), GoldenNumber(*y)) for x, y in self.points]

    def as_float(self) -> np.ndarray:
        if self.dimension == 1:
            return np.array([a + b * PHI for a, b in self.points])
        return np.array([[x[0] + x[1] * PHI, y[0] + y[1] * PHI] for x, y in self.points])

    def diameter(self) -> float:
        pts = self.as_float()
        if len(pts) < 2:
            return 0.0
        if self.dimension == 1:
            return float(pts[-1] - pts[0])
        d = pts[:, None, :] - pts[None, :, :]
        return float(np.sqrt((d ** 2).sum(-1)).max())

    def to_csv(self) -> str:
        lines = []
        if self.dimension == 1:
            lines.append("index,a,b,x")
            for i, (a, b) in enumerate(self.points):
                lines.append(f"{i},{a},{b},{a + b * PHI:.17g}")
        else:
            lines.append("index,xa,xb,ya,yb,x,y")
            for i, (x, y) in enumerate(self.points):
                fx, fy = x[0] + x[1] * PHI, y[0] + y[1] * PHI
                lines.append(f"{i},{x[0]},{x[1]},{y[0]},{y[1]},{fx:.17g},{fy:.17g}")
        return "\n".join(lines) + "\n"


def _ball_1d(orbit: Orbit, center, radius: float):
    """Exact coordinates of the orbit's vertices in the closed ball B_radius(center)."""
    c = center if isinstance(center, GoldenNumber) else None
    cf = float(center)
    k0, k1 = orbit.vertex_range(cf - radius - 1.0, cf + radius + 1.0)
    A, B, x = orbit.coords(k0, k1)
    if c is not None:
        diff = golden_to_float(A - c.a, B - c.b)
    else:
        diff = x - cf
    keep = np.abs(diff) <= radius
    return A[keep], B[keep], diff[keep]


def patch(spec: DeloneSpec, center, radius: float, address=None) -> Cluster:
    """Points of the set in the closed ball B_radius(center), re-anchored."""
    if radius <= 0:
        raise InputError("radius must be positive")
    if spec.dimension == 1:
        A, B, _ = _ball_1d(spec.orbit(address), center, radius)
        return Cluster.from_exact(A, B)
    cx, cy = center
    ax, bx, dx = _ball_1d(spec.first.orbit(), cx, radius)
    ay, by, dy = _ball_1d(spec.second.orbit(), cy, radius)
    pts = []
    for i in range(len(ax)):
        for j in range(len(ay)):
            if dx[i] ** 2 + dy[j] ** 2 <= radius ** 2:
                pts.append(((int(ax[i]), int(bx[i])), (int(ay[j]), int(by[j]))))
    return Cluster.from_exact_2d(pts)


def delone_constants(spec: DeloneSpec, probe_radius: float) -> tuple:
    """(packing r, covering R) observed in the probe ball.

    r is the smallest distance between distinct points, R the largest hole radius.
    For products both follow from the factors: r = min(r1, r2), R = sqrt(R1^2 + R2^2).
    """
    if spec.dimension == 2:
        r1, c1 = delone_constants(spec.first, probe_radius)
        r2, c2 = delone_constants(spec.second, probe_radius)
        return min(r1, r2), math.hypot(c1, c2)
    orb = spec.orbit()
    k0, k1 = orb.vertex_range(-probe_radius, probe_radius)
    if k1 - k0 < 2:
        raise InputError("probe window contains fewer than 2 points")
    A, B, _ = orb.coords(k0, k1)
    gaps = golden_to_float(np.diff(A), np.diff(B))
    return float(gaps.min()), float(gaps.max()) / 2.0


def enumerate_clusters(spec: DeloneSpec, radius: float, scan_bound: float = 2.0e5,
                       address=None) -> list:
    """Distinct translation classes of B_radius(x) ∩ Λ as x sweeps a growing scan window.

    The window doubles until two successive doublings add no class; the count is then an
    FLC witness. Raises DivergenceError if the bound is reached first.
    """
    if radius <= 0:
        raise InputError("radius must be positive")
    if spec.dimension != 1:
        raise InputError("cluster enumeration is implemented for one-dimensional sets")
    orb = spec.orbit(address)
    span = max(32.0, 16.0 * radius)
    seen: dict = {}
    quiet = 0
    while quiet < 2:
        before = len(seen)
        for key, cl in _scan_clusters(orb, radius, span).items():
            seen.setdefault(key, cl)
        quiet = quiet + 1 if len(seen) == before else 0
        if quiet < 2:
            span *= 2.0
            if span > scan_bound:
                raise DivergenceError(
                    f"cluster count not stable up to scan bound {scan_bound} (FLC not witnessed)")
    return [seen[k] for k in sorted(seen)]


def _scan_clusters(orb: Orbit, radius: float, span: float) -> dict:
    k0, k1 = orb.vertex_range(-span - radius - 2.0, span + radius + 2.0)
    A, B, x = orb.coords(k0, k1)
    n = len(x)
    windows = set()
    two_r = 2.0 * radius
    # critical centres: p - R (p enters, window [p-2R, p]) and p + R (window [p, p+2R])
    for k in range(n):
        if -span <= x[k] - radius <= span:
            lo = k
            while lo - 1 >= 0 and golden_to_float(A[k] - A[lo - 1], B[k] - B[lo - 1]) <= two_r:
                lo -= 1
            windows.add((lo, k))
        if -span <= x[k] + radius <= span:
            hi = k
            while hi + 1 < n and golden_to_float(A[hi + 1] - A[k], B[hi + 1] - B[k]) <= two_r:
                hi += 1
            windows.add((k, hi))
    crit = np.sort(np.concatenate((x - radius, x + radius)))
    crit = crit[(crit >= -span) & (crit <= span)]
    mids = 0.5 * (crit[:-1] + crit[1:])
    mids = mids[np.diff(crit) > 1e-9]
    left = np.searchsorted(x, mids - radius, side="left")
    right = np.searchsorted(x, mids + radius, side="right") - 1
    for i, j in zip(left.tolist(), right.tolist()):
        windows.add((i, j))
    out = {}
    for i, j in windows:
        if j < i:
            cl = Cluster((), 1)
        else:
            cl = Cluster.from_exact(A[i:j + 1], B[i:j + 1])
        out[cl.points] = cl
    return out


def find_occurrences(orb: Orbit, cluster: Cluster, k0: int, k1: int) -> np.ndarray:
    """Vertex indices k in [k0, k1) such that cluster + x_k is a subset of the set."""
    if cluster.dimension != 1:
        raise InputError("occurrence search is one-dimensional")
    if not cluster.points:
        return np.arange(k0, k1)
    offs = cluster.points
    extent = max(a + b * PHI for a, b in offs)
    pad = int(extent / orb.spec.float_lengths.min()) + 4
    A, B, x = orb.coords(k0 - 2, k1 + pad)
    base = np.arange(2, 2 + (k1 - k0))
    ok = np.ones(len(base), dtype=bool)
    for a, b in offs:
        ta = A[base] + a
        tb = B[base] + b
        tx = golden_to_float(ta, tb)
        pos = np.searchsorted(x, tx - 1e-7)
        pos = np.minimum(pos, len(x) - 1)
        ok &= (A[pos] == ta) & (B[pos] == tb)
    return k0 + np.nonzero(ok)[0]


class RepetitivityEstimate(NamedTuple):
    radius: float
    half_window_radius: float
    stable: bool
    occurrences: int


def repetitivity_radius(spec: DeloneSpec, cluster: Cluster, scan_bound: float = 2.0e4,
                        address=None) -> RepetitivityEstimate:
    """Scan-window estimate of the smallest R such that every ball B_R(x) holds a translate of P.

    Every x between the first and last occurrence is covered iff R >= (gap + diam P) / 2 for
    all consecutive occurrence gaps. The value is an upper-bound style estimate from the scan
    and is reported together with the half-window value as a stability check.
    """
    if spec.dimension != 1:
        raise InputError("repetitivity radius is implemented for one-dimensional sets")
    orb = spec.orbit(address)

    def estimate(bound):
        k0, k1 = orb.vertex_range(-bound, bound)
        occ = find_occurrences(orb, cluster, k0, k1)
        if len(occ) == 0:
            raise InputError("cluster never occurs in the scan window")
        _, _, x = orb.coords(int(occ[0]), int(occ[-1]) + 1)
        t = x[occ - occ[0]]
        diam = cluster.diameter()
        if len(t) < 2:
            return diam / 2.0, len(t)
        return float((np.diff(t).max() + diam) / 2.0), len(t)

    r_full, n_occ = estimate(scan_bound)
    r_half, _ = estimate(scan_bound / 2.0)
    return RepetitivityEstimate(r_full, r_half, abs(r_full - r_half) <= 1e-12, n_occ)
