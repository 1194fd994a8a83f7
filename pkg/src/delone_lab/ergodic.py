"""Cluster counting, uniform frequencies and the invariant measure mu = nu_C x Lebesgue.

Two frequency normalisations appear: per tile (occurrences per point of the set) and per
unit volume (occurrences per unit length). They differ by the point density.
"""

from __future__ import annotations

import math
from functools import lru_cache
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, InputError
from .hull import CellCylinder, Chart, CylinderSet, HullPoint
from .sets import (Cluster, CutAndProjectSpec, PeriodicSpec, build_substitution_word,
                   find_occurrences)


def _perron_vector(M: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eig(M.astype(np.float64))
    k = int(np.argmax(vals.real))
    v = np.abs(vecs[:, k].real)
    return v / v.sum()


def word_frequencies(spec, m: int) -> dict:
    """Per-tile frequency of every legal word of length m.

    Substitutions use the Perron vector of the induced substitution on length-m words;
    rotation codings use arc lengths on the intercept circle.
    """
    if m < 1:
        raise InputError("word length must be >= 1")
    if isinstance(spec, PeriodicSpec):
        return {"z" * m: 1.0}
    if isinstance(spec, CutAndProjectSpec):
        words, arcs = spec.arcs(m)
        return dict(zip(words, arcs / arcs.sum()))
    words = spec.cells(m - 1)
    index = {w: i for i, w in enumerate(words)}
    rule = spec.rule_map
    M = np.zeros((len(words), len(words)))
    for w in words:
        image = "".join(rule[c] for c in w)
        for j in range(len(rule[w[0]])):
            u = image[j:j + m]
            if u not in index:
                raise DomainError(f"induced substitution left the language at {u!r}")
            M[index[u], index[w]] += 1
    v = _perron_vector(M)
    return dict(zip(words, v))


def letter_frequencies(spec) -> dict:
    return word_frequencies(spec, 1)


def mean_tile_length(spec) -> float:
    freqs = letter_frequencies(spec)
    return sum(freqs[c] * spec.length_of(c).to_float() for c in spec.alphabet)


def point_density(spec) -> float:
    """Points per unit volume."""
    if spec.dimension == 2:
        return point_density(spec.first) * point_density(spec.second)
    return 1.0 / mean_tile_length(spec)


@dataclass(frozen=True)
class TransversalMeasure:
    """nu_C on the level-i cells: per-volume weights plus the per-tile frequencies."""

    level: int
    cells: tuple
    weights: np.ndarray = field(compare=False)
    tile_frequencies: np.ndarray = field(compare=False)

    def weight(self, word: str) -> float:
        return float(self.weights[self.cells.index(word)])

    def as_dict(self, per_tile: bool = False) -> dict:
        vals = self.tile_frequencies if per_tile else self.weights
        return dict(zip(self.cells, vals.tolist()))

    def children_sums(self, finer: TransversalMeasure) -> np.ndarray:
        """Sum of the finer weights inside each cell of this level."""
        out = np.zeros(len(self.cells))
        idx = {w: i for i, w in enumerate(self.cells)}
        for w, v in zip(finer.cells, finer.weights):
            out[idx[w[:self.level + 1]]] += v
        return out


def transversal_measure(spec, level: int) -> TransversalMeasure:
    if level < 0:
        raise InputError("level must be >= 0")
    return _transversal_measure(spec, int(level))


@lru_cache(maxsize=256)
def _transversal_measure(spec, level: int) -> TransversalMeasure:
    freqs = word_frequencies(spec, level + 1)
    cells = tuple(spec.cells(level))
    tile = np.array([freqs[w] for w in cells])
    weights = tile / mean_tile_length(spec)
    tile.setflags(write=False)
    weights.setflags(write=False)
    return TransversalMeasure(level, cells, weights, tile)


def word_cluster(spec, word: str) -> Cluster:
    """The endpoints of consecutive tiles spelling `word`, as a cluster."""
    la, lb = spec.length_arrays
    idx = spec.letter_index
    codes = [idx[c] for c in word]
    A = np.concatenate(([0], np.cumsum(la[codes])))
    B = np.concatenate(([0], np.cumsum(lb[codes])))
    return Cluster.from_exact(A, B)


# ----------------------------------------------------------------------------
# counting


def cluster_count(P: Cluster, spec, window, address=None) -> int:
    """Number of t with P + t contained in A ∩ Λ, for the half-open window A = [lo, hi)."""
    lo, hi = (float(v) for v in window)
    if hi <= lo:
        return 0
    orb = spec.orbit(address)
    k0, k1 = orb.vertex_range(lo, hi)
    A, B, x = orb.coords(k0, k1)
    k1 = k0 + int(np.searchsorted(x, hi, side="left"))
    if k1 <= k0:
        return 0
    occ = find_occurrences(orb, P, k0, k1)
    if len(occ) == 0:
        return 0
    ext = P.as_float().max() if len(P) else 0.0
    starts = x[occ - k0]
    return int(np.count_nonzero(starts + ext < hi))


@dataclass
class FrequencyEntry:
    cluster: Cluster
    windows: list
    counts: list
    volumes: list
    tiles: list

    @property
    def frequencies(self) -> list:
        """Per unit volume."""
        return [c / v for c, v in zip(self.counts, self.volumes)]

    @property
    def per_tile(self) -> list:
        return [c / n for c, n in zip(self.counts, self.tiles)]

    @property
    def value(self) -> float:
        return self.frequencies[-1]

    @property
    def per_tile_value(self) -> float:
        return self.per_tile[-1]

    @property
    def diagnostics(self) -> list:
        """|estimate(L_k) - estimate(L_{k+1})| for consecutive windows (per volume)."""
        f = self.frequencies
        return [abs(a - b) for a, b in zip(f[:-1], f[1:])]


def cluster_frequency(P: Cluster, spec, window_lengths, address=None) -> FrequencyEntry:
    """Counts of P in centred windows [-L/2, L/2) for increasing L."""
    L = [float(v) for v in window_lengths]
    if not L or any(b <= a for a, b in zip(L[:-1], L[1:])) or L[0] <= 0:
        raise InputError("window lengths must be positive and strictly increasing")
    orb = spec.orbit(address)
    counts, tiles = [], []
    for length in L:
        counts.append(cluster_count(P, spec, (-length / 2, length / 2), address))
        k0, k1 = orb.vertex_range(-length / 2, length / 2)
        _, _, x = orb.coords(k0, k1)
        tiles.append(int(np.count_nonzero(x < length / 2)))
    return FrequencyEntry(P, L, counts, L, tiles)


class FrequencyTable:
    """Rows (cluster-id, window, count, volume, frequency)."""

    def __init__(self):
        self.entries: dict = {}

    def add(self, name: str, entry: FrequencyEntry) -> None:
        self.entries[name] = entry

    def to_csv(self) -> str:
        lines = ["cluster_id,window,count,volume,frequency,per_tile"]
        for name, e in self.entries.items():
            for w, c, v, f, pt in zip(e.windows, e.counts, e.volumes, e.frequencies, e.per_tile):
                lines.append(f"{name},{w:.17g},{c},{v:.17g},{f:.17g},{pt:.17g}")
        return "\n".join(lines) + "\n"


def patch_frequency(cylinder: CylinderSet, length: float = 2.0e4) -> float:
    """Per-volume frequency of the cylinder's ball patch, by exact counting on [-L/2, L/2)."""
    orb = cylinder.spec.orbit()
    k0, k1 = orb.vertex_range(-length / 2, length / 2)
    mask = cylinder.vertex_mask(orb, k0, k1)
    return float(mask.sum()) / length


def transversal_weight(cylinder) -> float:
    """nu_C of a cylinder: exact for word cells, counted for ball-patch cylinders."""
    if isinstance(cylinder, CellCylinder):
        spec = cylinder.spec
        freqs = word_frequencies(spec, len(cylinder.word))
        return freqs.get(cylinder.word, 0.0) / mean_tile_length(spec)
    return patch_frequency(cylinder)


def cylinder_measure(O: Chart) -> float:
    """mu(O) = nu_C(C) * Vol(B_eps); Vol = 2 eps in dimension one."""
    if not isinstance(O, Chart):
        raise InputError("expected a Chart")
    return transversal_weight(O.cylinder) * 2.0 * O.radius


def chart_vertex_mask(O: Chart, orbit, k0: int, k1: int) -> np.ndarray:
    return O.cylinder.vertex_mask(orbit, k0, k1)


def occupation_exact(O: Chart, p: HullPoint, length: float) -> float:
    """Exact fraction of the orbit segment [t0, t0 + length] spent in O."""
    orb = p.orbit
    t0 = p.position
    k0, k1 = orb.vertex_range(t0 - O.radius - 1, t0 + length + O.radius + 1)
    _, _, x = orb.coords(k0, k1)
    mask = O.cylinder.vertex_mask(orb, k0, k1)
    c = x[mask]
    lo = np.clip(c - O.radius, t0, t0 + length)
    hi = np.clip(c + O.radius, t0, t0 + length)
    return float(np.sum(hi - lo)) / length


def occupation_mc(O: Chart, p: HullPoint, length: float, n: int, seed: int):
    """Monte Carlo occupation fraction from n uniform times on the segment; returns (value, se)."""
    rng = np.random.Generator(np.random.Philox(key=seed))
    orb = p.orbit
    t0 = p.position
    times = t0 + length * rng.random(n)
    k0, k1 = orb.vertex_range(t0 - O.radius - 1, t0 + length + O.radius + 1)
    _, _, x = orb.coords(k0, k1)
    mask = O.cylinder.vertex_mask(orb, k0, k1)
    j = np.clip(np.searchsorted(x, times), 1, len(x) - 1)
    near = np.where(times - x[j - 1] < x[j] - times, j - 1, j)
    inside = mask[near] & (np.abs(times - x[near]) < O.radius)
    frac = float(inside.mean())
    return frac, math.sqrt(max(frac * (1 - frac), 0.0) / n)


def ergodic_average(f, p: HullPoint, window_lengths, nodes: int = 16) -> list:
    """(1/L) ∫_{-L/2}^{L/2} f(phi_t p) dt for each L, by composite quadrature on the tile pieces."""
    L = [float(v) for v in window_lengths]
    if any(b <= a for a, b in zip(L[:-1], L[1:])):
        raise InputError("window lengths must be increasing")
    out = []
    for length in L:
        out.append(f.integral_along(p, -length / 2, length / 2, nodes=nodes) / length)
    return out


def frequency_oracle_counts(rule: dict, depth: int, factor: str) -> tuple:
    """String-count oracle: (occurrences of factor in sigma^depth(a), word length)."""
    w = build_substitution_word(rule, "a", depth)
    count = sum(1 for i in range(len(w) - len(factor) + 1) if w.startswith(factor, i))
    return count, len(w)
