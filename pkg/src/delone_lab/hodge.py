"""Harmonicity checks, the Liouville kernel and the one-dimensional Hodge decomposition.

The global discretisation lives on a graph whose edges are tiles with a context word:
for level i the edges are the words of length i+1 (tile w[0] followed by its right
context) and the nodes are the words of length i. A continuous tlc function is a node value
at each vertex plus sine bubbles sin(j pi s / len) on each edge; its L2(mu) and energy
inner products weight the edge integrals with the frequencies nu_C. One-forms in d=1 are
functions again, discretised per edge by {1, cos(j pi s / len)}.

The Hodge complement is computed in the forms of level i against gradients of functions of a
finer level. At equal levels the complement is the cycle space of the graph, whose dimension
is the first Betti number; refining the function level removes the cycles that are not
constant along orbits and leaves the constant form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from numpy.polynomial import Polynomial

from . import _kernels
from .calculus import HullFunction, TlcFunction
from .diffusion import _chunk_normals, _map_chunks
from .ergodic import transversal_measure
from .errors import InputError
from .golden import GoldenNumber
from .hull import HullPoint
from .profiles import PolyPiece, Sine, SumProfile
from .quadrature import composite_nodes, merge_breaks

_NODES = 24


@dataclass(frozen=True)
class Edge:
    label: str
    tail: str
    head: str
    length: float
    weight: float


@dataclass
class DiscreteL2Space:
    """H1-conforming functions on a weighted metric graph: node hats plus J bubbles per edge."""

    nodes: tuple
    edges: tuple
    J: int
    spec: object = None
    level: int | None = None
    node_index: dict = field(init=False, repr=False)

    def __post_init__(self):
        self.node_index = {u: i for i, u in enumerate(self.nodes)}

    @property
    def dim(self) -> int:
        return len(self.nodes) + self.J * len(self.edges)

    @property
    def form_dim(self) -> int:
        return (self.J + 1) * len(self.edges)

    def _edge_rule(self, e: Edge):
        b = merge_breaks(0.0, e.length, [], e.length / 4)
        return composite_nodes(b, _NODES)

    def _local_functions(self, e: Edge, s: np.ndarray, order: int):
        ln = e.length
        if order == 0:
            rows = [1 - s / ln, s / ln]
        else:
            rows = [np.full_like(s, -1 / ln), np.full_like(s, 1 / ln)]
        for j in range(1, self.J + 1):
            w = j * math.pi / ln
            rows.append(np.sin(w * s) if order == 0 else w * np.cos(w * s))
        return np.array(rows)

    def _local_forms(self, e: Edge, s: np.ndarray):
        ln = e.length
        return np.array([np.ones_like(s)] + [np.cos(j * math.pi * s / ln) for j in range(1, self.J + 1)])

    def _function_dofs(self, ei: int, e: Edge) -> list:
        n = len(self.nodes)
        base = n + ei * self.J
        return [self.node_index[e.tail], self.node_index[e.head]] + list(range(base, base + self.J))

    def _form_dofs(self, ei: int) -> list:
        base = ei * (self.J + 1)
        return list(range(base, base + self.J + 1))

    def function_matrices(self):
        """(Gram, energy) with energy = 1/2 sum nu ∫ u' v'."""
        M = np.zeros((self.dim, self.dim))
        K = np.zeros((self.dim, self.dim))
        for ei, e in enumerate(self.edges):
            s, w = self._edge_rule(e)
            V = self._local_functions(e, s, 0)
            D = self._local_functions(e, s, 1)
            idx = self._function_dofs(ei, e)
            np.add.at(M, np.ix_(idx, idx), e.weight * (V * w) @ V.T)
            np.add.at(K, np.ix_(idx, idx), 0.5 * e.weight * (D * w) @ D.T)
        return M, K

    def form_gram(self) -> np.ndarray:
        G = np.zeros((self.form_dim, self.form_dim))
        for ei, e in enumerate(self.edges):
            s, w = self._edge_rule(e)
            F = self._local_forms(e, s)
            idx = self._form_dofs(ei)
            G[np.ix_(idx, idx)] += e.weight * (F * w) @ F.T
        return G

    def form_function(self, coeffs) -> TlcFunction:
        """A form vector as a tile-frame function (the Hodge star with the unit form dt)."""
        if self.spec is None:
            raise InputError("space has no underlying hull")
        c = np.asarray(coeffs, dtype=np.float64)
        prof = {}
        for ei, e in enumerate(self.edges):
            cc = c[self._form_dofs(ei)]
            parts = [Sine(0.0, math.pi / 2, 1.0)] + [Sine(j * math.pi / e.length, math.pi / 2)
                                                       for j in range(1, self.J + 1)]
            prof[e.label] = SumProfile(parts, cc)
        return TlcFunction(self.spec, self.level, prof, "tile")

    def function(self, coeffs) -> TlcFunction:
        """A function vector as a continuous tile-frame tlc function."""
        if self.spec is None:
            raise InputError("space has no underlying hull")
        c = np.asarray(coeffs, dtype=np.float64)
        prof = {}
        for ei, e in enumerate(self.edges):
            idx = self._function_dofs(ei, e)
            a, b = c[idx[0]], c[idx[1]]
            lin = PolyPiece(Polynomial([a, (b - a) / e.length]), 0.0, e.length, 1)
            parts = [lin] + [Sine(j * math.pi / e.length, 0.0, 1.0, 0.0, e.length)
                             for j in range(1, self.J + 1)]
            prof[e.label] = SumProfile(parts, [1.0] + list(c[idx[2:]]))
        return TlcFunction(self.spec, self.level, prof, "tile")


def rauzy_space(spec, level: int, J: int) -> DiscreteL2Space:
    """Edges = level cells (words of length level+1), nodes = words of length level."""
    if level < 0 or J < 0:
        raise InputError("need level >= 0 and J >= 0")
    tm = transversal_measure(spec, level)
    edges = []
    for w, nu in zip(tm.cells, tm.weights):
        ln = spec.length_of(w[0]).to_float()
        edges.append(Edge(w, w[:level], w[1:], ln, float(nu)))
    nodes = tuple(sorted({e.tail for e in edges} | {e.head for e in edges}))
    return DiscreteL2Space(nodes, tuple(edges), J, spec, level)


def torus_space(J: int, components: int = 1) -> DiscreteL2Space:
    """`components` disjoint unit circles of total mass one."""
    nodes = tuple(f"n{c}" for c in range(components))
    edges = tuple(Edge(f"e{c}", f"n{c}", f"n{c}", 1.0, 1.0 / components) for c in range(components))
    return DiscreteL2Space(nodes, edges, J)


def disjoint_union(a: DiscreteL2Space, b: DiscreteL2Space) -> DiscreteL2Space:
    """Two spaces side by side without gluing, masses halved (negative control)."""
    if a.J != b.J:
        raise InputError("bubble counts differ")
    nodes = tuple(f"L:{u}" for u in a.nodes) + tuple(f"R:{u}" for u in b.nodes)
    edges = tuple(Edge(f"L:{e.label}", f"L:{e.tail}", f"L:{e.head}", e.length, e.weight / 2)
                  for e in a.edges) + \
        tuple(Edge(f"R:{e.label}", f"R:{e.tail}", f"R:{e.head}", e.length, e.weight / 2)
              for e in b.edges)
    return DiscreteL2Space(nodes, edges, a.J)


# ----------------------------------------------------------------------------
# Liouville


@dataclass(frozen=True)
class KernelResult:
    dimension: int
    eigenvalues: np.ndarray = field(compare=False)
    kernel: np.ndarray = field(compare=False)
    constant_alignment: float

    def to_json(self) -> dict:
        return {"dimension": self.dimension, "constant_alignment": self.constant_alignment,
                "smallest_eigenvalues": [float(v) for v in self.eigenvalues[:4]]}


def liouville_kernel(space: DiscreteL2Space, rel_tol: float = 1e-8) -> KernelResult:
    """Kernel of the energy matrix against the Gram matrix (eigenvalues below rel_tol * max)."""
    M, K = space.function_matrices()
    ev, vecs = scipy.linalg.eigh(K, M)
    dim = int(np.sum(ev < rel_tol * ev.max()))
    ker = vecs[:, :dim]
    const = np.zeros(space.dim)
    const[:len(space.nodes)] = 1.0
    # alignment of the constant with the kernel, in the M inner product
    proj = ker.T @ M @ const
    align = float(proj @ proj / (const @ M @ const)) if dim else 0.0
    return KernelResult(dim, ev, ker, align)


def liouville_kernel_dim(space: DiscreteL2Space) -> int:
    return liouville_kernel(space).dimension


# ----------------------------------------------------------------------------
# Hodge


@dataclass(frozen=True)
class HodgeResult:
    dimension: int
    gap_ratio: float
    singular_values: np.ndarray = field(compare=False)
    complement: np.ndarray = field(compare=False)
    form_space: DiscreteL2Space = field(compare=False)

    def to_json(self) -> dict:
        c = self.complement[:, 0] if self.dimension else np.zeros(0)
        return {"dimension": self.dimension, "gap_ratio": self.gap_ratio,
                "complement_vector_summary": {"norm": float(np.linalg.norm(c)),
                                              "min": float(c.min()) if c.size else 0.0,
                                              "max": float(c.max()) if c.size else 0.0}}


def _gradient_coupling(forms: DiscreteL2Space, funcs: DiscreteL2Space, parent: list) -> np.ndarray:
    """A[a, b] = <omega_a, d phi_b> with form edges given per function edge by `parent`."""
    # np.add.at: a self-loop repeats its node index
    A = np.zeros((forms.form_dim, funcs.dim))
    for ei, e in enumerate(funcs.edges):
        pe = parent[ei]
        fe = forms.edges[pe]
        if abs(fe.length - e.length) > 1e-12:
            raise InputError("parent edge has a different length")
        s, w = funcs._edge_rule(e)
        F = forms._local_forms(fe, s)
        D = funcs._local_functions(e, s, 1)
        np.add.at(A, np.ix_(forms._form_dofs(pe), funcs._function_dofs(ei, e)), e.weight * (F * w) @ D.T)
    return A


def hodge_complement(forms: DiscreteL2Space, funcs: DiscreteL2Space | None = None,
                     parent: list | None = None, rel_tol: float = 1e-9) -> HodgeResult:
    """Orthogonal complement of grad(funcs) inside the form space, by SVD.

    Coordinates are taken in an orthonormal basis of the forms, so the left singular vectors
    with vanishing singular value span the complement. The gap ratio is the least retained
    singular value over the largest discarded one (floored at machine precision).
    """
    if funcs is None:
        funcs = forms
        parent = list(range(len(forms.edges)))
    if parent is None:
        index = {e.label: i for i, e in enumerate(forms.edges)}
        m = len(forms.edges[0].label)
        parent = [index[e.label[:m]] for e in funcs.edges]
    G = forms.form_gram()
    L = np.linalg.cholesky(G)
    A = scipy.linalg.solve_triangular(L, _gradient_coupling(forms, funcs, parent), lower=True)
    U, sv, _ = np.linalg.svd(A, full_matrices=True)
    m = A.shape[0]
    full = np.zeros(m)
    full[:len(sv)] = sv
    smax = sv.max() if sv.size else 1.0
    rank = int(np.sum(full > rel_tol * smax))
    dim = m - rank
    floor = np.finfo(float).eps * smax
    discarded = full[rank:].max() if dim else 0.0
    gap = (full[rank - 1] / max(discarded, floor)) if rank else math.inf
    comp = scipy.linalg.solve_triangular(L.T, U[:, rank:], lower=False)
    return HodgeResult(dim, float(gap), full, comp, forms)


def hodge_complement_dim(spec, level: int, J: int, finer: int = 1) -> HodgeResult:
    """Forms at `level`, gradients of functions at level + finer."""
    forms = rauzy_space(spec, level, J)
    funcs = rauzy_space(spec, level + finer, J)
    return hodge_complement(forms, funcs)


def hodge_star_apply(x):
    """Hodge star for d=1 with the unit form dt: function <-> one-component field.

    Vectors of coefficients are returned unchanged (the star is the identity in the paired
    bases), so it is an isometry and an involution.
    """
    if isinstance(x, list):
        if len(x) != 1:
            raise InputError("the Hodge star is implemented for d = 1 only")
        return x[0]
    if isinstance(x, HullFunction):
        if getattr(x, "dimension", 1) != 1:
            raise InputError("the Hodge star is implemented for d = 1 only")
        return [x]
    v = np.asarray(x)
    return v.copy()


def orbit_variance(f: HullFunction, p: HullPoint, length: float = 200.0, n: int = 4001) -> float:
    """Variance of f sampled along the orbit segment [0, length] starting at p."""
    y = p.position + np.linspace(0.0, length, n)
    return float(np.var(f.along(p.orbit, y)))


# ----------------------------------------------------------------------------
# harmonicity


def harmonic_check_meanvalue(f: HullFunction, spec, word: str, eps: float, radii,
                             n_samples: int = 50, seed: int = 0) -> float:
    """max |f(p) - (1/2r) ∫_{-r}^{r} f(phi_t p) dt| over sampled p in the chart, r in radii.

    Samples sit at vertices of the cell `word` with |t| <= eps - r, so every ball stays in the
    chart fibre (-eps, eps).
    """
    orb = spec.orbit()
    level = len(word) - 1
    ids = orb.cell_ids(level, 0, 5000)
    cid = spec.cells(level).index(word)
    ks = np.nonzero(ids == cid)[0]
    if len(ks) == 0:
        raise InputError(f"no vertex of cell {word!r} found")
    rng = np.random.Generator(np.random.Philox(key=seed))
    A, B, _ = orb.coords(0, 5000)
    worst = 0.0
    for r in radii:
        if r >= eps:
            raise InputError("radius must be below the chart radius")
        for _ in range(n_samples):
            k = int(ks[rng.integers(len(ks))])
            t = rng.uniform(-(eps - r), eps - r)
            p = HullPoint(spec, None, GoldenNumber(int(A[k]), int(B[k])), t)
            avg = f.integral_along(p, -r, r) / (2 * r)
            worst = max(worst, abs(f(p) - avg))
    return worst


def martingale_residual(f: HullFunction, p: HullPoint, radius: float, t: float, n: int,
                        seed: int, dt: float = 1e-3) -> dict:
    """MC estimate of E[f(X_{t ∧ tau})] - f(p), tau the exit time of |X - x_k| < radius.

    x_k is the vertex nearest to p; the walk uses Gaussian steps of variance dt and stops at
    the first step outside the ball.
    """
    orb = p.orbit
    y = p.position
    k, s = orb.locate(np.array([y]))
    xk = orb.coords(int(k[0]), int(k[0]) + 2)[2]
    xc = xk[0] if abs(y - xk[0]) <= abs(y - xk[1]) else xk[1]
    x0 = y - xc
    if abs(x0) >= radius:
        raise InputError("start point lies outside the stopping ball")
    steps = max(1, int(round(t / dt)))
    h = t / steps
    f0 = float(f.along(orb, np.array([y]))[0])

    def chunk(c, m):
        z = _chunk_normals(seed, c, m, (steps,)) * math.sqrt(h)
        final = _kernels.stopped_walk(x0, z, radius)
        r = f.along(orb, xc + final) - f0
        return math.fsum(r), math.fsum(r * r)

    parts = _map_chunks(chunk, n)
    s1 = math.fsum(a for a, _ in parts)
    s2 = math.fsum(b for _, b in parts)
    mean = s1 / n
    var = max(s2 / n - mean * mean, 0.0) * n / max(n - 1, 1)
    se = math.sqrt(var / n)
    return {"residual": mean, "se": se, "within_3se": abs(mean) <= 3 * se}
