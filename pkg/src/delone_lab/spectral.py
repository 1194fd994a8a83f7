"""Truncated product bases on a chart, the local Dirichlet Laplacian and spectral evolutions.

On a chart O = C x (-eps, eps) the measure is nu_C x Lebesgue. A Haar-type basis of
L2(C, nu_C) built from level-i cells times the Dirichlet sine modes of the ball gives an
orthonormal basis of L2(O, mu) in which L^O is diagonal with eigenvalues -1/2 lambda_j.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import _kernels
from .calculus import ProductFunction, TlcFunction, inner
from .ergodic import transversal_measure
from .errors import InputError
from .hull import HullPoint
from .profiles import SumProfile, ball_mode
from .quadrature import composite_nodes, merge_breaks


@dataclass(frozen=True)
class CantorBasis:
    """Orthonormal vectors in L2(C, nu_C), constant on level cells; rows indexed like `cells`."""

    spec: object
    level: int
    root: str
    cells: tuple
    weights: np.ndarray = field(compare=False)
    vectors: np.ndarray = field(compare=False)

    def __len__(self) -> int:
        return len(self.vectors)

    def gram(self) -> np.ndarray:
        return (self.vectors * self.weights) @ self.vectors.T


def _helmert(node: str, level: int, cells: list, weights: dict, out: list) -> None:
    depth = len(node)
    if depth == level + 1:
        return
    kids = sorted({c[:depth + 1] for c in cells if c.startswith(node)})
    mass = {k: math.fsum(weights[c] for c in cells if c.startswith(k)) for k in kids}
    for j in range(1, len(kids)):
        before = kids[:j]
        m_before = math.fsum(mass[k] for k in before)
        v = np.array([mass[kids[j]] if any(c.startswith(k) for k in before)
                      else (-m_before if c.startswith(kids[j]) else 0.0) for c in cells])
        out.append(v)
    for k in kids:
        _helmert(k, level, cells, weights, out)


def cantor_basis(spec, level: int, root: str = "") -> CantorBasis:
    """Constant on `root` plus weighted Helmert differences down the word tree."""
    tm = transversal_measure(spec, level)
    cells = [c for c in tm.cells if c.startswith(root)]
    if not cells:
        raise InputError(f"no level-{level} cells below {root!r}")
    w = np.array([tm.weight(c) for c in cells])
    if np.any(w <= 0):
        raise InputError("zero-weight cell")
    weights = dict(zip(cells, w))
    raw = [np.ones(len(cells))]
    _helmert(root, level, cells, weights, raw)
    vecs = np.array(raw)
    norms = np.sqrt((vecs * vecs * w).sum(axis=1))
    vecs = vecs / norms[:, None]
    return CantorBasis(spec, level, root, tuple(cells), w, vecs)


@dataclass(frozen=True)
class BallBasis:
    eps: float
    J: int

    def __post_init__(self):
        if self.eps <= 0 or self.J < 1:
            raise InputError("need eps > 0 and J >= 1")

    @property
    def eigenvalues(self) -> np.ndarray:
        j = np.arange(1, self.J + 1)
        return (j * math.pi / (2 * self.eps)) ** 2

    def mode(self, j: int):
        return ball_mode(self.eps, j)

    def gram(self, order: int = 0, nodes: int = 24) -> np.ndarray:
        """Quadrature matrix of ∫ b_j^(order) b_k^(order) over (-eps, eps)."""
        b = merge_breaks(-self.eps, self.eps, [], self.eps / 8)
        x, w = composite_nodes(b, nodes)
        V = np.array([self.mode(j).eval(x, order) for j in range(1, self.J + 1)])
        return (V * w) @ V.T


def ball_dirichlet_basis(eps: float, J: int) -> BallBasis:
    return BallBasis(float(eps), int(J))


@dataclass(frozen=True)
class ProductEigenbasis:
    cantor: CantorBasis
    ball: BallBasis

    def __len__(self) -> int:
        return len(self.cantor) * self.ball.J

    @property
    def eigenvalues(self) -> np.ndarray:
        """lambda_j for every basis vector, ordered (i major, j minor)."""
        return np.tile(self.ball.eigenvalues, len(self.cantor))

    def index(self, i: int, j: int) -> int:
        return i * self.ball.J + (j - 1)

    def realize(self, coeffs) -> TlcFunction:
        """The tlc function sum c_ij b_i^C (x) b_j^B in the vertex frame of radius eps."""
        c = np.asarray(coeffs, dtype=np.float64).reshape(len(self.cantor), self.ball.J)
        modes = [self.ball.mode(j) for j in range(1, self.ball.J + 1)]
        prof = {}
        for col, cell in enumerate(self.cantor.cells):
            amp = self.cantor.vectors[:, col] @ c
            keep = [(m, a) for m, a in zip(modes, amp) if a != 0.0]
            if keep:
                prof[cell] = SumProfile([m for m, _ in keep], [a for _, a in keep])
        return TlcFunction(self.cantor.spec, self.cantor.level, prof, "vertex", self.ball.eps)

    def vector(self, i: int, j: int) -> TlcFunction:
        e = np.zeros(len(self))
        e[self.index(i, j)] = 1.0
        return self.realize(e)

    def coefficients(self, f: TlcFunction, tol: float = 1e-9) -> np.ndarray:
        """Coordinates of f; raises when f is not in the span."""
        c = np.array([inner(f, self.realize(np.eye(len(self))[k])) for k in range(len(self))])
        resid = inner(f, f) - float(c @ c)
        if resid > tol * max(1.0, inner(f, f)):
            raise InputError("function lies outside the truncated span")
        return c


def product_eigenbasis(spec, level: int, eps: float, J: int, root: str = "") -> ProductEigenbasis:
    return ProductEigenbasis(cantor_basis(spec, level, root), ball_dirichlet_basis(eps, J))


@dataclass
class SpectralOperator:
    basis: ProductEigenbasis
    symbol: np.ndarray
    assembled: np.ndarray | None = None
    mass: np.ndarray | None = None

    def apply(self, coeffs) -> np.ndarray:
        return self.symbol * np.asarray(coeffs)

    def eigenvalues(self) -> np.ndarray:
        """Generalised eigenvalues of the assembled operator against the assembled mass."""
        if self.assembled is None:
            return np.sort(self.symbol)
        return np.sort(scipy.linalg.eigh(self.assembled, self.mass, eigvals_only=True))

    def spectrum_table(self, tol: float = 1e-8) -> list:
        """(j, multiplicity, eigenvalue) rows."""
        ev = self.eigenvalues()[::-1]
        rows = []
        for v in ev:
            if rows and abs(rows[-1][2] - v) <= tol * max(1.0, abs(v)):
                rows[-1][1] += 1
            else:
                rows.append([len(rows) + 1, 1, float(v)])
        return [tuple(r) for r in rows]

    @property
    def is_self_adjoint(self) -> bool:
        return bool(np.isrealobj(self.symbol))


def local_laplacian(spec, level: int, eps: float, J: int, root: str = "") -> SpectralOperator:
    """L^O on the chart over `root`: symbol -1/2 lambda_j; assembled -K against M by quadrature.

    M_ab = <b_a, b_b> and K_ab = 1/2 <b_a', b_b'> are computed from the per-cell quadrature
    of the ball modes weighted with nu_C, independently of the closed-form eigenvalues.
    """
    basis = product_eigenbasis(spec, level, eps, J, root)
    C = basis.cantor
    G = (C.vectors * C.weights) @ C.vectors.T
    M = np.kron(G, basis.ball.gram(0))
    K = 0.5 * np.kron(G, basis.ball.gram(1))
    return SpectralOperator(basis, -0.5 * basis.eigenvalues, -K, M)


# ----------------------------------------------------------------------------
# energy


def dirichlet_energy(f, g) -> float:
    """1/2 ∫ <grad f, grad g> dmu."""
    if isinstance(f, ProductFunction):
        return 0.5 * (f.derivative((1, 0)).inner(g.derivative((1, 0)))
                      + f.derivative((0, 1)).inner(g.derivative((0, 1))))
    return 0.5 * inner(f, g, 1, 1)


def energy_by_ergodic_average(f: TlcFunction, g: TlcFunction, p: HullPoint, windows) -> list:
    """(1 / 2L) ∫_{-L/2}^{L/2} f'(phi_t p) g'(phi_t p) dt for each window L."""
    h = f.derivative(1) * g.derivative(1)
    return [0.5 * h.integral_along(p, -L / 2, L / 2) / L for L in windows]


def poincare_check(op: SpectralOperator, f, slack: float = 1e-10):
    """(holds, ratio) for ∫ f^2 <= lambda_1^{-1} 2 E(f); ratio = lambda_1 ∫ f^2 / (2 E(f))."""
    basis = op.basis
    if isinstance(f, TlcFunction):
        c = basis.coefficients(f)
    else:
        c = np.asarray(f, dtype=np.float64)
        if c.shape != (len(basis),):
            raise InputError("coefficient vector does not match the basis")
    lam = basis.eigenvalues
    mass = math.fsum(c * c)
    energy = 0.5 * math.fsum(lam * c * c)
    if energy == 0.0:
        return mass == 0.0, 0.0
    ratio = lam.min() * mass / (2 * energy)
    return ratio <= 1.0 + slack, ratio


def heat_evolve_spectral(op: SpectralOperator, coeffs, t: float) -> np.ndarray:
    if t < 0:
        raise InputError("heat evolution needs t >= 0")
    return np.exp(op.symbol * t) * np.asarray(coeffs)


def schrodinger_evolve(op: SpectralOperator, coeffs, t: float) -> np.ndarray:
    """e^{itL} applied coefficientwise: symbol exp(-i lambda_j t / 2)."""
    return np.exp(1j * op.symbol * t) * np.asarray(coeffs, dtype=np.complex128)


# ----------------------------------------------------------------------------
# Koopman eigenvalue scan


def _cell_transforms(f: TlcFunction, alphas: np.ndarray, nodes: int = 24) -> dict:
    """G_c(alpha) = ∫ exp(-2 pi i alpha s) profile_c(s) ds over the frame window."""
    spec = f.spec
    out = {}
    for w, prof in f.profiles.items():
        if f.frame == "vertex":
            lo, hi = -f.radius, f.radius
        else:
            lo, hi = 0.0, spec.length_of(w[0]).to_float()
        b = merge_breaks(lo, hi, prof.breakpoints(), 0.05)
        x, wt = composite_nodes(b, nodes)
        v = prof.eval(x, 0) * wt
        out[w] = np.exp(-2j * math.pi * np.outer(alphas, x)) @ v
    return out


def koopman_eigen_search(probe: TlcFunction, alphas, window: float, p: HullPoint | None = None) -> dict:
    """alpha -> |(1/L) ∫_{-L/2}^{L/2} exp(-2 pi i alpha t) g(phi_t p) dt| for the probe g."""
    spec = probe.spec
    p = HullPoint(spec) if p is None else p
    alphas = np.asarray(alphas, dtype=np.float64)
    const = probe.const
    g = probe + (-const) if const else probe
    orb = p.orbit
    t0 = p.position
    k0, k1 = orb.vertex_range(t0 - window / 2, t0 + window / 2)
    x = orb.coords(k0, k1)[2] - t0
    ids = orb.cell_ids(g.level, k0, k1)
    if g.frame == "tile":
        lens = spec.float_lengths[orb.tile_codes(k0, k1)]
        keep = x + lens <= window / 2
    else:
        keep = (x - g.radius >= -window / 2) & (x + g.radius <= window / 2)
    G = _cell_transforms(g, alphas)
    table = {w: i for i, w in enumerate(spec.cells(g.level))}
    total = np.zeros(len(alphas), dtype=np.complex128)
    for w, Gw in G.items():
        sel = keep & (ids == table[w])
        if sel.any():
            total += Gw * _kernels.phase_sums(x[sel], np.ones(int(sel.sum())), alphas)
    if const:
        a = alphas
        L = window
        with np.errstate(divide="ignore", invalid="ignore"):
            sinc = np.where(a == 0, L, np.sin(math.pi * a * L) / (math.pi * np.where(a == 0, 1, a)))
        total += const * sinc
    return dict(zip(alphas.tolist(), (np.abs(total) / window).tolist()))
