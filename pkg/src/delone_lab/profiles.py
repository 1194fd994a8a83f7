"""Closed-form orbit profiles with analytic derivatives.

A profile is a function of one real variable s. `smoothness` is the Sobolev order: all
derivatives below it are continuous, the derivative of that order is piecewise bounded.
Derivatives are evaluated piecewise and never by finite differences.
"""

from __future__ import annotations

import math

import numpy as np
from numpy.polynomial import Polynomial

from .errors import InputError

INF = 10 ** 9


class Profile:
    smoothness: int = INF

    def __call__(self, s, order: int = 0):
        return self.eval(np.asarray(s, dtype=np.float64), order)

    def eval(self, s: np.ndarray, order: int) -> np.ndarray:
        raise NotImplementedError

    def breakpoints(self) -> list:
        return []

    def support(self):
        """(lo, hi) outside of which the profile vanishes, or None."""
        return None

    def __add__(self, other):
        return SumProfile((self, other), (1.0, 1.0))

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return SumProfile((self,), (float(other),))
        return ProductProfile(self, other)

    __rmul__ = __mul__

    def shifted(self, c: float) -> Profile:
        """s -> self(s - c)."""
        return ShiftProfile(self, c)

    def to_json(self) -> dict:
        raise InputError(f"{type(self).__name__} is not serializable")


class ZeroProfile(Profile):
    def eval(self, s, order):
        return np.zeros_like(s)

    def support(self):
        return (0.0, 0.0)

    def to_json(self):
        return {"kind": "zero"}


class PolyPiece(Profile):
    """A polynomial on [lo, hi], zero outside."""

    def __init__(self, poly: Polynomial, lo: float, hi: float, smoothness: int, meta=None):
        self.poly = poly
        self.lo, self.hi = float(lo), float(hi)
        self.smoothness = smoothness
        self.meta = meta

    def eval(self, s, order):
        p = self.poly.deriv(order) if order else self.poly
        inside = (s >= self.lo) & (s <= self.hi)
        return np.where(inside, p(s), 0.0)

    def breakpoints(self):
        return [self.lo, self.hi]

    def support(self):
        return (self.lo, self.hi)

    def to_json(self):
        if self.meta is None:
            return super().to_json()
        return dict(self.meta)


def poly_bump(eps: float, m: int = 3, center: float = 0.0, height: float = 1.0) -> PolyPiece:
    """height * (1 - ((s - center)/eps)^2)^m on |s - center| <= eps; of Sobolev order m."""
    if eps <= 0 or m < 1:
        raise InputError("bump needs eps > 0 and m >= 1")
    base = 1.0 - (Polynomial([-center, 1.0]) / eps) ** 2
    meta = {"kind": "bump", "eps": eps, "m": m, "center": center, "height": height}
    return PolyPiece(height * base ** m, center - eps, center + eps, m, meta)


def coordinate_profile(eps: float, m: int = 3) -> PolyPiece:
    """s * (1 - (s/eps)^2)^m: slope one at the origin, compact support."""
    base = Polynomial([1.0, 0.0, -1.0 / eps ** 2])
    meta = {"kind": "coordinate", "eps": eps, "m": m}
    return PolyPiece(Polynomial([0.0, 1.0]) * base ** m, -eps, eps, m, meta)


class Sine(Profile):
    """amp * sin(omega*s + phase), restricted to [lo, hi] when given."""

    def __init__(self, omega: float, phase: float = 0.0, amp: float = 1.0, lo=None, hi=None):
        self.omega, self.phase, self.amp = float(omega), float(phase), float(amp)
        self.lo = None if lo is None else float(lo)
        self.hi = None if hi is None else float(hi)
        if self.lo is not None:
            ends = [math.sin(omega * self.lo + phase), math.sin(omega * self.hi + phase)]
            self.smoothness = 1 if max(abs(e) for e in ends) < 1e-12 else 0
        else:
            self.smoothness = INF

    def eval(self, s, order):
        v = self.amp * self.omega ** order * np.sin(self.omega * s + self.phase + order * math.pi / 2)
        if self.lo is None:
            return v
        return np.where((s >= self.lo) & (s <= self.hi), v, 0.0)

    def breakpoints(self):
        return [] if self.lo is None else [self.lo, self.hi]

    def support(self):
        return None if self.lo is None else (self.lo, self.hi)

    def to_json(self):
        return {"kind": "sine", "omega": self.omega, "phase": self.phase, "amp": self.amp,
                "lo": self.lo, "hi": self.hi}


def sine_bump(eps: float, amp: float = 1.0) -> Sine:
    """amp * sin(pi s / eps) on [-eps, eps]."""
    return Sine(math.pi / eps, 0.0, amp, -eps, eps)


def ball_mode(eps: float, j: int) -> Sine:
    """Dirichlet eigenfunction eps^{-1/2} sin(j pi (s + eps) / 2 eps) of (-eps, eps)."""
    w = j * math.pi / (2 * eps)
    return Sine(w, w * eps, eps ** -0.5, -eps, eps)


def cosine(omega: float, amp: float = 1.0) -> Sine:
    return Sine(omega, math.pi / 2, amp)


class SumProfile(Profile):
    def __init__(self, parts, coefs):
        flat_p, flat_c = [], []
        for p, c in zip(parts, coefs):
            if isinstance(p, SumProfile):
                flat_p.extend(p.parts)
                flat_c.extend(c * x for x in p.coefs)
            elif not isinstance(p, ZeroProfile):
                flat_p.append(p)
                flat_c.append(float(c))
        self.parts, self.coefs = tuple(flat_p), tuple(flat_c)
        self.smoothness = min((p.smoothness for p in self.parts), default=INF)

    def eval(self, s, order):
        out = np.zeros_like(s)
        for p, c in zip(self.parts, self.coefs):
            out = out + c * p.eval(s, order)
        return out

    def breakpoints(self):
        return sorted({b for p in self.parts for b in p.breakpoints()})

    def support(self):
        sups = [p.support() for p in self.parts]
        if not sups:
            return (0.0, 0.0)
        if any(s is None for s in sups):
            return None
        return (min(s[0] for s in sups), max(s[1] for s in sups))

    def to_json(self):
        return {"kind": "sum", "coefs": list(self.coefs), "parts": [p.to_json() for p in self.parts]}


class ProductProfile(Profile):
    def __init__(self, f: Profile, g: Profile):
        self.f, self.g = f, g
        self.smoothness = min(f.smoothness, g.smoothness)

    def eval(self, s, order):
        out = np.zeros_like(s)
        for r in range(order + 1):
            out = out + math.comb(order, r) * self.f.eval(s, r) * self.g.eval(s, order - r)
        return out

    def breakpoints(self):
        return sorted(set(self.f.breakpoints()) | set(self.g.breakpoints()))

    def support(self):
        a, b = self.f.support(), self.g.support()
        if a is None:
            return b
        if b is None:
            return a
        lo, hi = max(a[0], b[0]), min(a[1], b[1])
        return (lo, hi) if lo < hi else (0.0, 0.0)


class ShiftProfile(Profile):
    def __init__(self, f: Profile, c: float):
        self.f, self.c = f, float(c)
        self.smoothness = f.smoothness

    def eval(self, s, order):
        return self.f.eval(s - self.c, order)

    def breakpoints(self):
        return [b + self.c for b in self.f.breakpoints()]

    def support(self):
        s = self.f.support()
        return None if s is None else (s[0] + self.c, s[1] + self.c)


def profile_from_json(doc: dict) -> Profile:
    kind = doc.get("kind")
    if kind == "zero":
        return ZeroProfile()
    if kind == "bump":
        return poly_bump(doc["eps"], doc.get("m", 3), doc.get("center", 0.0), doc.get("height", 1.0))
    if kind == "coordinate":
        return coordinate_profile(doc["eps"], doc.get("m", 3))
    if kind == "sine":
        return Sine(doc["omega"], doc.get("phase", 0.0), doc.get("amp", 1.0), doc.get("lo"), doc.get("hi"))
    if kind == "sum":
        return SumProfile([profile_from_json(p) for p in doc["parts"]], doc["coefs"])
    raise InputError(f"unknown profile kind {kind!r}")


class DerivProfile(Profile):
    """The n-th derivative of a profile."""

    def __init__(self, f: Profile, n: int):
        self.f, self.n = f, int(n)
        self.smoothness = f.smoothness - self.n if f.smoothness < INF else INF

    def eval(self, s, order):
        return self.f.eval(s, order + self.n)

    def breakpoints(self):
        return self.f.breakpoints()

    def support(self):
        return self.f.support()


class QuotientProfile(Profile):
    """f / g with derivatives from the recursion h^(n) = (f^(n) - sum C(n,r) g^(r) h^(n-r)) / g."""

    def __init__(self, f: Profile, g: Profile):
        self.f, self.g = f, g
        self.smoothness = min(f.smoothness, g.smoothness)

    def eval(self, s, order):
        gv = self.g.eval(s, 0)
        safe = np.where(gv != 0.0, gv, 1.0)
        hs = []
        for n in range(order + 1):
            acc = self.f.eval(s, n)
            for r in range(1, n + 1):
                acc = acc - math.comb(n, r) * self.g.eval(s, r) * hs[n - r]
            hs.append(np.where(gv != 0.0, acc / safe, 0.0))
        return hs[order]

    def breakpoints(self):
        return sorted(set(self.f.breakpoints()) | set(self.g.breakpoints()))

    def support(self):
        return self.f.support()
