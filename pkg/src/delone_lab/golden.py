"""Exact arithmetic in the ring Z[phi], phi = (1 + sqrt 5) / 2."""

from __future__ import annotations

import math
import re
from functools import total_ordering

import numpy as np

PHI = (1.0 + math.sqrt(5.0)) / 2.0

_TERM = re.compile(r"^([+-]?)(\d*)\*?(phi)?$")


def golden_sign(a: int, b: int) -> int:
    """Exact sign of a + b*phi.

    a + b*phi = ((2a + b) + b*sqrt5) / 2, so only integer squares are compared.
    """
    p = 2 * a + b
    if p >= 0 and b >= 0:
        return 0 if p == 0 and b == 0 else 1
    if p <= 0 and b <= 0:
        return -1
    # opposite signs: compare p^2 with 5 b^2
    lhs, rhs = p * p, 5 * b * b
    if lhs == rhs:
        return 0
    if p > 0:
        return 1 if lhs > rhs else -1
    return 1 if rhs > lhs else -1


@total_ordering
class GoldenNumber:
    """Element a + b*phi with integer a, b."""

    __slots__ = ("a", "b")

    def __init__(self, a: int = 0, b: int = 0):
        self.a = int(a)
        self.b = int(b)

    @classmethod
    def coerce(cls, value) -> GoldenNumber:
        if isinstance(value, GoldenNumber):
            return value
        if isinstance(value, (int, np.integer)):
            return cls(int(value), 0)
        if isinstance(value, str):
            return parse_golden(value)
        raise TypeError(f"cannot convert {value!r} to GoldenNumber")

    def to_float(self) -> float:
        return self.a + self.b * PHI

    def __float__(self) -> float:
        return self.to_float()

    def conjugate(self) -> GoldenNumber:
        # phi' = 1 - phi
        return GoldenNumber(self.a + self.b, -self.b)

    def norm(self) -> int:
        return self.a * self.a + self.a * self.b - self.b * self.b

    def sign(self) -> int:
        return golden_sign(self.a, self.b)

    def __add__(self, other):
        try:
            o = GoldenNumber.coerce(other)
        except TypeError:
            return NotImplemented
        return GoldenNumber(self.a + o.a, self.b + o.b)

    __radd__ = __add__

    def __sub__(self, other):
        try:
            o = GoldenNumber.coerce(other)
        except TypeError:
            return NotImplemented
        return GoldenNumber(self.a - o.a, self.b - o.b)

    def __rsub__(self, other):
        return GoldenNumber.coerce(other) - self

    def __neg__(self):
        return GoldenNumber(-self.a, -self.b)

    def __mul__(self, other):
        try:
            o = GoldenNumber.coerce(other)
        except TypeError:
            return NotImplemented
        # (a + b phi)(c + d phi) with phi^2 = phi + 1
        bd = self.b * o.b
        return GoldenNumber(self.a * o.a + bd, self.a * o.b + self.b * o.a + bd)

    __rmul__ = __mul__

    def __abs__(self):
        return -self if self.sign() < 0 else self

    def __eq__(self, other):
        if isinstance(other, (int, np.integer)):
            return self.b == 0 and self.a == other
        if not isinstance(other, GoldenNumber):
            return NotImplemented
        return self.a == other.a and self.b == other.b

    def __lt__(self, other):
        o = GoldenNumber.coerce(other)
        return golden_sign(self.a - o.a, self.b - o.b) < 0

    def __hash__(self):
        return hash((self.a, self.b))

    def __iter__(self):
        return iter((self.a, self.b))

    def __repr__(self):
        return f"GoldenNumber({self.a}, {self.b})"

    def __str__(self):
        if self.b == 0:
            return str(self.a)
        if self.a == 0:
            return f"{self.b}phi"
        op = "+" if self.b > 0 else "-"
        return f"{self.a}{op}{abs(self.b)}phi"

    def to_json(self) -> dict:
        return {"a": self.a, "b": self.b}

    @classmethod
    def from_json(cls, doc: dict) -> GoldenNumber:
        return cls(int(doc["a"]), int(doc["b"]))


def parse_golden(text: str) -> GoldenNumber:
    """Parse strings like "phi", "1", "2+3phi", "-phi", "1 - 2*phi"."""
    s = text.replace(" ", "").lower()
    if not s:
        raise ValueError("empty golden number")
    terms = re.findall(r"[+-]?[^+-]+", s)
    if "".join(terms) != s:
        raise ValueError(f"bad golden number {text!r}")
    a = b = 0
    for term in terms:
        m = _TERM.match(term)
        if m is None or (not m.group(2) and not m.group(3)):
            raise ValueError(f"bad golden number {text!r}")
        sgn = -1 if m.group(1) == "-" else 1
        coef = int(m.group(2)) if m.group(2) else 1
        if m.group(3):
            b += sgn * coef
        else:
            a += sgn * coef
    return GoldenNumber(a, b)


def golden_to_float(a, b):
    """Vectorised a + b*phi for integer arrays."""
    return np.asarray(a, dtype=np.float64) + np.asarray(b, dtype=np.float64) * PHI
