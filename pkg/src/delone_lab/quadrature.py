"""Composite Gauss-Legendre rules split at breakpoints."""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np


@lru_cache(maxsize=64)
def gauss_legendre(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def composite_nodes(breaks, n: int = 24):
    """Nodes and weights of an n-point Gauss-Legendre rule on each [breaks[i], breaks[i+1]]."""
    b = np.asarray(breaks, dtype=np.float64)
    b = b[np.concatenate(([True], np.diff(b) > 0))]
    x, w = gauss_legendre(n)
    lo, hi = b[:-1], b[1:]
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def uniform_breaks(lo: float, hi: float, max_width: float):
    n = max(1, int(math.ceil((hi - lo) / max_width)))
    return np.linspace(lo, hi, n + 1)


def merge_breaks(lo: float, hi: float, interior, max_width: float | None = None):
    """Sorted breakpoints in [lo, hi] including the ends, optionally refined to max_width."""
    pts = np.asarray(interior, dtype=np.float64)
    pts = pts[(pts > lo) & (pts < hi)]
    b = np.unique(np.concatenate(([lo], pts, [hi])))
    if max_width is None:
        return b
    out = [b[:1]]
    for a, c in zip(b[:-1], b[1:]):
        out.append(uniform_breaks(a, c, max_width)[1:])
    return np.concatenate(out)
