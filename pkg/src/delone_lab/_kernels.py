"""Hot loops with a numba implementation and a pure numpy fallback.

DELONE_LAB_JIT=0 forces the numpy versions; otherwise numba is used when importable.
The two versions agree to rounding; numpy sums pairwise, numba sequentially.
"""

from __future__ import annotations

import os

import numpy as np

_WANT_JIT = os.environ.get("DELONE_LAB_JIT", "1").strip().lower() not in ("0", "false", "no", "off")

try:
    if not _WANT_JIT:
        raise ImportError
    from numba import njit
    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False


def _phase_sums_np(x, w, alphas):
    out = np.empty(len(alphas), dtype=np.complex128)
    for j, a in enumerate(alphas):
        ph = -2.0 * np.pi * a * x
        out[j] = np.sum(w * np.cos(ph)) + 1j * np.sum(w * np.sin(ph))
    return out


def _stopped_walk_np(x0, steps, bound):
    n, m = steps.shape
    pos = np.full(n, x0, dtype=np.float64)
    alive = np.abs(pos) < bound
    for j in range(m):
        pos = np.where(alive, pos + steps[:, j], pos)
        alive &= np.abs(pos) < bound
    return pos


if HAVE_NUMBA:
    @njit(cache=True)
    def _phase_sums_jit(x, w, alphas):
        out = np.empty(len(alphas), dtype=np.complex128)
        for j in range(len(alphas)):
            re = 0.0
            im = 0.0
            a = alphas[j]
            for k in range(len(x)):
                ph = -2.0 * np.pi * a * x[k]
                re += w[k] * np.cos(ph)
                im += w[k] * np.sin(ph)
            out[j] = re + 1j * im
        return out

    @njit(cache=True)
    def _stopped_walk_jit(x0, steps, bound):
        n, m = steps.shape
        pos = np.empty(n)
        for i in range(n):
            p = x0
            if abs(p) < bound:
                for j in range(m):
                    p += steps[i, j]
                    if abs(p) >= bound:
                        break
            pos[i] = p
        return pos


def phase_sums(x: np.ndarray, w: np.ndarray, alphas: np.ndarray) -> np.ndarray:
    """sum_k w_k exp(-2 pi i alpha x_k) for every alpha."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    w = np.ascontiguousarray(w, dtype=np.float64)
    alphas = np.ascontiguousarray(alphas, dtype=np.float64)
    if HAVE_NUMBA:
        return _phase_sums_jit(x, w, alphas)
    return _phase_sums_np(x, w, alphas)


def stopped_walk(x0: float, steps: np.ndarray, bound: float) -> np.ndarray:
    """Final position of x0 + cumulative steps, frozen at the first step with |x| >= bound."""
    steps = np.ascontiguousarray(steps, dtype=np.float64)
    if HAVE_NUMBA:
        return _stopped_walk_jit(float(x0), steps, float(bound))
    return _stopped_walk_np(float(x0), steps, float(bound))


def backend() -> str:
    return "numba" if HAVE_NUMBA else "numpy"
