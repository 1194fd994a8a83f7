import os
import subprocess
import sys

import numpy as np
from hypothesis import given, settings, strategies as st

from delone_lab import _kernels


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_phase_sums_agree(seed):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-500, 500, 300)
    w = rng.uniform(0, 1, 300)
    al = rng.uniform(-2, 2, 7)
    a = _kernels.phase_sums(x, w, al)
    b = _kernels._phase_sums_np(x, w, al)
    assert np.max(np.abs(a - b)) < 1e-10


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_stopped_walk_agree(seed):
    rng = np.random.default_rng(seed)
    steps = rng.normal(0, 0.05, (200, 100))
    a = _kernels.stopped_walk(0.1, steps, 0.4)
    b = _kernels._stopped_walk_np(0.1, steps, 0.4)
    assert np.array_equal(a, b)


def test_stopped_walk_outside_start_is_frozen():
    steps = np.ones((3, 4))
    assert np.array_equal(_kernels.stopped_walk(0.5, steps, 0.4), np.full(3, 0.5))


def test_backend_flag():
    code = "from delone_lab import _kernels; print(_kernels.backend())"
    env = dict(os.environ, DELONE_LAB_JIT="0")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert out.stdout.strip() == "numpy"
    assert _kernels.backend() in ("numba", "numpy")
