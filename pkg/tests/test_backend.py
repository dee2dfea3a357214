import os
import subprocess
import sys

import numpy as np
import pytest

from aquannr import _backend
from aquannr.estimators import NnrConfig, QuantizedIndex, nearest_windows, nearest_windows_indexed

needs_compiled = pytest.mark.skipif(_backend.compiled is None, reason="extension not built")


def _series(rng):
    yield 10 + 3 * np.sin(np.arange(2000) * 2 * np.pi / 29)
    yield rng.normal(0, 2, 2000)
    yield np.round(rng.normal(0, 1, 1500), 1)  # many exact ties
    yield np.full(300, 4.0)


@needs_compiled
@pytest.mark.parametrize("m,k", [(1, 1), (3, 3), (5, 7)])
def test_compiled_matches_fallback(rng, m, k):
    cfg = NnrConfig(window_m=m, k=k)
    for x in _series(rng):
        idx = QuantizedIndex.from_values(x)
        for fn, args in ((nearest_windows, (x, cfg)), (nearest_windows_indexed, (idx, x, cfg))):
            a = fn(*args, kernels=_backend.compiled)
            b = fn(*args, kernels=_backend.fallback)
            assert a.starts.tolist() == b.starts.tolist()
            assert a.distances.tobytes() == b.distances.tobytes()
            assert a.comparisons == b.comparisons


@pytest.mark.parametrize("kern", ["fallback", "compiled"])
def test_short_series_kernels(kern):
    mod = getattr(_backend, kern)
    if mod is None:
        pytest.skip("extension not built")
    starts, dists, comps = mod.knn_naive(np.array([1.0, 2.0]), 2, 3)
    assert len(starts) == 0 and comps == 0


def test_pure_env_forces_fallback():
    code = "from aquannr import _backend; print(_backend.COMPILED)"
    env = dict(os.environ, AQUANNR_PURE="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True,
                         check=True)
    assert out.stdout.strip() == "False"
