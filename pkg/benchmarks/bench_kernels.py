"""Time the compiled and fallback k-nearest-window kernels on the same inputs.

    python benchmarks/bench_kernels.py [--sizes 1000,10000,100000] [--repeats 5]
"""

import argparse
import time

import numpy as np

from aquannr import _backend
from aquannr.estimators import NnrConfig, QuantizedIndex, nearest_windows, nearest_windows_indexed


def best_of(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--sizes", default="1000,10000,100000")
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)

    backends = [("fallback", _backend.fallback)]
    if _backend.compiled is not None:
        backends.insert(0, ("compiled", _backend.compiled))
    else:
        print("compiled kernels unavailable; timing the fallback only")

    cfg = NnrConfig()
    print(f"{'n':>8} {'search':>8} {'backend':>9} {'seconds':>11} {'comparisons':>12} {'speedup':>8}")
    for n in (int(s) for s in args.sizes.split(",")):
        x = np.random.default_rng(args.seed).normal(0.0, 2.0, n)
        index = QuantizedIndex.from_values(x)
        for search, call in (("naive", lambda k: nearest_windows(x, cfg, kernels=k)),
                             ("indexed", lambda k: nearest_windows_indexed(index, x, cfg, kernels=k))):
            results = {}
            for name, kern in backends:
                # the pure-Python indexed search is slow; fewer repeats keep runs short
                reps = args.repeats if name == "compiled" or search == "naive" else 1
                results[name] = best_of(lambda: call(kern), reps)
            base = results["fallback"][0]
            for name, (secs, nb) in results.items():
                print(f"{n:>8} {search:>8} {name:>9} {secs:>11.6f} {nb.comparisons:>12} "
                      f"{base / secs:>7.1f}x")
            starts = {tuple(nb.starts.tolist()) for _, nb in results.values()}
            if len(starts) != 1:
                raise SystemExit(f"backends disagree at n={n} ({search})")


if __name__ == "__main__":
    main()
