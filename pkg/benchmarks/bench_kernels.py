"""Compare the compiled and pure-numpy convolution backends.

Usage: python3 benchmarks/bench_kernels.py [repeats]

Times the four kernel entry points on model-realistic shapes and prints
the per-call medians side by side. The compiled extension must be built
(install the package normally); otherwise only the fallback column runs.
"""

import sys
import time

import numpy as np

from sensal.kernels import _fallback

try:
    from sensal.kernels import _native
except ImportError:
    _native = None

REPEATS = int(sys.argv[1]) if len(sys.argv) > 1 else 200

# Shapes matched to the default model on 100-sample feature windows.
CASES = [
    ("conv1d 1->8 k2 (axis stack)", "conv1d", (96, 1, 100), (8, 1, 2)),
    ("conv1d 8->16 k2", "conv1d", (96, 8, 100), (16, 8, 2)),
    ("conv2d 16->8 3x3", "conv2d", (32, 16, 3, 50), (8, 16, 3, 3)),
    ("conv2d 8->16 3x3", "conv2d", (32, 8, 3, 50), (16, 8, 3, 3)),
]


def timeit(fn, *args):
    best = []
    for _ in range(REPEATS):
        t0 = time.perf_counter()
        fn(*args)
        best.append(time.perf_counter() - t0)
    return float(np.median(best) * 1e6)  # microseconds


def main():
    rng = np.random.default_rng(0)
    rows = []
    for name, kind, xshape, wshape in CASES:
        x = rng.normal(size=xshape)
        w = rng.normal(size=wshape)
        b = rng.normal(size=wshape[0])
        fwd_f = getattr(_fallback, f"{kind}_forward")
        bwd_f = getattr(_fallback, f"{kind}_backward")
        gy = np.ascontiguousarray(fwd_f(x, w, b))
        rows.append((name + " fwd", timeit(fwd_f, x, w, b),
                     timeit(getattr(_native, f"{kind}_forward"), x, w, b) if _native else None))
        rows.append((name + " bwd", timeit(bwd_f, x, w, gy),
                     timeit(getattr(_native, f"{kind}_backward"), x, w, gy) if _native else None))

    print(f"{'case':34s} {'python us':>12s} {'native us':>12s} {'speedup':>9s}")
    for name, py, nat in rows:
        if nat is None:
            print(f"{name:34s} {py:12.1f} {'n/a':>12s} {'n/a':>9s}")
        else:
            print(f"{name:34s} {py:12.1f} {nat:12.1f} {py / nat:8.2f}x")
    if _native is None:
        print("\ncompiled extension not available; showing fallback only")


if __name__ == "__main__":
    main()
