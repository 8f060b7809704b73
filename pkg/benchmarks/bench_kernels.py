"""Compiled vs pure-Python kernel timings.

Run from the repo root after an editable install::

    python3 benchmarks/bench_kernels.py [--reps 20]
"""
import argparse
import timeit

import numpy as np
from threadpoolctl import threadpool_limits

from wavediff import _pykernels

try:
    from wavediff import _ckernels
except ImportError:
    _ckernels = None


def cases(rng):
    # shapes of the tiny denoiser's dilated conv on a 2 x 8192 packet, batch 16
    x = rng.standard_normal((16, 16, 8192))
    w = rng.standard_normal((16, 16, 3))
    b = rng.standard_normal(16)
    g = rng.standard_normal((16, 16, 8192))
    sig = rng.standard_normal((64, 4096))
    lo = rng.standard_normal(6)
    hi = rng.standard_normal(6)
    cA = rng.standard_normal((64, 2048))
    return {
        "conv1d_forward": lambda k: k.conv1d_forward(x, w, b, 4),
        "conv1d_backward": lambda k: k.conv1d_backward(x, w, g, 4),
        "dwt_analysis": lambda k: k.dwt_analysis(sig, lo, hi),
        "dwt_synthesis": lambda k: k.dwt_synthesis(cA, cA, lo, hi),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--reps", type=int, default=20, help="timed calls per kernel")
    args = ap.parse_args()
    if _ckernels is None:
        raise SystemExit("compiled kernels are not built; run `pip install -e . --no-build-isolation`")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<17}{'python ms':>11}{'cython ms':>11}{'speedup':>9}{'max diff':>11}")
    with threadpool_limits(1):
        for name, fn in cases(rng).items():
            diff = max(float(np.max(np.abs(a - b))) for a, b in _pairs(fn))
            tp = min(timeit.repeat(lambda: fn(_pykernels), number=1, repeat=args.reps))
            tc = min(timeit.repeat(lambda: fn(_ckernels), number=1, repeat=args.reps))
            print(f"{name:<17}{1e3 * tp:>11.3f}{1e3 * tc:>11.3f}{tp / tc:>9.1f}{diff:>11.1e}")


def _pairs(fn):
    a, b = fn(_pykernels), fn(_ckernels)
    if not isinstance(a, tuple):
        a, b = (a,), (b,)
    return zip(a, b)


if __name__ == "__main__":
    main()
