"""Compare the compiled and numpy detrending kernels.

Usage: python3 benchmarks/bench_kernels.py [--n 2000000] [--repeat 3]
"""
import argparse
import timeit

import numpy as np

from mfx import _kernels_py, kernels, mfcore

try:
    from mfx import _kernels as _kernels_c
except ImportError:
    _kernels_c = None


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=2_000_000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--m", type=int, default=2)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    x, y = (kernels.cumsum(v) for v in rng.standard_normal((2, args.n)))
    backends = {"numpy": _kernels_py}
    if _kernels_c is not None:
        backends["cython"] = _kernels_c
    else:
        print("compiled extension not built; timing numpy only")

    print(f"n={args.n} m={args.m} best of {args.repeat}")
    print(f"{'scale':>8} " + " ".join(f"{b:>10}" for b in backends) + "   speedup")
    total = dict.fromkeys(backends, 0.0)
    for s in mfcore.scale_grid(args.n, count=8):
        s = int(s)
        row = {}
        for name, impl in backends.items():
            row[name] = min(timeit.repeat(lambda: kernels.covariances(x, y, s, args.m, impl=impl),
                                          number=1, repeat=args.repeat))
            total[name] += row[name]
        ref = kernels.covariances(x, y, s, args.m, impl=_kernels_py)
        for impl in backends.values():
            np.testing.assert_allclose(kernels.covariances(x, y, s, args.m, impl=impl), ref, rtol=1e-9)
        ratio = row["numpy"] / row["cython"] if "cython" in row else float("nan")
        print(f"{s:>8} " + " ".join(f"{row[b]:>9.4f}s" for b in backends) + f"   {ratio:6.2f}x")
    for name, impl in backends.items():
        t = min(timeit.repeat(lambda: kernels.cumsum(x, impl=impl), number=1, repeat=args.repeat))
        print(f"cumsum {name}: {t:.4f}s, covariance total {total[name]:.3f}s")


if __name__ == "__main__":
    main()
