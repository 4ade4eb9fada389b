"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5] [--sizes 100,400,1600]
"""
import argparse
import timeit

import numpy as np

from dsenlg._kernels import _fallback

try:
    from dsenlg._kernels import _core
except ImportError:
    _core = None


def cases(n, rng):
    X = rng.normal(size=(n, 28))  # K=3 envelopes of 7 features
    c = max(2, int(0.8 * n) // 4)
    U = rng.random((c, n)) + 1e-12
    U /= U.sum(axis=0)
    Xs = rng.normal(size=(n, 8))
    y = rng.integers(0, 2, n)
    return {
        f"fcm_iterate n={n} c={c}": lambda mod: mod.fcm_iterate(X, U, 2.0, 1e-5, 200),
        f"best_split  n={n} p=8": lambda mod: mod.best_split(Xs, y),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--sizes", default="100,400,1600")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    if _core is None:
        print("compiled extension not built; run `python setup.py build_ext --inplace`")
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':<30} {'python (ms)':>12} {'cython (ms)':>12} {'speedup':>8}")
    for n in map(int, args.sizes.split(",")):
        for name, fn in cases(n, rng).items():
            t_py = min(timeit.repeat(lambda: fn(_fallback), number=1, repeat=args.repeat))
            if _core is None:
                print(f"{name:<30} {t_py * 1e3:12.2f} {'-':>12} {'-':>8}")
                continue
            t_cy = min(timeit.repeat(lambda: fn(_core), number=1, repeat=args.repeat))
            print(f"{name:<30} {t_py * 1e3:12.2f} {t_cy * 1e3:12.2f} {t_py / t_cy:7.1f}x")


if __name__ == "__main__":
    main()
