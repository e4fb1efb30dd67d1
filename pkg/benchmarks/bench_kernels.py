"""Compare the compiled kernels against the numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]

Each kernel runs on the same inputs under both backends. Outputs are
checked for bitwise equality, then the best-of-N wall time is reported.
"""

import argparse
import timeit

import numpy as np

from linpess import _kernels_py

try:
    from linpess import _kernels as _kernels_c
except ImportError:
    _kernels_c = None


def _cdf(p):
    c = np.cumsum(p, axis=-1)
    c[..., -1] = 1.0
    return c


def cases(rng):
    H, S, A, B, K = 5, 20, 4, 3, 20000
    act = _cdf(rng.dirichlet(np.ones(A), size=(H, S)))
    opp = _cdf(rng.dirichlet(np.ones(B), size=(H, S)))
    trans = _cdf(rng.dirichlet(np.ones(S), size=(H, S, A * B)))
    init = _cdf(rng.dirichlet(np.ones(S)))
    ids = np.arange(K, dtype=np.int64)
    phi = rng.uniform(size=(K, 12)) / 4
    y = rng.uniform(0, 5, size=(K, 2))
    w = rng.uniform(0.04, 1, size=K)
    P = rng.uniform(1, 2, size=(12, 12))
    return {
        "uniforms(K=20000)": lambda m: m.uniforms(7, ids, 3, 1),
        "sample_paths(K=20000,H=5)": lambda m: m.sample_paths(7, ids, init, act, opp, trans),
        "gram_rhs(n=20000,d=12)": lambda m: m.gram_rhs(phi, y, w),
        "simplex_game(12x12)": lambda m: m.simplex_game(P),
    }


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    return np.array_equal(np.asarray(a), np.asarray(b))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if _kernels_c is None:
        print("compiled extension not built; only the python backend is available")
    print(f"{'kernel':28s} {'python [ms]':>12s} {'cython [ms]':>12s} {'speedup':>8s}  identical")
    for name, fn in cases(np.random.default_rng(0)).items():
        t_py = min(timeit.repeat(lambda: fn(_kernels_py), number=1, repeat=args.repeat)) * 1e3
        if _kernels_c is None:
            print(f"{name:28s} {t_py:12.2f} {'-':>12s} {'-':>8s}  -")
            continue
        t_c = min(timeit.repeat(lambda: fn(_kernels_c), number=1, repeat=args.repeat)) * 1e3
        same = _same(fn(_kernels_py), fn(_kernels_c))
        print(f"{name:28s} {t_py:12.2f} {t_c:12.2f} {t_py / t_c:7.1f}x  {same}")


if __name__ == "__main__":
    main()
