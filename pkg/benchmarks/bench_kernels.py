"""Wall-clock comparison of the numba and numpy kernel paths.

    python3 benchmarks/bench_kernels.py [--repeat 3]

Both variants are called directly, so the QPLAB_NUMBA flag does not matter
here. Numba compile time is excluded by a warm-up call.
"""

import argparse
import timeit

import numpy as np

from qplab import _kernels as K


def cases(rng):
    row2 = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    row4 = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    t = rng.standard_normal(100_000) + 0j
    T = rng.standard_normal((8, 20_000)) + 0j
    tn = rng.uniform(-3, 3, (8, 50_000))
    d = rng.standard_normal(2001)
    e2 = rng.random(2000)
    x = np.linspace(-4, 4, 2001)
    diag = rng.standard_normal(20_001) + 0j
    hop = np.full(20_000, 0.2 + 0j)
    return [
        ("product l=1, n=1e5", "_product", (row2, t, 10)),
        ("product l=2, n=1e5", "_product", (row4, t, 10)),
        ("lyapunov l=2, 8x2e4", "_lyapunov", (row4, T, 10, 100)),
        ("nodes 8x5e4", "_nodes", (tn, 1.0)),
        ("sturm count 2001x2001", "_sturm_count", (d, e2, x)),
        ("log amplitude n=2e4", "_log_amplitude", (diag, hop, 10_000)),
    ]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if K.numba is None:
        raise SystemExit("numba is not installed")
    rng = np.random.default_rng(0)
    print(f"{'kernel':28s} {'numpy [s]':>11s} {'numba [s]':>11s} {'speed-up':>9s}")
    for name, base, argv in cases(rng):
        fn_np = getattr(K, base + "_numpy")
        fn_nb = getattr(K, base + "_numba")
        fn_nb(*argv)  # compile
        t_np = min(timeit.repeat(lambda: fn_np(*argv), number=1, repeat=args.repeat))
        t_nb = min(timeit.repeat(lambda: fn_nb(*argv), number=1, repeat=args.repeat))
        print(f"{name:28s} {t_np:11.4f} {t_nb:11.4f} {t_np / t_nb:8.1f}x")


if __name__ == "__main__":
    main()
