"""Time the numba and numpy paths of each hot kernel on benchmark-sized inputs.

    python benchmarks/bench_kernels.py [--repeat 5] [--threads T]
"""

import argparse
import time

import numpy as np

from sepspde import _kernels


def _best(fn, repeat):
    fn()  # warm-up (compilation for numba)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(rng):
    N = 100_000
    a = 0.3
    b = rng.normal(1.0, 0.2, N)
    c = rng.normal(0.0, 0.5, N)
    prev = rng.normal(0.0, 1.0, N)
    yield "quadratic_select N=1e5", (a, b, c, prev, True), {}

    s = rng.normal(size=N)
    grid = np.linspace(-6, 6, 512)
    yield "kde_gauss N=1e5 grid=512", (s, grid, 0.05), {}

    B, Nt, Nx = 1024, 101, 51
    dx, dt = 2.0 / (Nx - 1), 1.0 / (Nt - 1)
    src_t = np.cumsum(rng.normal(0, 0.02, (B, Nt)), axis=1)
    zero = np.zeros((Nt, Nx))
    yield "march B=1024 (Burgers oracle batch)", (np.zeros((B, Nx)), np.ones(B), np.full(B, 0.5),
                                                  zero, zero, src_t, 0.0, dx, dt), {}


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--threads", type=int, default=None)
    args = p.parse_args(argv)
    if not _kernels.HAVE_NUMBA:
        print("numba is not installed; nothing to compare")
        return 1
    if args.threads:
        _kernels.set_threads(args.threads)
    rng = np.random.default_rng(0)
    print(f"{'kernel':40s} {'numpy [s]':>10s} {'numba [s]':>10s} {'speedup':>8s}")
    for label, args_, kw in cases(rng):
        base = label.split()[0]
        f_np = getattr(_kernels, base + "_numpy")
        f_nb = getattr(_kernels, base + "_numba")
        t_np = _best(lambda: f_np(*args_, **kw), args.repeat)
        t_nb = _best(lambda: f_nb(*args_, **kw), args.repeat)
        print(f"{label:40s} {t_np:10.4f} {t_nb:10.4f} {t_np / t_nb:8.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
