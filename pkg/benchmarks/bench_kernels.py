"""Time the numba kernels against their numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--size 2000]

The first numba call compiles (or loads the on-disk cache); it is excluded.
"""
import argparse
import time

import numpy as np

from tqft73 import _kernels
from tqft73.angle_opt import maximize_volume
from tqft73.integrator import contour_from_angles, integrate_JX_2d
from tqft73.specfun import CouplingConstant, _gauss
from tqft73.triangulation import builtin_ideal_73


def best_of(fn, repeat):
    fn()  # warm-up / compile
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(n):
    rng = np.random.default_rng(0)
    gx, gw = _gauss(16)
    ax, aw = _gauss(48)
    z = rng.uniform(-10, 10, n) + 1j * rng.uniform(-0.5, 0.5, n)
    lg = rng.normal(size=n) + 1j * rng.normal(size=n)
    x = rng.normal(size=n) + 0.3j
    f = rng.normal(size=n // 2) - 0.2j
    ty = rng.normal(size=n // 2) + 0j
    pd = rng.normal(size=n + n // 2 - 1) + 0j
    cc = CouplingConstant(0.4)
    alpha = maximize_volume(builtin_ideal_73())
    contour = contour_from_angles(cc, alpha, 2)
    return {
        "log_phi_strip": lambda be: _kernels.log_phi_strip(z, 0.4, gx, gw, ax, aw, 16, 40.0, backend=be),
        "expsum": lambda be: _kernels.expsum(lg, x, f, 1.0, backend=be),
        "toeplitz_rows": lambda be: _kernels.toeplitz_rows(lg, ty, pd, backend=be),
        "integrate_JX_2d(b=0.4)": lambda be: integrate_JX_2d(cc, contour, 1e-8, workers=1, backend=be),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--size", type=int, default=2000)
    args = ap.parse_args()
    print(f"{'kernel':<24}{'numba [s]':>12}{'numpy [s]':>12}{'speedup':>10}")
    for name, fn in cases(args.size).items():
        t_nb = best_of(lambda: fn("numba"), args.repeat)
        t_np = best_of(lambda: fn("numpy"), args.repeat)
        print(f"{name:<24}{t_nb:>12.4f}{t_np:>12.4f}{t_np / t_nb:>10.1f}")


if __name__ == "__main__":
    main()
