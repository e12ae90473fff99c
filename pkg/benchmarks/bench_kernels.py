"""Time the numba kernels against their numpy fallbacks.

Run with ``python benchmarks/bench_kernels.py``.
"""

import math
import time

import numpy as np

from moranmf import _kernels


def timeit(fn, *args, repeat=5):
    best = math.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def cases():
    rng = np.random.default_rng(0)
    n = 1_000_000
    u, pp = rng.random(n), rng.uniform(0.2, 0.8, n)
    p, logb = rng.uniform(0.2, 0.5, n), rng.uniform(0.8, 3.0, n)
    p20 = rng.uniform(0.1, 0.5, 20)
    logs = (math.log(0.4), math.log(0.6), math.log(0.45), math.log(0.55))
    k1, k2 = 500, 4000
    mid = k1 * 0.5 * (logs[0] + logs[1]) + k2 * 0.5 * (logs[2] + logs[3])
    return {
        "running_ratio (1e6)": (rng.random(n), logb),
        "enumerate_log_masses (n=20)": (np.log(p20), np.log1p(-p20)),
        "bernoulli_walk (1e6)": (u, pp, np.log(p), np.log1p(-p), np.log(pp), np.log1p(-pp), logb),
        "window_log_count (500 x 4000)": (k1, k2, *logs, mid - 20.0, mid + 5.0),
    }


def main():
    if _kernels.NUMBA is None:
        print("numba not available; nothing to compare")
        return
    print(f"{'kernel':32s} {'numpy [s]':>10s} {'numba [s]':>10s} {'speedup':>8s}")
    for label, args in cases().items():
        name = label.split()[0]
        _kernels.NUMBA[name](*args)  # compile
        t_np = timeit(_kernels.NUMPY[name], *args, repeat=2)
        t_nb = timeit(_kernels.NUMBA[name], *args)
        print(f"{label:32s} {t_np:10.4f} {t_nb:10.4f} {t_np / t_nb:8.1f}")


if __name__ == "__main__":
    main()
