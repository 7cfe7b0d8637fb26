"""Compare the numba and numpy implementations of the phi-variation kernels.

Usage::

    python benchmarks/bench_kernels.py [--repeat 5]

Prints the best wall time per kernel and backend, the speed-up, and checks
that both backends agree.
"""

import argparse
import time

import numpy as np

from mellin_bv import _accel


def _best(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def cases(rng):
    x = np.linspace(0.0, 12.0 * np.pi, 4097)
    wiggly = np.sin(x) + 0.05 * rng.standard_normal(x.size)
    small = rng.standard_normal(48)
    rows = rng.standard_normal((256, 257))
    starts = np.arange(0, 257, 32, dtype=np.int64)[:-1]
    stops = starts + 33
    return [
        ("sup (n=4097, p=2)", lambda m: m.sup(wiggly, 2.0)),
        ("dp_full (n=48, p=2)", lambda m: m.dp_full(small, 2.0)),
        ("sup_rows (256x257, p=2)", lambda m: m.sup_rows(rows, 2.0)),
        ("sup_segments (256x257, 8 segs)", lambda m: m.sup_segments(rows, starts, stops, 2.0)),
        ("brute_force (n=12, p=1.5)", lambda m: m.brute_force(small[:12], 1.5)),
    ]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _accel.numba_impl is None:
        raise SystemExit("numba is not importable; nothing to compare")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<32} {'numpy [s]':>11} {'numba [s]':>11} {'speed-up':>9}  agree")
    for name, call in cases(rng):
        call(_accel.numba_impl)  # compile outside the timing
        t_np, r_np = _best(lambda: call(_accel.numpy_impl), args.repeat)
        t_nb, r_nb = _best(lambda: call(_accel.numba_impl), args.repeat)
        agree = np.allclose(r_np, r_nb, rtol=1e-12, atol=0.0)
        print(f"{name:<32} {t_np:>11.3e} {t_nb:>11.3e} {t_np / t_nb:>9.1f}  {agree}")


if __name__ == "__main__":
    main()
