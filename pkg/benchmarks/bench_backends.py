"""Compare the compiled per-cell sweep with the numpy lockstep fallback.

    python benchmarks/bench_backends.py --delta-count 40 --omega-count 10

Compilation time of the numba kernel is reported separately from the timed
runs (the on-disk cache makes it near zero after the first invocation).
"""
import argparse
import time

import numpy as np

from gfmstab.doa import DoaSpec, sweep
from gfmstab.hybrid_sim import SimConfig
from gfmstab.params import reference_converter, reference_grid


def timed(fn, repeats):
    best = np.inf
    result = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        result = fn()
        best = min(best, time.perf_counter() - t0)
    return best, result


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--delta-count", type=int, default=40)
    ap.add_argument("--omega-count", type=int, default=10)
    ap.add_argument("--t-max", type=float, default=10.0)
    ap.add_argument("--beta", type=float, default=-30.0)
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--workers", type=int, default=None)
    args = ap.parse_args()

    grid, conv = reference_grid(), reference_converter(beta=args.beta)
    spec = DoaSpec((-180.0, 360.0, args.delta_count),
                   (-conv.d_omega_max, conv.d_omega_max, args.omega_count))
    cfg = SimConfig(t_max=args.t_max)
    cells = args.delta_count * args.omega_count

    warm = DoaSpec((-180.0, 360.0, 2), (-0.001, 0.001, 2))
    t0 = time.perf_counter()
    sweep(grid, conv, warm, cfg, backend="numba")
    compile_s = time.perf_counter() - t0

    t_nb, nb = timed(lambda: sweep(grid, conv, spec, cfg, backend="numba",
                                   workers=args.workers), args.repeats)
    t_np, npy = timed(lambda: sweep(grid, conv, spec, cfg, backend="numpy"), args.repeats)
    agree = float(np.mean(nb.labels == npy.labels))

    print(f"grid {args.delta_count} x {args.omega_count} = {cells} cells, t_max {args.t_max} s")
    print(f"numba compile/cache load: {compile_s:8.3f} s")
    print(f"numba  sweep: {t_nb:8.3f} s  ({cells / t_nb:9.1f} cells/s)")
    print(f"numpy  sweep: {t_np:8.3f} s  ({cells / t_np:9.1f} cells/s)")
    print(f"speedup: {t_np / t_nb:.2f}x, label agreement {agree:.3%}")


if __name__ == "__main__":
    main()
