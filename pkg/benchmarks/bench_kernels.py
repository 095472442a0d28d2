"""Compare the compiled and numpy spectral kernels.

    python benchmarks/bench_kernels.py [--repeat 3] [--nx 16 --ny 12]

Prints the best-of-N wall time of each stage per backend and the largest
relative difference between backends.
"""
import argparse
import time

import numpy as np

from patchbounds import kernels
from patchbounds.geometry import DesignRegion, build_mesh
from patchbounds.greens import SubstrateStack, WaveContext
from patchbounds.spectral import AssemblyOptions, offset_tables, panel_gauss, spectral_radii


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--nx", type=int, default=16)
    ap.add_argument("--ny", type=int, default=12)
    ap.add_argument("--size", type=float, default=0.5, help="lx / lambda_eps")
    args = ap.parse_args()

    f = 1e9
    lam_eps = WaveContext.at(f, 4.0).lambda_eps
    lx = args.size * lam_eps
    stack = SubstrateStack.from_loss_tangent(4.0, 0.001, 0.05 * lx)
    ctx = WaveContext.for_stack(f, stack)
    mesh = build_mesh(DesignRegion.canonical(lx), args.nx, args.ny)
    a, b = spectral_radii(stack, ctx)
    opt = AssemblyOptions()
    kx, wx = panel_gauss(0.0, opt.truncation / mesh.dx, np.pi / lx, opt.points_per_panel)
    ky, wy = panel_gauss(0.0, opt.truncation / mesh.dy, np.pi / mesh.region.ly, opt.points_per_panel)
    ky, wy = ky[:512], wy[:512]
    print(f"grid block {len(kx)} x {len(ky)}, mesh {args.nx} x {args.ny}")

    backends = kernels.available()
    if "cython" not in backends:
        print("compiled backend not built; only timing numpy")
    results = {}
    for name in backends:
        kern = kernels.get(name)
        tg, g = best_of(
            lambda: kern.grid_weights(kx, wx, ky, wy, a, b, ctx.k, stack.eps_r, stack.h, ctx.omega, mesh.dx, mesh.dy, False),
            args.repeat,
        )
        tt, tab = best_of(lambda: offset_tables(mesh, stack, ctx, AssemblyOptions(backend=name)), args.repeat)
        results[name] = (g, tab)
        print(f"{name:>8}: grid_weights {tg * 1e3:8.1f} ms   offset_tables {tt * 1e3:8.1f} ms")

    if len(results) == 2:
        (g1, t1), (g2, t2) = results["cython"], results["python"]
        dg = max(np.abs(x - y).max() / np.abs(y).max() for x, y in zip(g1, g2))
        dt = max(np.abs(x - y).max() / np.abs(y).max() for x, y in ((t1.xx, t2.xx), (t1.yy, t2.yy), (t1.xy, t2.xy)))
        print(f"max relative difference: weights {dg:.1e}, tables {dt:.1e}")


if __name__ == "__main__":
    main()
