#!/usr/bin/env python3
"""Benchmark the numba fast path against the pure-numpy fallback.

The two hot kernels are the ray quadrature behind GCC certification / psi
tabulation and the polar quadrature of the divergence-inverse kernel.  The
public dispatch honors HYPOFLOW_NO_NUMBA=1; here both implementations are
timed directly in one process.

Usage:
    python benchmarks/bench_kernels.py [--rays 200000] [--mesh 48] [--repeat 3]
"""

import argparse
import time

import numpy as np

from hypoflow import disk_domain, manufactured_case
from hypoflow._kernels import (HAVE_NUMBA, _bogovskii_field_numpy,
                               _ray_integrals_numpy, bogovskii_field,
                               ray_integrals)
from hypoflow.cli import RunConfig
from hypoflow.core import build_sigma, GridSpec


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench_rays(n_rays, repeat):
    cfg = RunConfig({"scenario.preset": "cross"})
    field = build_sigma(cfg.region, 0.05, 1.0, GridSpec(64, 32))
    rng = np.random.default_rng(0)
    x0 = rng.uniform(size=n_rays)
    y0 = rng.uniform(size=n_rays)
    th = rng.uniform(0, 2 * np.pi, size=n_rays)
    args = (field.sigma, x0, y0, th, 2.0, 161)
    if HAVE_NUMBA:
        ray_integrals(*args)  # compile outside the timed region
        t_fast = best_of(lambda: ray_integrals(*args), repeat)
    else:
        t_fast = float("nan")
    t_numpy = best_of(lambda: _ray_integrals_numpy(*args), repeat)
    report("ray quadrature", f"{n_rays} rays x 161 nodes", t_fast, t_numpy)


def bench_bogovskii(n_mesh, repeat):
    dom = disk_domain(n_mesh)
    h = manufactured_case(dom)
    glx, glw = np.polynomial.legendre.leggauss(10)
    args_np = (h, dom.mask(), 0.5, 0.5, dom.ball_radius, 4 * n_mesh,
               0.5 / n_mesh, 1.5, glx, glw)
    if HAVE_NUMBA:
        bogovskii_field(h, dom.mask(), (0.5, 0.5), dom.ball_radius,
                        4 * n_mesh, 0.5 / n_mesh, 1.5)
        t_fast = best_of(lambda: bogovskii_field(
            h, dom.mask(), (0.5, 0.5), dom.ball_radius, 4 * n_mesh,
            0.5 / n_mesh, 1.5), repeat)
    else:
        t_fast = float("nan")
    t_numpy = best_of(lambda: _bogovskii_field_numpy(*args_np), repeat)
    report("divergence kernel", f"mesh {n_mesh}^2", t_fast, t_numpy)


def report(name, size, t_fast, t_numpy):
    speedup = t_numpy / t_fast if t_fast == t_fast else float("nan")
    print(f"{name:<20s} {size:<22s} numba {t_fast:8.3f}s   "
          f"numpy {t_numpy:8.3f}s   speedup {speedup:6.1f}x")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rays", type=int, default=200_000)
    ap.add_argument("--mesh", type=int, default=48)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if not HAVE_NUMBA:
        print("numba unavailable or disabled (HYPOFLOW_NO_NUMBA): "
              "timing the numpy path only")
    bench_rays(args.rays, args.repeat)
    bench_bogovskii(args.mesh, args.repeat)


if __name__ == "__main__":
    main()
