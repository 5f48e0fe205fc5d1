"""Time the per-step kernels on each available backend.

    python3 benchmarks/bench_kernels.py [--levels 4 5 6] [--repeat 20]
"""
import argparse
import timeit

import numpy as np

from varswe import kernels
from varswe.mesh import build_mesh
from varswe.operators import coriolis_setup
from varswe.testcases import CaseSpec, initialize
from varswe.timeint import IntegratorConfig, step


def bench(fn, repeat):
    fn()  # warm caches
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    p = argparse.ArgumentParser()
    p.add_argument("--levels", type=int, nargs="+", default=[4, 5, 6])
    p.add_argument("--repeat", type=int, default=20)
    args = p.parse_args(argv)
    backends = sorted(kernels.available_backends())
    print(f"backends: {', '.join(backends)}")
    print(f"{'level':>5} {'kernel':<18}" + "".join(f"{b + ' [ms]':>14}" for b in backends) + f"{'speedup':>10}")
    for L in args.levels:
        mesh = build_mesh(L)
        state, static = initialize(mesh, CaseSpec("geostrophic"))
        V, D, Rbar = state.V, state.D, coriolis_setup(mesh)
        cases = {
            "adv_term": lambda b: kernels.adv_term(mesh, V, D, Rbar, backend=b),
            "kinetic_term": lambda b: kernels.kinetic_term(mesh, V, backend=b),
            "momentum_tendency": lambda b: kernels.momentum_tendency(mesh, V, D, Rbar, backend=b),
            "mass_flux_div": lambda b: kernels.mass_flux_div(mesh, V, D, backend=b),
            "loop_sums": lambda b: kernels.loop_sums(mesh, V, backend=b),
        }
        for name, fn in cases.items():
            t = {b: bench(lambda: fn(b), args.repeat) for b in backends}
            ref = fn(backends[0])
            for b in backends[1:]:
                assert np.allclose(fn(b), ref, rtol=1e-12, atol=1e-13 * np.abs(ref).max())
            speed = t["python"] / t["cython"] if "cython" in t else float("nan")
            print(f"{L:>5} {name:<18}" + "".join(f"{1e3 * t[b]:>14.3f}" for b in backends)
                  + f"{speed:>10.2f}")
        cfg = IntegratorConfig()
        t_step = bench(lambda: step(mesh, state, static, cfg), max(3, args.repeat // 4))
        print(f"{L:>5} {'full Cayley step':<18}{1e3 * t_step:>14.3f}  (default backend {kernels.BACKEND})")


if __name__ == "__main__":
    main()
