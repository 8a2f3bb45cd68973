"""Benchmark the two kernel lanes against each other.

The hot kernels ship in two equivalent implementations: tight loops
compiled by numba (default) and a vectorized numpy/scipy fallback selected
by NOISYSWITCH_DISABLE_NUMBA=1. This script times both in one process by
calling the implementations directly, so the env flag is irrelevant here.

Usage: python benchmarks/bench_kernels.py [--nx 1601] [--nt 1600]
       [--paths 20000] [--repeat 3]
"""

import argparse
import time

import numpy as np

from noisyswitch import _kernels
from noisyswitch.filtering import reduced_path_matrix
from noisyswitch.vi_solver import Grid, ProblemSpec, diffusion_coeff, extract_regions, solve


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def march_inputs(spec, grid):
    dt = spec.T / grid.n_t
    t_half = (np.arange(grid.n_t) + 0.5) * dt
    mu = diffusion_coeff(t_half, spec.epsilon) * dt / (2.0 * grid.dx ** 2)
    src0 = np.zeros(grid.n_x)
    src1 = dt * spec.psi1(grid.x_nodes)
    return mu, src0, src1


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--nx", type=int, default=1601)
    parser.add_argument("--nt", type=int, default=1600)
    parser.add_argument("--paths", type=int, default=20000)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    grid = Grid(n_x=args.nx, n_t=args.nt)
    spec = ProblemSpec(epsilon=1.0)
    mu, src0, src1 = march_inputs(spec, grid)
    psor_grid = Grid(n_x=min(args.nx, 401), n_t=min(args.nt, 400))
    psor_mu, psor_src0, psor_src1 = march_inputs(spec, psor_grid)

    surface = solve(spec, grid)
    regions = extract_regions(surface)
    in_s0 = np.ascontiguousarray(regions.in_S0)
    in_s1 = np.ascontiguousarray(regions.in_S1)
    _, paths = reduced_path_matrix(0.0, 0.0, spec.epsilon, spec.T, grid.n_t,
                                   0, range(args.paths))
    dtp = spec.T / grid.n_t
    level_idx = np.arange(grid.n_t, dtype=np.int64)

    cases = [
        (f"march_clamp {grid.n_x}x{grid.n_t}",
         lambda k: k[0](mu, src0, src1, spec.c01, spec.c10, 1e-12, 200)),
        (f"march_psor {psor_grid.n_x}x{psor_grid.n_t}",
         lambda k: k[1](psor_mu, psor_src0, psor_src1, spec.c01, spec.c10,
                        1e-12, 200, 1.3)),
        (f"policy_regions {args.paths}x{grid.n_t}",
         lambda k: k[2](paths, level_idx, in_s0, in_s1, grid.x_min, grid.dx,
                        spec.psi1_slope, spec.psi1_intercept, dtp, 1)),
        (f"policy_threshold {args.paths}x{grid.n_t}",
         lambda k: k[3](paths, 0.3, -0.3, spec.psi1_slope,
                        spec.psi1_intercept, dtp, 1)),
    ]
    numpy_lane = (_kernels._march_clamp_numpy, _kernels._march_psor_numpy,
                  _kernels._policy_regions_numpy,
                  _kernels._policy_threshold_numpy)

    if _kernels.NUMBA_ENABLED:
        numba_lane = (_kernels.march_clamp, _kernels.march_psor,
                      _kernels.policy_regions, _kernels.policy_threshold)
        for _, runner in cases:
            runner(numba_lane)  # compile before timing
    else:
        numba_lane = None
        print("numba unavailable or disabled; timing the numpy lane only\n")

    header = f"{'kernel':<34} {'numba':>10} {'numpy':>10} {'speedup':>9}"
    print(header)
    print("-" * len(header))
    for name, runner in cases:
        t_numpy = best_of(lambda: runner(numpy_lane), args.repeat)
        if numba_lane is not None:
            t_numba = best_of(lambda: runner(numba_lane), args.repeat)
            print(f"{name:<34} {t_numba * 1e3:>8.1f}ms {t_numpy * 1e3:>8.1f}ms "
                  f"{t_numpy / t_numba:>8.1f}x")
        else:
            print(f"{name:<34} {'-':>10} {t_numpy * 1e3:>8.1f}ms {'-':>9}")


if __name__ == "__main__":
    main()
