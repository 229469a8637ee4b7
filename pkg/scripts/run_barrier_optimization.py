#!/usr/bin/env python3
"""Optimal laser profiles for 1, 2, and 8 barriers on the survey grid.

Runs the constrained optimizer for increasing segment counts, warm-starting
each level from the previous optimum (split in half), and writes per-level
profile and absorption CSVs plus a combined summary. The mean absorption
must be non-decreasing down the chain; the script asserts that.
"""
import argparse
import os

import numpy as np

from atomprobe import (OptimizationProblem, cesium_default, embed_profile,
                       optimize, rate_internal_to_per_s,
                       uniform_velocity_grid, wavenumber_to_velocity)


def write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(f"{v:.11e}" for v in row) + "\n")
    print(path)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/barrier_optimization")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--levels", type=int, nargs="+", default=[1, 2, 8],
                    help="segment counts; each must divide the next")
    ap.add_argument("--length-um", type=float, default=10.0)
    ap.add_argument("--n-velocities", type=int, default=100)
    ap.add_argument("--multistart", type=int, default=16)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)

    cs = cesium_default()
    grid = uniform_velocity_grid(0.2, 9.0, args.n_velocities, cs)
    velocities = [wavenumber_to_velocity(k, cs) for k in grid.k_values]

    summary = []
    previous = None
    for n in args.levels:
        problem = OptimizationProblem(
            species=cs, grid=grid, n_segments=n, total_length=args.length_um,
            kappa=0.2, multistart=args.multistart, seed=args.seed)
        warm = [] if previous is None else [embed_profile(previous.profile,
                                                          problem)]
        result = optimize(problem, warm_starts=warm, threads=args.threads)
        if previous is not None:
            assert result.objective >= previous.objective - 1e-12, \
                f"{n}-segment optimum regressed"
        previous = result

        x = problem.x_start
        rows = []
        for j, seg in enumerate(result.profile.segments):
            rows.append((x, seg.width,
                         rate_internal_to_per_s(seg.detuning),
                         rate_internal_to_per_s(seg.rabi)))
            x += seg.width
        write_csv(os.path.join(args.out, f"profile_{n}.csv"),
                  ["x_left_um", "width_um", "detuning_per_s", "rabi_per_s"],
                  rows)
        write_csv(os.path.join(args.out, f"absorption_{n}.csv"),
                  ["v_cm_per_s", "absorption"],
                  zip(velocities, result.per_k_absorption))
        summary.append((n, result.objective, result.iterations,
                        float(result.converged)))
        print(f"n={n}: mean absorption {result.objective:.6f} "
              f"({result.iterations} iterations)")

    write_csv(os.path.join(args.out, "summary.csv"),
              ["n_segments", "mean_absorption", "iterations", "converged"],
              summary)


if __name__ == "__main__":
    main()
