#!/usr/bin/env python3
"""Detection probability versus velocity in the two drive regimes.

Sweeps the two-channel detection probability for the weak (absorbing) and
strong (reflecting) resonant profiles, plus the adiabatic one-channel curve
for the weak case so the two solvers can be plotted on top of each other.
Writes three CSVs; any plotting tool reproduces the curves from them.
"""
import argparse
import os

import numpy as np

from atomprobe import (LaserProfile, Segment, cesium_default,
                       profile_to_potential, solve_one_channel_batch,
                       solve_two_channel_batch, velocity_to_wavenumber)


def write_csv(path, header, columns):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in zip(*columns):
            fh.write(",".join(f"{v:.11e}" for v in row) + "\n")
    print(path)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/detection_curves")
    ap.add_argument("--n", type=int, default=200, help="velocity grid points")
    ap.add_argument("--width-um", type=float, default=10.0)
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)

    cs = cesium_default()
    v = np.linspace(0.2, 9.0, args.n)
    k = np.array([velocity_to_wavenumber(x, cs) for x in v])

    # rates in 1/us; 0.1033 is the weak reference drive, 5 gamma the strong
    for label, rabi in [("weak", 0.1033), ("strong", 5.0 * cs.gamma)]:
        profile = LaserProfile(cs, 0.0, (Segment(args.width_um, 0.0, rabi),))
        detection = solve_two_channel_batch(k, profile)
        write_csv(os.path.join(args.out, f"detect_{label}.csv"),
                  ["v_cm_per_s", "detection_probability"], (v, detection))

    weak = LaserProfile(cs, 0.0, (Segment(args.width_um, 0.0, 0.1033),))
    _, _, adiabatic = solve_one_channel_batch(
        k, profile_to_potential(weak), cs)
    write_csv(os.path.join(args.out, "detect_weak_adiabatic.csv"),
              ["v_cm_per_s", "absorption"], (v, adiabatic))


if __name__ == "__main__":
    main()
