#!/usr/bin/env python3
"""Plot-ready table of the plus-side levels of the two-component Coulomb model versus nu.

For each nu the channels l = 0..l_max are solved, merged with their
multiplicities and compared with the closed-form levels 1 - nu^2/(4 n^2).
Rows whose status is clamped_at_a are the levels the variational
procedure does not characterize (the regime beyond nu = 2).

    python3 scripts/pauli_branch_table.py --nu-max 3 --steps 31 > branches.csv
"""
import argparse
import csv
import sys

import numpy as np

from gapspec import gap_profile, solver
from gapspec import discretization as disc


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--R", type=float, default=80.0)
    ap.add_argument("--N", type=int, default=1000)
    ap.add_argument("--l-max", type=int, default=2)
    ap.add_argument("--levels", type=int, default=3, help="levels per channel")
    ap.add_argument("--nu-max", type=float, default=3.0)
    ap.add_argument("--steps", type=int, default=31)
    args = ap.parse_args()

    grid = disc.RadialGrid(args.R, args.N)
    out = csv.writer(sys.stdout, lineterminator="\n")
    out.writerow(["nu", "k", "multiplicity", "channel", "lambda", "status", "a_minus", "nearest_E_plus", "n"])
    for nu in np.linspace(0.0, args.nu_max, args.steps):
        chans, profiles = [], []
        for l in range(args.l_max + 1):
            op = disc.build_pauli_channel(float(nu), l, grid)
            prof, plus, minus = solver.solve_both_sides(op, gap_profile(op, 1.0, -1.0), args.levels, solver.PDE_TOL)
            chans.append((f"l={l}", 2 * l + 1, plus))
            profiles.append(prof)
        glob = solver.merged_profile(profiles)
        for m in solver.merge_channels(chans, glob, "plus"):
            ns = np.arange(1, 40)
            e = 1.0 - nu**2 / (4.0 * ns**2)
            n = int(ns[np.argmin(np.abs(e - m.value))])
            out.writerow([f"{nu:.6g}", m.k, m.multiplicity, m.channel, format(m.value, ".10g"),
                          m.status.value, format(glob.a_minus, ".10g"),
                          format(disc.analytic_pauli_level(nu, n, "+"), ".10g"), n])


if __name__ == "__main__":
    main()
