#!/usr/bin/env python3
"""Grid convergence of the Dirac-Coulomb ground level (kappa = -1).

Prints, for each coupling and mesh, the computed level, the closed form
[1 + nu^2/(n_r + sqrt(kappa^2 - nu^2))^2]^(-1/2) and the relative error.
Tightly bound states (nu close to 1) need a short box and a fine mesh;
the default grids reflect that.

    python3 scripts/dirac_convergence.py
    python3 scripts/dirac_convergence.py --nu 0.5 --R 40 --N 100 200 400 800
"""
import argparse

from gapspec import gap_profile, solver
from gapspec import discretization as disc

DEFAULTS = {0.5: (40.0, [100, 200, 400, 800]), 0.9: (6.0, [250, 500, 1000, 2000])}


def run(nu, R, sizes, kappa):
    exact = disc.analytic_dirac_coulomb_level(nu, kappa, 0 if kappa < 0 else 1)
    prev = None
    for N in sizes:
        op = disc.build_dirac_radial(disc.PotentialSpec.coulomb(nu), kappa, disc.RadialGrid(R, N))
        r = solver.solve_level(op, gap_profile(op, 1.0, -1.0), 1, "plus", solver.PDE_TOL)
        err = abs(r.value - exact) / exact
        ratio = f"{prev / err:6.2f}" if prev else "     -"
        print(f"{nu:5.2f} {kappa:3d} {R:6.1f} {N:6d} {r.value:.10f} {exact:.10f} {err:10.3e} {ratio} {r.status.value}")
        prev = err


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--nu", type=float, action="append")
    ap.add_argument("--R", type=float)
    ap.add_argument("--N", type=int, nargs="+")
    ap.add_argument("--kappa", type=int, default=-1)
    args = ap.parse_args()
    print("   nu  kap      R      N        level        exact    rel_err  ratio status")
    for nu in args.nu or sorted(DEFAULTS):
        R, sizes = DEFAULTS.get(nu, (40.0, [100, 200, 400]))
        run(nu, args.R or R, args.N or sizes, args.kappa)


if __name__ == "__main__":
    main()
