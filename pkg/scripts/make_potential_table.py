#!/usr/bin/env python3
"""Write V(r) = -1/(1 + r) sampled at the nodes of a radial grid, one value per line."""
import argparse

import numpy as np

from gapspec.discretization import RadialGrid

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--R", type=float, default=40.0)
ap.add_argument("--N", type=int, default=400)
ap.add_argument("output")
args = ap.parse_args()
r = RadialGrid(args.R, args.N).nodes
np.savetxt(args.output, -1.0 / (1.0 + r), fmt="%.17g")
