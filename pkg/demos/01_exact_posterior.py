"""
Exact posterior of the Ising coupling
=====================================

A lattice small enough for the column-transfer recursion has a computable
normalising constant, so its posterior over theta can be tabulated on a grid.
Everything else in the package is checked against this.
"""

import numpy as np

from noisygrf import IsingModel, exact_posterior_grid, log_partition
from noisygrf.oracle import brute_force_logZ, exact_moments
from noisygrf.studies import simulate_ising

# one 8x8 lattice from a long Gibbs run at theta = 0.3
model = IsingModel(8, 8)
rng = np.random.default_rng(2024)
y = simulate_ising(model, 0.3, 1000, rng)
print("observed lattice:")
for row in y:
    print("  " + "".join("+" if v > 0 else "." for v in row))
print("s(y) =", model.suffstats(y)[0], "of", model.n_edges, "edges")

# the recursion agrees with brute-force enumeration where both are possible
small = IsingModel(3, 4)
print("3x4 log Z: transfer %.12f, enumeration %.12f" % (log_partition(small, [0.3]), brute_force_logZ(small, [0.3])))

# log Z is convex; its derivative is E[s(y)] and the second derivative Var[s(y)]
for theta in (-0.4, 0.0, 0.3, 0.8):
    mean, cov = exact_moments(model, [theta])
    print(f"theta={theta:+.1f}  log Z={log_partition(model, [theta]):9.4f}  E s={mean[0]:7.3f}  Var s={cov[0, 0]:8.3f}")

grid = exact_posterior_grid(model, y, np.linspace(-0.4, 0.8, 241))
mu, sd = grid.summaries()
print(f"posterior mean {mu:.4f}, sd {sd:.4f}, mode {grid.argmax():.3f}")

# a coarse text plot of the density
dens = grid.density
for t, d in list(zip(grid.theta_grid, dens))[::12]:
    print(f"{t:+.2f} " + "#" * int(60 * d / dens.max()))
