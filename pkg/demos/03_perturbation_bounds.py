"""
How far does a perturbed kernel drift?
======================================

If P mixes uniformly, a nearby kernel P_hat stays close in n-step law for all
n, not just one step.  Check this exactly on finite chains, then on the
grid versions of the exact-MH and noisy-exchange samplers.
"""

import numpy as np

from noisygrf import IsingModel
from noisygrf.bounds import (
    ergodicity_cert,
    grid_exact_mh_kernel,
    grid_noisy_exchange_kernel,
    noisy_exchange_kernel_terms,
    random_kernel_pair,
    tv_kernel_distance,
    verify_perturbation,
    verify_random_pairs,
)

rng = np.random.default_rng(3)
P, Phat = random_kernel_pair(8, 0.05, rng)
cert = ergodicity_cert(P)
rep = verify_perturbation(P, Phat, start=0, n_max=60)
print(f"certificate: {cert.method}, C={cert.c}, rho={cert.rho:.3f}")
print(f"kappa = {rep.kappa:.4f}, bound = {rep.bound:.4f}, lambda = {rep.lam}")
print("n-step TV:", np.round(rep.per_n_tv[[0, 1, 2, 4, 9, 29, 59]], 5))

print("\n200 random pairs:", verify_random_pairs(8, 200, 0.05, 200, seed=0))

# grid kernels on a 2x2 lattice: the auxiliary-draw expectation is exact here
model = IsingModel(2, 2)
y = np.array([[1, 1], [-1, 1]], dtype=np.int8)
grid = np.linspace(-1.0, 1.5, 11)
exact = grid_exact_mh_kernel(model, y, grid, 0.4)
print(f"\n{'N':>4} {'kernel TV':>10} {'bound on it':>12} {'sup_n TV':>9} {'n-step bound':>13}")
for N in (1, 2, 4, 8, 16):
    noisy = grid_noisy_exchange_kernel(model, y, grid, 0.4, N)
    terms = noisy_exchange_kernel_terms(model, y, grid, 0.4, N, rule="discrete")
    sup_tv = verify_perturbation(exact, noisy, 5, 300, cert=terms.cert).per_n_tv.max()
    print(f"{N:>4} {tv_kernel_distance(exact, noisy):10.5f} {terms.kappa_bound:12.5f} {sup_tv:9.5f} {terms.bound:13.4f}")
# the bound is loose but falls like 1/sqrt(N); the real distance falls faster
