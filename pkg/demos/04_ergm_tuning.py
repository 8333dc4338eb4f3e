"""
Tuning and running the samplers on a network
============================================

A 16-node graph with an edges + two-stars model.  The Langevin-type
samplers need a step matrix, so first find the MAP by stochastic
approximation, estimate the curvature there, and scale its inverse.
"""

import sys

import numpy as np

from noisygrf import ErgmModel, GaussianPrior, SamplerConfig, tune
from noisygrf.io import load_graph
from noisygrf.studies import ErgmStudyConfig, ergm_study

# pass an edge-list file to use your own graph; otherwise draw one
if len(sys.argv) > 1:
    adj = load_graph(sys.argv[1]).adjacency
else:
    rng = np.random.default_rng(11)
    adj = np.zeros((16, 16), dtype=np.uint8)
    for i in range(16):
        for j in range(i + 1, 16):
            if rng.random() < 0.13:
                adj[i, j] = adj[j, i] = 1
n = adj.shape[0]
model = ErgmModel(n, ("edges", "two-stars"), GaussianPrior.isotropic(2, 100.0))
print(f"{n} nodes, statistics {dict(zip(model.stat_names, model.suffstats(adj)))}")

cfg = SamplerConfig(n_aux=10, aux_burnin=500, seed=0)
tuned = tune(model, adj, cfg, n_draws=2000, n_pilots=4, pilot_iter=500)
print("MAP:", np.round(tuned["theta_star"], 3), f"after {tuned['rm_iterations']} steps")
print("Hessian:\n", np.round(tuned["hessian"], 2))
print(f"scale {tuned['scale']:.3g}, pilot acceptance {tuned['acceptance']:.2f}")

study = ErgmStudyConfig(n_iter=3000, aux_burnin=500, seed=1)
report = ergm_study(study, adj, tuned)
cols, rows = report.tables["posterior_layout"]
print()
print("".join(f"{c:>22}" for c in cols))
for r in rows:
    print("".join(f"{c:>22}" for c in r))
print("\nseconds per algorithm:", report.timing)
