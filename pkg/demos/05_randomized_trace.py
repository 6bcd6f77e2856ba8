"""Randomized estimation for reversible chains.

For a random walk on an undirected graph Kemeny's constant is the trace of
the inverse of a symmetric positive definite operator, minus one. Hutch++
estimates that trace from a handful of solves, each done by preconditioned
conjugate gradients.
"""

import numpy as np

from kemeny import HutchConfig, build_from_graph, grid_graph, kemeny_direct, kemeny_hutchpp, sample_count

walk = build_from_graph(grid_graph(20), mode="symmetric")
exact = kemeny_direct(walk.transition()).kappa
print(f"20 x 20 grid walk, exact kappa = {exact:.4f}")
print(f"queries for delta=0.25, eps=0.1: {sample_count(0.25, 0.1)}")

for l in (13, 30, 90):
    est = [kemeny_hutchpp(walk, HutchConfig(l=l, rng_seed=s)).kappa for s in range(20)]
    rel = np.abs(np.array(est) - exact) / exact
    print(f"  l={l:3d}: median relative error {np.median(rel):.3f}, worst {rel.max():.3f}")

r = kemeny_hutchpp(walk, HutchConfig(rng_seed=0))
print(f"\none run: kappa ~ {r.kappa:.3f}, query split {r.diagnostics['split']}, "
      f"largest CG residual {max(r.diagnostics['residuals']):.1e}")
