"""Kemeny's constant of small chains, computed two independent ways.

The direct route inverts the deflated matrix ``I - P + 1 pi^T``; the
spectral route sums ``1 / (1 - lambda)`` over the non-unit eigenvalues.
Both should agree with the closed forms of the uniform chain and the
directed cycle.
"""

import numpy as np

from kemeny import (
    build_from_graph,
    directed_cycle,
    grid_graph,
    kemeny_direct,
    kemeny_eig,
    stationary,
    uniform_chain,
)

print("uniform chain on n states: kappa = n - 1")
for n in (2, 5, 50):
    p = uniform_chain(n)
    print(f"  n={n:3d}  direct={kemeny_direct(p).kappa:.12f}  eig={kemeny_eig(p).kappa:.12f}")

print("\ndirected m-cycle: kappa = (m - 1) / 2")
for m in (3, 10, 101):
    print(f"  m={m:3d}  direct={kemeny_direct(directed_cycle(m)).kappa:.12f}")

# a random walk on a 6 x 6 grid: kappa is the expected hitting time of a
# stationary-distributed target, whatever the starting state
walk = build_from_graph(grid_graph(6))
pi = stationary(walk).pi
res = kemeny_direct(walk)
print(f"\n6 x 6 grid walk: kappa = {res.kappa:.6f}")
print(f"  spectral check: {kemeny_eig(walk).kappa:.6f}")
print(f"  stationary mass at a corner vs centre: {pi[0]:.4f} vs {pi[14]:.4f}")

# mean first passage times from the fundamental matrix reproduce kappa
z = np.linalg.inv(np.eye(36) - walk.toarray() + np.outer(np.ones(36), pi))
mfpt = (np.diag(z)[None, :] - z) / pi[None, :]
print(f"  sum_j pi_j m_ij for rows 0 and 20: {mfpt[0] @ pi:.6f}, {mfpt[20] @ pi:.6f}")
