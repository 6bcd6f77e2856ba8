"""A priori bounds on the split quantities and a perturbation estimate.

The bounds use only the blocks of ``P`` (no stationary vector), so they can
steer the choice of a split before any complement is formed. The
perturbation estimate predicts how far Kemeny's constant moves when ``P``
is nudged along a zero-row-sum direction ``E``.
"""

import numpy as np

from kemeny import (
    PerturbationSpec,
    gamma_bounds,
    kemeny_direct,
    perturbation_bound,
    pi1_bounds,
    random_irreducible,
    stochastic_complements,
    theta_upper_bound,
    theta_via_solves,
)
from kemeny.generators import random_perturbation

p = random_irreducible(80, density=0.05, seed=3)
for m in (10, 40, 70):
    pair = stochastic_complements(p, m)
    tg = theta_via_solves(p, m, pair.pihat1, pair.pihat2, complements=pair)
    mass, gam = pi1_bounds(p, m), gamma_bounds(p, m)
    print(f"m={m:2d}  pi1 mass {pair.alpha1:.4f} in [{mass.lo:.4f}, {mass.hi:.4f}]   "
          f"theta {tg.theta:.3f} <= {float(theta_upper_bound(p, m)):.3f}   "
          f"gamma {tg.gamma:.3f} in [{gam.lo:.3f}, {gam.hi:.3f}]")

q = random_irreducible(40, density=0.2, seed=5)
e, eps_max = random_perturbation(q, seed=5)
k0 = kemeny_direct(q).kappa
print(f"\nperturbing a 40-state chain (admissible step up to {eps_max:.3g})")
print("     eps      actual change   first-order   bound")
for eps in np.logspace(-5, -2, 4):
    if eps > eps_max:
        break
    est = perturbation_bound(q, PerturbationSpec(e, eps))
    moved = kemeny_direct(q.toarray() + eps * e).kappa - k0
    print(f"  {eps:.0e}   {moved: .6e}   {est.first_order: .6e}   {est.bound:.3e}")
