"""Closed forms for structured chains.

Periodic chains reduce to the product of their cyclic blocks, Kronecker
products add the constants of the factors, and chains whose two blocks
have constant row sums have an explicit correction term.
"""

import numpy as np

from kemeny import (
    assemble_periodic,
    extremal_periodic,
    kemeny_constant_rowsum,
    kemeny_direct,
    kemeny_kronecker,
    kemeny_periodic,
    random_irreducible,
    random_periodic,
)
from kemeny.generators import random_rowsum_chain

chain = random_periodic(3, sizes=(4, 6, 5), seed=0)
print("period-3 chain with block sizes", chain.sizes)
print(f"  from the cyclic product: {kemeny_periodic(chain).kappa:.12f}")
print(f"  from the full matrix:    {kemeny_direct(assemble_periodic(chain)).kappa:.12f}")

# the smallest constant among period-d chains with given block sizes
d, sizes = 3, (2, 5, 4)
ext = extremal_periodic(d, sizes)
n = sum(sizes)
print(f"\nextremal chain d={d}, sizes={sizes}: kappa = {kemeny_direct(assemble_periodic(ext)).kappa:.6f}, "
      f"n - (d n1 + 1)/2 = {n - (d * sizes[0] + 1) / 2}")

a = random_irreducible(4, density=1.0, seed=2)
b = random_irreducible(5, density=1.0, seed=3)
kron = np.kron(a.toarray(), b.toarray())
print("\nKronecker product of 4- and 5-state chains")
print(f"  closed form: {kemeny_kronecker(a, b).kappa:.12f}")
print(f"  direct:      {kemeny_direct(kron).kappa:.12f}")

r1, r2 = 0.5, 0.25
p = random_rowsum_chain(4, 6, r1, r2, seed=0)
res = kemeny_constant_rowsum(p, 4)
print(f"\nconstant row sums r1={r1}, r2={r2}")
print(f"  closed form: {res.kappa:.12f}   direct: {kemeny_direct(p).kappa:.12f}")
print(f"  gamma = 1/(2 - r1 - r2) = {1 / (2 - r1 - r2):.6f}")
