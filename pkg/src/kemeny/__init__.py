"""Kemeny's constant of Markov chains: direct, divide-and-conquer, randomized.

Quick start
-----------
>>> from kemeny import uniform_chain, kemeny_direct
>>> round(kemeny_direct(uniform_chain(5)).kappa, 12)
4.0
"""

__version__ = "0.1.0"

from .bounds import (
    Interval,
    PerturbationEstimate,
    PerturbationSpec,
    gamma_bounds,
    perturbation_bound,
    pi1_bounds,
    theta_upper_bound,
)
from .direct import KemenyResult, kemeny_direct, kemeny_eig, kemeny_product_identity_check
from .dnc import (
    DncConfig,
    DncError,
    ThetaGamma,
    gamma_resolvent,
    kemeny_dnc,
    theta_alternatives,
    theta_via_solves,
)
from .exceptions import (
    ConvergenceError,
    InvalidInputError,
    KemenyError,
    ReducibleChainError,
    SingularMatrixError,
)
from .generators import (
    directed_cycle,
    grid_graph,
    random_irreducible,
    random_periodic,
    uniform_chain,
)
from .hutch import HutchConfig, kemeny_hutchpp, resolvent_oracle, sample_count
from .linalg import bicgstab, cg, gmres, ic0, ilu0, nested_dissection, sparse_lu
from .markov import (
    AggregatedMatrix,
    BlockPartition,
    CensoredPair,
    StationaryDistribution,
    StochasticMatrix,
    SymmetricWalk,
    aggregated,
    build_from_graph,
    check_irreducible,
    largest_component,
    stationary,
    stochastic_complements,
)
from .mmio import read_matrix_market, write_matrix_market
from .structured import (
    PeriodicChain,
    assemble_periodic,
    extremal_periodic,
    kemeny_bipartite,
    kemeny_constant_rowsum,
    kemeny_kronecker,
    kemeny_periodic,
    kemeny_periodic_decomposition_check,
)

__all__ = [name for name in dir() if not name.startswith("_")]
