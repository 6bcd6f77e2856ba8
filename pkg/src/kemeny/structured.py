r"""Closed forms of Kemeny's constant for structured chains.

Periodic chains are given in block-cyclic form: the state space is split into
cyclic classes of sizes ``n_1, ..., n_d`` and ``A_i`` (of size
``n_{i+1} x n_i``) holds the transitions from class ``i+1`` to class ``i``,
with ``A_d`` (``n_1 x n_d``) closing the cycle from class 1 to class ``d``.
Then

.. math::

    \kappa(P) = d\,\kappa(A_d \cdots A_1) + n - d n_1 + \frac{d-1}{2}.
"""

from dataclasses import dataclass
from functools import reduce
import math

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse import csgraph

from .direct import N_DENSE, KemenyResult, kemeny_direct
from .dnc import kemeny_dnc, theta_via_solves
from .exceptions import InvalidInputError, ReducibleChainError
from .markov import (
    StochasticMatrix,
    _as_matrix,
    _SplitFactors,
    _split_m,
    blocks,
    check_irreducible,
    stationary,
    stochastic_complements,
)

__all__ = [
    "PeriodicChain",
    "assemble_periodic",
    "kemeny_periodic",
    "kemeny_bipartite",
    "kemeny_periodic_decomposition_check",
    "kemeny_kronecker",
    "kronecker_gamma",
    "kemeny_constant_rowsum",
    "constant_rowsums",
    "extremal_periodic",
    "detect_period",
    "periodic_from_matrix",
]

_STOCH_TOL = 1e-10


def _kappa(p, n_dense=N_DENSE):
    """Kemeny's constant of a general irreducible chain, dense or recursive."""
    a = _as_matrix(p)
    if a.shape[0] == 1:
        return 0.0
    if a.shape[0] <= n_dense:
        return kemeny_direct(a).kappa
    return kemeny_dnc(a).kappa


@dataclass(frozen=True, eq=False)
class PeriodicChain:
    """A block-cyclic chain of period ``d`` given by its blocks ``A_1..A_d``.

    Parameters
    ----------
    blocks : sequence of array_like or sparse
        ``A_i`` of shape ``(n_{i+1}, n_i)`` (indices mod ``d``), each
        row-stochastic.
    """

    blocks: tuple

    def __post_init__(self):
        bl = tuple(sp.csr_matrix(b, dtype=float) for b in self.blocks)
        d = len(bl)
        if d < 2:
            raise InvalidInputError("a periodic chain needs d >= 2 blocks")
        for i, b in enumerate(bl):
            nxt = bl[(i + 1) % d]
            if b.shape[0] != nxt.shape[1]:
                raise InvalidInputError(
                    f"A_{i + 1} has {b.shape[0]} rows but A_{(i + 1) % d + 1} has "
                    f"{nxt.shape[1]} columns"
                )
            if b.nnz and b.data.min() < 0:
                raise InvalidInputError(f"A_{i + 1} has negative entries")
            rows = np.asarray(b.sum(axis=1)).ravel()
            if np.abs(rows - 1).max() > _STOCH_TOL:
                raise InvalidInputError(f"A_{i + 1} is not row-stochastic")
        object.__setattr__(self, "blocks", bl)

    @property
    def d(self):
        return len(self.blocks)

    @property
    def sizes(self):
        """Class sizes ``(n_1, ..., n_d)``."""
        return tuple(b.shape[1] for b in self.blocks)

    @property
    def n(self):
        return sum(self.sizes)

    def product(self, start=1):
        """The cyclic product starting at ``A_start``.

        ``start=1`` gives ``A_d ... A_1`` (``n_1 x n_1``); ``start=k`` gives
        ``A_{k-1} ... A_1 A_d ... A_k`` (``n_k x n_k``).
        """
        order = [(start - 1 + i) % self.d for i in range(self.d)]
        return reduce(lambda acc, i: self.blocks[i] @ acc, order[1:], self.blocks[order[0]])


def assemble_periodic(blocks):
    """The block-cyclic transition matrix of a periodic chain.

    Examples
    --------
    >>> assemble_periodic([[[1.0]], [[1.0]]]).toarray()
    array([[0., 1.],
           [1., 0.]])
    """
    chain = blocks if isinstance(blocks, PeriodicChain) else PeriodicChain(tuple(blocks))
    d = chain.d
    grid = [[None] * d for _ in range(d)]
    for i, b in enumerate(chain.blocks):
        grid[(i + 1) % d][i] = b
    for i, s in enumerate(chain.sizes):
        if grid[i][i] is None:
            grid[i][i] = sp.csr_matrix((s, s))
    return StochasticMatrix._trusted(sp.bmat(grid, format="csr"))


def kemeny_periodic(chain, n_dense=N_DENSE):
    r"""Kemeny's constant of a periodic chain from its cyclic product.

    ``kappa(P) = d kappa(A_d ... A_1) + n - d n_1 + (d-1)/2``; for equal
    class sizes the middle term vanishes. Uniform blocks give
    ``kappa = n - (d+1)/2``.

    Raises
    ------
    ReducibleChainError
        When ``A_d ... A_1`` is reducible.
    """
    if not isinstance(chain, PeriodicChain):
        chain = PeriodicChain(tuple(chain))
    prod = StochasticMatrix(chain.product())
    cert = check_irreducible(prod)
    if not cert:
        raise ReducibleChainError(
            f"cyclic product A_d...A_1 is reducible ({cert.n_components} components)",
            cert.n_components,
        )
    d, n, n1 = chain.d, chain.n, chain.sizes[0]
    k1 = _kappa(prod, n_dense)
    kappa = d * k1 + n - d * n1 + (d - 1) / 2
    equal = len(set(chain.sizes)) == 1
    return KemenyResult(
        float(kappa), "closed-form", n,
        {"structure": "periodic", "d": d, "sizes": list(chain.sizes),
         "kappa_product": k1, "equal_sizes": equal},
    )


def kemeny_bipartite(p, split):
    r"""Closed form for a chain with zero diagonal blocks.

    ``kappa(P) = 2 kappa(P12 P21) - n_1 + n_2 + 1/2``.
    """
    m = _split_m(split)
    p11, p12, p21, p22 = blocks(_as_matrix(p), m)
    if p11.count_nonzero() or p22.count_nonzero():
        raise InvalidInputError("diagonal blocks must vanish for the bipartite form")
    res = kemeny_periodic(PeriodicChain((p21, p12)))
    res.diagnostics["structure"] = "bipartite"
    return res


def kemeny_periodic_decomposition_check(chain):
    """Split a periodic chain after its first class and evaluate the pieces.

    The censored chains are ``P1 = A_d ... A_1`` and the ``(d-1)``-cyclic
    chain on the remaining classes; the correction should equal ``1/2``.

    Returns
    -------
    (float, float, float, float)
        ``(kappa(P), kappa(P1), kappa(P2), gamma)``, each computed
        numerically (direct and three-solve), not from the closed form.
    """
    if not isinstance(chain, PeriodicChain):
        chain = PeriodicChain(tuple(chain))
    p = assemble_periodic(chain)
    m = chain.sizes[0]
    pi = stationary(p)
    pair = stochastic_complements(p, m, pi=pi)
    tg = theta_via_solves(p, m, pair.pihat1, pair.pihat2, complements=pair)
    return (_kappa(p), _kappa(pair.p1), _kappa(pair.p2), float(tg.gamma))


def kronecker_gamma(a):
    r"""Correction term of ``A (x) B`` split after the first block row.

    ``gamma = (e_1^T (I - A + 1 x^T)^{-1} e_1 - x_1) / (1 - x_1)`` with
    ``x`` the stationary vector of ``A``; it does not depend on ``B``.
    """
    am = _as_matrix(a)
    n = am.shape[0]
    if n < 2:
        raise InvalidInputError("A must have at least two states")
    x = stationary(am).pi
    e1 = np.zeros(n)
    e1[0] = 1.0
    z = sla.solve(np.eye(n) - am.toarray() + np.outer(np.ones(n), x), e1)
    return float((z[0] - x[0]) / (1.0 - x[0]))


def kemeny_kronecker(a, b, n_dense=N_DENSE):
    """Kemeny's constant of ``A (x) B`` from its two censored chains.

    The product is split after its first ``size(B)`` states; the censored
    chains are evaluated numerically and the correction in closed form
    (:func:`kronecker_gamma`).

    Raises
    ------
    ReducibleChainError
        When ``A (x) B`` is reducible (e.g. both factors periodic); compute
        the components with :func:`kemeny_direct` instead.
    """
    am, bm = _as_matrix(a), _as_matrix(b)
    if am.shape[0] * bm.shape[0] > 10 * n_dense:
        raise InvalidInputError("Kronecker product too large")
    p = StochasticMatrix._trusted(sp.kron(am, bm, format="csr"))
    cert = check_irreducible(p)
    if not cert:
        raise ReducibleChainError(
            f"A (x) B is reducible ({cert.n_components} components); "
            "use kemeny_direct on each component",
            cert.n_components,
        )
    m = bm.shape[0]
    pi = np.kron(stationary(am).pi, stationary(bm).pi)
    pair = stochastic_complements(p, m, pi=pi / pi.sum())
    gamma = kronecker_gamma(am)
    k1, k2 = _kappa(pair.p1, n_dense), _kappa(pair.p2, n_dense)
    return KemenyResult(
        float(k1 + k2 + gamma), "closed-form", p.n,
        {"structure": "kronecker", "kappa1": k1, "kappa2": k2, "gamma": gamma},
    )


def constant_rowsums(p, split, tol=_STOCH_TOL):
    """Row sums ``(r1, r2)`` of the diagonal blocks, or ``None`` if not constant."""
    p11, _, _, p22 = blocks(_as_matrix(p), _split_m(split))
    out = []
    for q in (p11, p22):
        r = np.asarray(q.sum(axis=1)).ravel()
        if r.max() - r.min() > tol or r.max() >= 1.0:
            return None
        out.append(float(r.mean()))
    return tuple(out)


def kemeny_constant_rowsum(p, split, tol=_STOCH_TOL):
    r"""Decomposition for diagonal blocks with constant row sums.

    With ``P11 1 = r1 1`` and ``P22 1 = r2 1``,
    ``kappa(P) = kappa(P1) + kappa(P2) + 1/(2 - r1 - r2)`` and the block
    masses are ``((1-r2), (1-r1)) / (2 - r1 - r2)``.

    Returns
    -------
    KemenyResult
        ``diagnostics`` carries ``r1``, ``r2``, ``alpha1``, ``alpha2``,
        ``theta`` and ``gamma``.
    """
    m = _split_m(split)
    r = constant_rowsums(p, m, tol)
    if r is None:
        raise InvalidInputError(
            f"diagonal blocks of split m={m} do not have constant row sums below one"
        )
    r1, r2 = r
    s = 2.0 - r1 - r2
    a1, a2 = (1.0 - r2) / s, (1.0 - r1) / s
    p1, p2 = _SplitFactors.build(_as_matrix(p), m).complements()
    k1, k2 = _kappa(p1), _kappa(p2)
    gamma = 1.0 / s
    return KemenyResult(
        float(k1 + k2 + gamma), "closed-form", _as_matrix(p).shape[0],
        {"structure": "constant-rowsum", "r1": r1, "r2": r2, "alpha1": a1, "alpha2": a2,
         "theta": (2.0 - r1) / (1.0 - r2), "gamma": gamma, "kappa1": k1, "kappa2": k2},
    )


def extremal_periodic(d, sizes):
    r"""Periodic chain attaining ``kappa = n - (d n_1 + 1)/2``.

    Each class ``j`` is cut into ``n_1`` contiguous, balanced groups
    ``C_l^j``. Class 1 group ``l`` moves uniformly to ``C_l^d``; for
    ``j >= 3`` group ``C_l^j`` moves uniformly to ``C_l^{j-1}``; ``C_l^2``
    moves to state ``l-1`` of class 1 (cyclically). The cyclic product is
    then a directed ``n_1``-cycle.

    Parameters
    ----------
    d : int
        Period, at least 2.
    sizes : sequence of int
        ``n_1, ..., n_d`` with ``n_1 <= n_i``.
    """
    sizes = [int(s) for s in sizes]
    if d < 2 or len(sizes) != d:
        raise InvalidInputError("need d >= 2 and exactly d class sizes")
    n1 = sizes[0]
    if n1 < 1 or min(sizes) < n1:
        raise InvalidInputError("class sizes must satisfy 1 <= n_1 <= n_i")
    groups = [np.array_split(np.arange(s), n1) for s in sizes]

    def uniform_block(src, dst):
        # rows: class src groups, columns: class dst groups (0-based classes)
        a = np.zeros((sizes[src], sizes[dst]))
        for ell in range(n1):
            a[np.ix_(groups[src][ell], groups[dst][ell])] = 1.0 / groups[dst][ell].size
        return a

    bl = [None] * d
    a1 = np.zeros((sizes[1], n1))
    for ell in range(n1):
        a1[groups[1][ell], (ell - 1) % n1] = 1.0
    bl[0] = a1
    for j in range(3, d + 1):
        bl[j - 2] = uniform_block(j - 1, j - 2)  # A_{j-1}: class j -> class j-1
    bl[d - 1] = uniform_block(0, d - 1)  # A_d: class 1 -> class d
    return PeriodicChain(tuple(bl))


def detect_period(p):
    """Period of an irreducible chain and the cyclic class of every state.

    Uses BFS levels from state 0: the period is the gcd of
    ``level[u] + 1 - level[v]`` over all edges ``u -> v``.

    Returns
    -------
    (int, ndarray)
        ``d`` and 1-based class labels in the block-cyclic convention
        (state 0 in class 1, its successors in class ``d``).
    """
    a = _as_matrix(p)
    cert = check_irreducible(a)
    if not cert:
        raise ReducibleChainError("period is defined for irreducible chains", cert.n_components)
    order, pred = csgraph.breadth_first_order(a, 0, directed=True, return_predecessors=True)
    level = np.zeros(a.shape[0], dtype=np.int64)
    for v in order[1:]:
        level[v] = level[pred[v]] + 1
    coo = a.tocoo()
    diffs = np.abs(level[coo.row] + 1 - level[coo.col])
    d = int(reduce(math.gcd, diffs.tolist(), 0))
    if d <= 1:
        return 1, np.ones(a.shape[0], dtype=np.int64)
    return d, (-level) % d + 1


def periodic_from_matrix(p):
    """Block-cyclic form of a periodic chain.

    Returns
    -------
    (PeriodicChain, ndarray)
        The chain and the permutation ordering states by cyclic class.

    Raises
    ------
    InvalidInputError
        When the chain is aperiodic.
    """
    a = _as_matrix(p)
    d, labels = detect_period(a)
    if d < 2:
        raise InvalidInputError("chain is aperiodic")
    classes = [np.flatnonzero(labels == j) for j in range(1, d + 1)]
    bl = tuple(a[classes[(i + 1) % d]][:, classes[i]] for i in range(d))
    return PeriodicChain(bl), np.concatenate(classes)
