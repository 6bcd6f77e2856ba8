"""Synthetic chains and graphs for tests, demos and benchmarks."""

import numpy as np
import scipy.sparse as sp

from .exceptions import InvalidInputError
from .markov import StochasticMatrix, _as_matrix, check_irreducible
from .structured import PeriodicChain

__all__ = [
    "uniform_chain",
    "directed_cycle",
    "random_stochastic",
    "random_irreducible",
    "random_periodic",
    "random_rowsum_chain",
    "grid_graph",
    "path_graph",
    "random_perturbation",
]


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def _normalize(a):
    a = sp.csr_matrix(a)
    rows = np.asarray(a.sum(axis=1)).ravel()
    return StochasticMatrix(sp.diags(1.0 / rows) @ a)


def uniform_chain(n):
    """The chain with every entry equal to ``1/n`` (``kappa = n - 1``)."""
    return StochasticMatrix(np.full((n, n), 1.0 / n))


def directed_cycle(m):
    """Deterministic walk ``i -> i+1 mod m`` (``kappa = (m - 1) / 2``)."""
    idx = np.arange(m)
    return StochasticMatrix(sp.csr_matrix((np.ones(m), (idx, (idx + 1) % m)), shape=(m, m)))


def random_stochastic(n, seed=None):
    """Dense chain with i.i.d. uniform rows, normalized."""
    a = _rng(seed).random((n, n)) + 1e-3
    return StochasticMatrix(a / a.sum(axis=1, keepdims=True))


def random_irreducible(n, density=0.05, seed=None):
    """Sparse irreducible chain: a random Hamiltonian cycle plus random arcs.

    Weights are uniform on ``(0, 1]``; about ``density * n^2`` arcs besides
    the cycle.
    """
    rng = _rng(seed)
    perm = rng.permutation(n)
    rows = list(perm)
    cols = list(np.roll(perm, -1))
    extra = int(round(density * n * n))
    if extra:
        rows += list(rng.integers(0, n, extra))
        cols += list(rng.integers(0, n, extra))
    vals = 1.0 - rng.random(len(rows))
    return _normalize(sp.csr_matrix((vals, (rows, cols)), shape=(n, n)))


def random_periodic(d, sizes=None, max_size=20, density=1.0, seed=None):
    """Random block-cyclic chain with positive-row blocks.

    With ``density < 1`` blocks are sparse (each row keeps at least one
    entry); draws are repeated until the cyclic product is irreducible.
    """
    rng = _rng(seed)
    if sizes is None:
        sizes = rng.integers(1, max_size + 1, size=d)
    sizes = [int(s) for s in sizes]
    if len(sizes) != d:
        raise InvalidInputError("need one size per class")
    for _ in range(100):
        bl = []
        for i in range(d):
            r, c = sizes[(i + 1) % d], sizes[i]
            a = rng.random((r, c)) * (rng.random((r, c)) < density)
            a[np.arange(r), rng.integers(0, c, r)] += 1.0 - rng.random(r)
            bl.append(a / a.sum(axis=1, keepdims=True))
        chain = PeriodicChain(tuple(bl))
        if check_irreducible(chain.product()):
            return chain
    raise InvalidInputError("could not draw an irreducible periodic chain")


def random_rowsum_chain(n1, n2, r1, r2, seed=None):
    """Chain whose diagonal blocks have constant row sums ``r1`` and ``r2``."""
    rng = _rng(seed)
    n = n1 + n2

    def scaled(r, c, s):
        a = rng.random((r, c)) + 0.05
        return s * a / a.sum(axis=1, keepdims=True)

    p = np.zeros((n, n))
    p[:n1, :n1] = scaled(n1, n1, r1)
    p[:n1, n1:] = scaled(n1, n2, 1.0 - r1)
    p[n1:, :n1] = scaled(n2, n1, 1.0 - r2)
    p[n1:, n1:] = scaled(n2, n2, r2)
    return StochasticMatrix(p)


def path_graph(n):
    """Adjacency of the path on ``n`` vertices."""
    e = np.ones(n - 1)
    return sp.diags([e, e], [1, -1], format="csr")


def grid_graph(k, cols=None, shortcuts=0, seed=None):
    """Adjacency of the ``k x cols`` grid (square by default).

    ``shortcuts`` random vertex pairs are joined symmetrically.
    """
    cols = k if cols is None else cols
    a = (sp.kron(sp.identity(k), path_graph(cols)) + sp.kron(path_graph(k), sp.identity(cols)))
    a = a.tocsr()
    if shortcuts:
        rng = _rng(seed)
        n = k * cols
        i = rng.integers(0, n, shortcuts)
        j = rng.integers(0, n, shortcuts)
        keep = i != j
        s = sp.csr_matrix((np.ones(keep.sum()), (i[keep], j[keep])), shape=(n, n))
        a = a + s + s.T
        a.data[:] = 1.0
    return a.tocsr()


def random_perturbation(p, seed=None):
    """Direction ``E`` on the pattern of ``p`` with zero row sums and ``||E||_inf = 1``.

    Returns ``(E, eps_max)`` where ``P + eps E`` stays nonnegative for
    ``eps <= eps_max``.
    """
    rng = _rng(seed)
    a = _as_matrix(p).toarray()
    mask = a > 0
    e = rng.standard_normal(a.shape) * mask
    counts = mask.sum(axis=1, keepdims=True)
    e -= mask * e.sum(axis=1, keepdims=True) / counts
    e /= np.abs(e).sum(axis=1).max()
    neg = e < 0
    eps_max = float(np.min(a[neg] / -e[neg])) if neg.any() else np.inf
    return e, eps_max
