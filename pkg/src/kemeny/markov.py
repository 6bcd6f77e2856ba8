r"""Finite Markov chains: validation, stationary vectors, stochastic complements.

A chain is a row-stochastic sparse matrix ``P``. Splitting the states into
``{0..m-1}`` and ``{m..n-1}`` gives the blocks ``P11, P12, P21, P22`` and
the two censored chains

.. math::

    P_1 = P_{11} + P_{12} (I - P_{22})^{-1} P_{21}, \qquad
    P_2 = P_{22} + P_{21} (I - P_{11})^{-1} P_{12},

whose stationary vectors are the normalized restrictions of the stationary
vector of ``P``.
"""

from dataclasses import dataclass, field
import logging

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph

from .exceptions import (
    ConvergenceError,
    InvalidInputError,
    ReducibleChainError,
    SingularMatrixError,
)
from .linalg import DenseLU, auto_lu

__all__ = [
    "StochasticMatrix",
    "SymmetricWalk",
    "StationaryDistribution",
    "BlockPartition",
    "CensoredPair",
    "AggregatedMatrix",
    "IrreducibilityCertificate",
    "build_from_graph",
    "stationary",
    "check_irreducible",
    "largest_component",
    "stochastic_complements",
    "aggregated",
    "blocks",
    "ROW_TOL",
    "RENORMALIZE_TOL",
]

log = logging.getLogger(__name__)

#: rows of a validated chain sum to one within this tolerance
ROW_TOL = 1e-12
#: inputs off by at most this much are rescaled instead of rejected
RENORMALIZE_TOL = 1e-8
#: negative entries of at most this size are treated as rounding noise
_NEG_TOL = 1e-13
#: above this size ``stationary(method="auto")`` switches to power iteration
DIRECT_STATIONARY_MAX = 50_000


def _to_csr(a):
    if isinstance(a, StochasticMatrix):
        return a.matrix.copy()
    if sp.issparse(a):
        m = sp.csr_matrix(a, dtype=float, copy=True)
    else:
        arr = np.atleast_2d(np.asarray(a, dtype=float))
        m = sp.csr_matrix(arr)
    m.sum_duplicates()
    m.eliminate_zeros()
    m.sort_indices()
    return m


class StochasticMatrix:
    """Validated, immutable row-stochastic sparse matrix.

    Parameters
    ----------
    a : array_like or sparse matrix, shape (n, n)
        Nonnegative entries. Rows summing to one within
        ``renormalize_tol`` are rescaled to sum to one exactly; larger
        deviations are rejected.
    renormalize_tol : float
        Accepted row-sum deviation before rescaling.

    Notes
    -----
    Irreducibility is not checked here; see :func:`check_irreducible`.
    """

    __slots__ = ("_m",)

    def __init__(self, a, renormalize_tol=RENORMALIZE_TOL):
        m = _to_csr(a)
        if m.shape[0] != m.shape[1]:
            raise InvalidInputError(f"transition matrix must be square, got {m.shape}")
        if m.shape[0] == 0:
            raise InvalidInputError("empty transition matrix")
        if m.nnz and not np.all(np.isfinite(m.data)):
            raise InvalidInputError("transition matrix has non-finite entries")
        if m.nnz and m.data.min() < -_NEG_TOL:
            raise InvalidInputError(f"negative transition probability {m.data.min():.3e}")
        m.data[m.data < 0] = 0.0
        m.eliminate_zeros()
        rows = np.asarray(m.sum(axis=1)).ravel()
        bad = np.abs(rows - 1.0)
        if bad.max() > renormalize_tol:
            i = int(np.argmax(bad))
            raise InvalidInputError(f"row {i} sums to {rows[i]!r}, not 1")
        m = sp.diags(1.0 / rows) @ m
        m = m.tocsr()
        m.sort_indices()
        for arr in (m.data, m.indices, m.indptr):
            arr.flags.writeable = False
        self._m = m

    @classmethod
    def _trusted(cls, m):
        """Wrap a CSR matrix already known to be stochastic (no copies)."""
        obj = cls.__new__(cls)
        obj._m = m
        return obj

    @property
    def matrix(self):
        """The underlying read-only CSR matrix."""
        return self._m

    @property
    def n(self):
        return self._m.shape[0]

    @property
    def shape(self):
        return self._m.shape

    @property
    def nnz(self):
        return self._m.nnz

    def toarray(self):
        return self._m.toarray()

    def __repr__(self):
        return f"StochasticMatrix(n={self.n}, nnz={self.nnz})"


@dataclass(frozen=True)
class SymmetricWalk:
    r"""Symmetric representation of a random walk on an undirected graph.

    ``matrix`` is :math:`D^{-1/2} A D^{-1/2}` with ``D = diag(A 1)``. It is
    similar to the random-walk transition matrix :math:`D^{-1} A` (same
    spectrum, hence same Kemeny constant) and symmetric.
    """

    matrix: sp.csr_matrix
    degrees: np.ndarray

    @property
    def n(self):
        return self.matrix.shape[0]

    @property
    def nnz(self):
        return self.matrix.nnz

    @property
    def stationary(self):
        """Stationary vector ``d / sum(d)`` of the underlying walk."""
        return self.degrees / self.degrees.sum()

    def transition(self):
        """The random-walk transition matrix ``D^{-1} A``."""
        s = np.sqrt(self.degrees)
        a = sp.diags(s) @ self.matrix @ sp.diags(s)
        return StochasticMatrix(sp.diags(1.0 / self.degrees) @ a)


@dataclass(frozen=True)
class StationaryDistribution:
    """Positive probability vector ``pi`` with ``pi^T P = pi^T``."""

    pi: np.ndarray
    residual: float = 0.0

    def __post_init__(self):
        pi = np.asarray(self.pi, dtype=float)
        if pi.ndim != 1:
            raise InvalidInputError("stationary vector must be one-dimensional")
        if not np.all(pi > 0):
            raise InvalidInputError("stationary vector must be strictly positive")
        if abs(pi.sum() - 1.0) > 1e-12:
            raise InvalidInputError(f"stationary vector sums to {pi.sum()!r}")
        pi = pi.copy()
        pi.flags.writeable = False
        object.__setattr__(self, "pi", pi)

    def __len__(self):
        return self.pi.size

    def __array__(self, dtype=None, copy=None):
        return self.pi if dtype is None else self.pi.astype(dtype)

    def restrict(self, split):
        """Masses and normalized restrictions ``(alpha1, alpha2, pihat1, pihat2)``."""
        m = split.m if isinstance(split, BlockPartition) else int(split)
        p1, p2 = self.pi[:m], self.pi[m:]
        a1, a2 = p1.sum(), p2.sum()
        return a1, a2, p1 / a1, p2 / a2


@dataclass(frozen=True)
class BlockPartition:
    """Index split ``{0..m-1} | {m..n-1}``."""

    m: int
    n: int

    def __post_init__(self):
        if not 1 <= self.m < self.n:
            raise InvalidInputError(f"split index must satisfy 1 <= m < n, got m={self.m}, n={self.n}")

    @classmethod
    def halving(cls, n):
        return cls(n // 2, n)

    @property
    def sizes(self):
        return self.m, self.n - self.m


@dataclass(frozen=True)
class CensoredPair:
    """Stochastic complements of a split together with their stationary data.

    ``theta`` and ``gamma`` stay ``None`` until a correction routine fills
    them (``gamma = alpha1 * theta - alpha2``).
    """

    p1: StochasticMatrix
    p2: StochasticMatrix
    pihat1: np.ndarray
    pihat2: np.ndarray
    alpha1: float
    alpha2: float
    theta: float = None
    gamma: float = None


@dataclass(frozen=True)
class AggregatedMatrix:
    """2x2 matrix of block-to-block transition masses."""

    s: np.ndarray

    @property
    def stationary(self):
        """``(alpha1, alpha2)``, the stationary vector of ``s``."""
        a = self.s[0, 1]
        b = self.s[1, 0]
        return np.array([b, a]) / (a + b)


@dataclass(frozen=True)
class IrreducibilityCertificate:
    irreducible: bool
    n_components: int
    labels: np.ndarray = field(repr=False)

    def __bool__(self):
        return self.irreducible


def _as_matrix(p):
    if isinstance(p, StochasticMatrix):
        return p.matrix
    return _to_csr(p)


def _as_pi(pi):
    if isinstance(pi, StationaryDistribution):
        return pi.pi
    return np.asarray(pi, dtype=float)


def _split_m(split):
    return split.m if isinstance(split, BlockPartition) else int(split)


def blocks(p, split):
    """``(P11, P12, P21, P22)`` as CSR matrices."""
    a = _as_matrix(p)
    m = _split_m(split)
    return (
        a[:m, :m].tocsr(),
        a[:m, m:].tocsr(),
        a[m:, :m].tocsr(),
        a[m:, m:].tocsr(),
    )


def build_from_graph(adjacency, mode="row", binarize=None):
    r"""Random walk on a graph.

    Parameters
    ----------
    adjacency : sparse matrix or array_like, shape (n, n)
        Nonnegative (weighted) adjacency matrix.
    mode : {"row", "symmetric"}
        ``"row"`` returns the transition matrix :math:`D^{-1} A`;
        ``"symmetric"`` returns :class:`SymmetricWalk` holding
        :math:`D^{-1/2} A D^{-1/2}` and requires a symmetric input.
    binarize : bool, optional
        Replace every stored nonzero weight by one. Defaults to ``False``
        in row mode and ``True`` in symmetric mode.

    Returns
    -------
    StochasticMatrix or SymmetricWalk
    """
    if mode not in ("row", "symmetric"):
        raise InvalidInputError(f"unknown normalization mode {mode!r}")
    a = _to_csr(adjacency)
    if a.shape[0] != a.shape[1]:
        raise InvalidInputError(f"adjacency must be square, got {a.shape}")
    if a.nnz and a.data.min() < 0:
        raise InvalidInputError("adjacency weights must be nonnegative")
    if binarize is None:
        binarize = mode == "symmetric"
    if binarize:
        a.data = np.ones_like(a.data)
    deg = np.asarray(a.sum(axis=1)).ravel()
    if np.any(deg <= 0):
        i = int(np.flatnonzero(deg <= 0)[0])
        raise InvalidInputError(f"vertex {i} has no outgoing edges")
    if mode == "row":
        return StochasticMatrix(sp.diags(1.0 / deg) @ a)
    asym = a - a.T
    if asym.nnz and abs(asym).max() > 1e-12 * abs(a).max():
        raise InvalidInputError("symmetric normalization requires a symmetric adjacency")
    s = sp.diags(deg ** -0.5) @ a @ sp.diags(deg ** -0.5)
    s = s.tocsr()
    s.sort_indices()
    return SymmetricWalk(s, deg)


def check_irreducible(p):
    """Strong connectivity of the sparsity digraph.

    Returns
    -------
    IrreducibilityCertificate
        Truthy iff the chain is irreducible; ``n_components`` counts the
        strongly connected components.
    """
    a = _as_matrix(p)
    ncomp, labels = csgraph.connected_components(a, directed=True, connection="strong")
    return IrreducibilityCertificate(ncomp == 1, int(ncomp), labels)


def largest_component(adjacency, directed=True):
    """Restrict a graph to its largest strongly (or weakly) connected component.

    Returns
    -------
    sub : csr_matrix
        The adjacency matrix restricted to the component.
    index : ndarray
        Original indices of the retained vertices.
    """
    a = _to_csr(adjacency)
    conn = "strong" if directed else "weak"
    _, labels = csgraph.connected_components(a, directed=True, connection=conn)
    big = np.argmax(np.bincount(labels))
    index = np.flatnonzero(labels == big)
    return a[index][:, index].tocsr(), index


def _residual(pi, a):
    return float(np.abs(a.T @ pi - pi).sum())


def _stationary_direct(a):
    n = a.shape[0]
    # (I - P^T) pi = 0 with the last equation replaced by sum(pi) = 1
    m = (sp.identity(n, format="csr") - a.T).tocsr()
    top = m[: n - 1]
    sys = sp.vstack([top, sp.csr_matrix(np.ones((1, n)))]).tocsc()
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    lu = auto_lu(sys)
    pi = lu.solve(rhs)
    for _ in range(2):
        # iterative refinement against the same factors
        r = rhs - sys @ pi
        pi = pi + lu.solve(r)
    return pi


def _stationary_power(a, tol, maxiter):
    n = a.shape[0]
    at = a.T.tocsr()
    pi = np.full(n, 1.0 / n)
    res = np.inf
    for it in range(maxiter):
        # lazy chain (I + P)/2 has the same stationary vector and no period
        new = 0.5 * (pi + at @ pi)
        new /= new.sum()
        if it % 10 == 0:
            res = _residual(new, a)
            if res <= tol:
                return new
        pi = new
    raise ConvergenceError(
        f"power iteration did not converge in {maxiter} steps", residual=res, iterations=maxiter
    )


def stationary(p, method="auto", tol=1e-10, maxiter=100_000):
    r"""Stationary distribution of an irreducible chain.

    Parameters
    ----------
    p : StochasticMatrix or matrix
    method : {"auto", "direct", "power"}
        ``"direct"`` solves the bordered null-space system with sparse LU;
        ``"power"`` iterates the lazy chain ``(I + P) / 2``. ``"auto"`` uses
        the direct solve up to 50,000 states.
    tol : float
        Bound on ``||pi^T P - pi^T||_1`` for the returned vector.

    Returns
    -------
    StationaryDistribution

    Raises
    ------
    ConvergenceError
        If the residual bound is not met; carries the residual.
    ReducibleChainError
        If the solve produces non-positive components.
    """
    a = _as_matrix(p)
    n = a.shape[0]
    if n == 1:
        return StationaryDistribution(np.ones(1), 0.0)
    if method == "auto":
        method = "direct" if n <= DIRECT_STATIONARY_MAX else "power"
    if method == "direct":
        try:
            pi = _stationary_direct(a)
        except SingularMatrixError as exc:
            raise ReducibleChainError(f"stationary solve is singular: {exc}") from exc
    elif method == "power":
        pi = _stationary_power(a, tol, maxiter)
    else:
        raise InvalidInputError(f"unknown stationary method {method!r}")
    if not np.all(np.isfinite(pi)) or pi.min() <= 0:
        cert = check_irreducible(a)
        raise ReducibleChainError(
            f"stationary vector is not positive (chain has {cert.n_components} components)",
            n_components=cert.n_components,
        )
    pi = pi / pi.sum()
    res = _residual(pi, a)
    if res > tol:
        raise ConvergenceError(
            f"stationary residual {res:.2e} exceeds tol {tol:.1e}", residual=res
        )
    return StationaryDistribution(pi, res)


def _complement(a11, a12, a21, lu22, drop_tol=0.0, chunk=512):
    """``a11 + a12 (I - a22)^{-1} a21`` given the LU of ``I - a22``.

    Only the nonzero columns of ``a21`` and nonzero rows of ``a12`` are
    touched; right-hand sides are processed in chunks.
    """
    m = a11.shape[0]
    if isinstance(lu22, DenseLU):
        out = a11.toarray() + a12.toarray() @ lu22.solve(a21.toarray())
        out[out < 0] = 0.0
        if drop_tol > 0:
            out[out <= drop_tol] = 0.0
        out /= out.sum(axis=1, keepdims=True)
        return sp.csr_matrix(out)
    a21c = a21.tocsc()
    cols = np.flatnonzero(np.diff(a21c.indptr))
    rows_used = np.flatnonzero(np.diff(a12.indptr))
    a12r = a12[rows_used]
    pieces_r, pieces_c, pieces_v = [], [], []
    for start in range(0, cols.size, chunk):
        cc = cols[start:start + chunk]
        x = lu22.solve(a21c[:, cc].toarray())
        y = np.asarray(a12r @ x)
        r, c = np.nonzero(y)
        pieces_r.append(rows_used[r])
        pieces_c.append(cc[c])
        pieces_v.append(y[r, c])
    if pieces_v:
        upd = sp.csr_matrix(
            (np.concatenate(pieces_v), (np.concatenate(pieces_r), np.concatenate(pieces_c))),
            shape=(m, m),
        )
        out = (a11 + upd).tocsr()
    else:
        out = a11.copy()
    # rounding can leave tiny negatives in an exactly nonnegative product
    out.data[out.data < 0] = 0.0
    if drop_tol > 0:
        out.data[out.data <= drop_tol] = 0.0
    out.eliminate_zeros()
    rows = np.asarray(out.sum(axis=1)).ravel()
    out = (sp.diags(1.0 / rows) @ out).tocsr()
    out.sort_indices()
    return out


@dataclass
class _SplitFactors:
    """Blocks of a split and LU factors of ``I - P11`` and ``I - P22``."""

    p11: sp.csr_matrix
    p12: sp.csr_matrix
    p21: sp.csr_matrix
    p22: sp.csr_matrix
    lu11: object
    lu22: object

    @classmethod
    def build(cls, a, m):
        p11, p12, p21, p22 = blocks(a, m)
        try:
            lu11 = auto_lu(sp.identity(m, format="csc") - p11)
            lu22 = auto_lu(sp.identity(a.shape[0] - m, format="csc") - p22)
        except SingularMatrixError as exc:
            raise ReducibleChainError(
                f"I - P_ii is singular for split m={m}; the chain is reducible "
                f"or numerically decoupled ({exc})"
            ) from exc
        return cls(p11, p12, p21, p22, lu11, lu22)

    def complements(self, drop_tol=0.0):
        p1 = _complement(self.p11, self.p12, self.p21, self.lu22, drop_tol)
        p2 = _complement(self.p22, self.p21, self.p12, self.lu11, drop_tol)
        return p1, p2


def stochastic_complements(p, split, pi=None, drop_tol=0.0, validate=False):
    """Censored chains ``P1`` and ``P2`` of a two-block split.

    Parameters
    ----------
    p : StochasticMatrix
        Irreducible chain.
    split : BlockPartition or int
        Size ``m`` of the leading block.
    pi : StationaryDistribution or ndarray, optional
        Stationary vector of ``p``; computed when omitted.
    drop_tol : float
        Entries of the complements at or below this value are dropped
        (default: keep everything, i.e. exact complements).
    validate : bool
        Re-check irreducibility of both complements.

    Returns
    -------
    CensoredPair
        With ``theta``/``gamma`` unset.
    """
    a = _as_matrix(p)
    m = _split_m(split)
    BlockPartition(m, a.shape[0])
    if pi is None:
        pi = stationary(p)
    pi = _as_pi(pi)
    f = _SplitFactors.build(a, m)
    p1, p2 = f.complements(drop_tol)
    p1 = StochasticMatrix._trusted(p1)
    p2 = StochasticMatrix._trusted(p2)
    if validate:
        for name, q in (("P1", p1), ("P2", p2)):
            cert = check_irreducible(q)
            if not cert:
                raise ReducibleChainError(
                    f"{name} is reducible ({cert.n_components} components)", cert.n_components
                )
    a1, a2 = pi[:m].sum(), pi[m:].sum()
    return CensoredPair(p1, p2, pi[:m] / a1, pi[m:] / a2, float(a1), float(a2))


def aggregated(p, split, pihat1, pihat2):
    r"""The 2x2 aggregated matrix of a split.

    .. math::

        S = \begin{bmatrix}
        \hat\pi_1^T P_{11} 1 & \hat\pi_1^T P_{12} 1 \\
        \hat\pi_2^T P_{21} 1 & \hat\pi_2^T P_{22} 1
        \end{bmatrix}

    Its stationary vector is ``(alpha1, alpha2)``, the block masses of the
    stationary vector of ``p``.
    """
    p11, p12, p21, p22 = blocks(p, split)
    h1 = np.asarray(pihat1, dtype=float)
    h2 = np.asarray(pihat2, dtype=float)
    s = np.array(
        [
            [h1 @ np.asarray(p11.sum(axis=1)).ravel(), h1 @ np.asarray(p12.sum(axis=1)).ravel()],
            [h2 @ np.asarray(p21.sum(axis=1)).ravel(), h2 @ np.asarray(p22.sum(axis=1)).ravel()],
        ]
    )
    s = s / s.sum(axis=1, keepdims=True)
    return AggregatedMatrix(s)
