r"""Sparse linear-algebra kernels.

Direct LU (SuperLU through :mod:`scipy.sparse.linalg`), level-0 incomplete
LU and Cholesky factorizations, Krylov solvers and a separator-based
nested-dissection ordering. All systems met by the Kemeny algorithms are
(deflations of) non-singular M-matrices, for which incomplete factorizations
without pivoting exist.
"""

from dataclasses import dataclass, field
import math
import warnings

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse import csgraph

from .exceptions import ConvergenceError, InvalidInputError, SingularMatrixError

__all__ = [
    "SparseFactorization",
    "SolveInfo",
    "Ordering",
    "sparse_lu",
    "DenseLU",
    "auto_lu",
    "ilu0",
    "ic0",
    "cg",
    "gmres",
    "bicgstab",
    "bisect",
    "edge_cut",
    "nested_dissection",
]


@dataclass(frozen=True)
class SparseFactorization:
    """Exact or incomplete triangular factorization ``A ~ L U``.

    For ``kind == "LU"`` the factors satisfy ``Pr A Pc = L U`` with the
    permutations ``perm_r``/``perm_c`` chosen by SuperLU. For ``"ILU0"`` the
    factors have the sparsity of the strict lower / upper part of ``A``
    (``L`` unit lower triangular). For ``"IC0"``, ``upper`` is ``lower.T``.
    """

    kind: str
    lower: sp.csr_matrix
    upper: sp.csr_matrix
    perm_r: np.ndarray = None
    perm_c: np.ndarray = None
    _lu: object = field(default=None, repr=False, compare=False)

    @property
    def shape(self):
        return self.lower.shape

    def solve(self, b):
        """Apply ``(L U)^{-1}`` to a vector or to the columns of a matrix."""
        b = np.asarray(b, dtype=float)
        if self._lu is not None:
            return self._lu.solve(b)
        unit = self.kind == "ILU0"
        y = spla.spsolve_triangular(self.lower, b, lower=True, unit_diagonal=unit)
        return spla.spsolve_triangular(self.upper, y, lower=False)

    def aslinearoperator(self):
        n = self.shape[0]
        return spla.LinearOperator((n, n), matvec=self.solve, dtype=float)


@dataclass(frozen=True)
class SolveInfo:
    """Outcome of an iterative solve."""

    iterations: int
    residual: float
    method: str


def _csr(a):
    if sp.issparse(a):
        out = sp.csr_matrix(a, dtype=float, copy=True)
    else:
        out = sp.csr_matrix(np.asarray(a, dtype=float))
    out.sum_duplicates()
    out.sort_indices()
    return out


def sparse_lu(a):
    """Sparse LU factorization with threshold partial pivoting.

    Parameters
    ----------
    a : (n, n) sparse matrix or ndarray
        Non-singular matrix.

    Returns
    -------
    SparseFactorization

    Raises
    ------
    SingularMatrixError
        If SuperLU meets an exactly zero pivot.
    """
    a = sp.csc_matrix(a, dtype=float)
    if a.shape[0] != a.shape[1]:
        raise InvalidInputError(f"LU needs a square matrix, got shape {a.shape}")
    try:
        lu = spla.splu(a)
    except RuntimeError as exc:
        raise SingularMatrixError(f"sparse LU failed: {exc}") from exc
    return SparseFactorization(
        kind="LU",
        lower=lu.L.tocsr(),
        upper=lu.U.tocsr(),
        perm_r=lu.perm_r,
        perm_c=lu.perm_c,
        _lu=lu,
    )



@dataclass(frozen=True)
class DenseLU:
    """LAPACK LU of a small dense matrix, with the ``solve`` interface of
    :class:`SparseFactorization`."""

    lu: np.ndarray
    piv: np.ndarray
    kind: str = "dense"

    @property
    def shape(self):
        return self.lu.shape

    def solve(self, b):
        return sla.lu_solve((self.lu, self.piv), np.asarray(b, dtype=float), check_finite=False)


# dense LU beats SuperLU once a small matrix is this full
_DENSE_FILL = 0.2
_DENSE_MAX = 3000


def auto_lu(a):
    """LU factorization, dense for small and well-filled matrices.

    Raises
    ------
    SingularMatrixError
        On an exactly zero pivot.
    """
    n = a.shape[0]
    if not sp.issparse(a) or (n <= _DENSE_MAX and a.nnz >= _DENSE_FILL * n * n):
        dense = a.toarray() if sp.issparse(a) else np.asarray(a, dtype=float)
        with np.errstate(all="ignore"), warnings.catch_warnings():
            warnings.simplefilter("ignore", sla.LinAlgWarning)
            lu, piv = sla.lu_factor(dense, check_finite=False)
        d = np.abs(np.diagonal(lu))
        if n and (not np.all(np.isfinite(lu)) or d.min() == 0.0):
            raise SingularMatrixError("dense LU met a zero pivot")
        return DenseLU(lu, piv)
    return sparse_lu(a)


def ilu0(a):
    r"""Incomplete LU factorization with zero fill-in.

    The factors keep exactly the sparsity of ``a``: ``L`` (unit diagonal)
    the strict lower part, ``U`` the upper part including the diagonal.
    No pivoting is performed; for a non-singular M-matrix every pivot is
    positive.

    Raises
    ------
    SingularMatrixError
        On a missing, zero or negative pivot.
    """
    a = _csr(a)
    n = a.shape[0]
    if a.shape != (n, n):
        raise InvalidInputError(f"ILU0 needs a square matrix, got shape {a.shape}")
    a.sort_indices()
    indptr, indices = a.indptr, a.indices
    data = a.data.copy()
    rows = np.repeat(np.arange(n), np.diff(indptr))
    on_diag = np.flatnonzero(indices == rows)
    diag = np.full(n, -1)
    diag[rows[on_diag]] = on_diag
    if np.any(diag < 0):
        i = int(np.flatnonzero(diag < 0)[0])
        raise SingularMatrixError(f"ILU0: structurally zero diagonal in row {i}")

    # IKJ variant: row i is scattered into a dense work vector and eliminated
    # against the already factored rows k < i. Updates outside the pattern of
    # row i land in the work vector but are never read back, which is
    # exactly the zero fill-in rule.
    w = np.zeros(n)
    ptr, dg, idx = indptr.tolist(), diag.tolist(), indices.tolist()
    pivots = [0.0] * n
    for i in range(n):
        start, end, di = ptr[i], ptr[i + 1], dg[i]
        cols = indices[start:end]
        w[cols] = data[start:end]
        for p in range(start, di):
            k = idx[p]
            lik = w[k] / pivots[k]
            w[k] = lik
            lo, hi = dg[k] + 1, ptr[k + 1]
            if hi > lo:
                w[indices[lo:hi]] -= lik * data[lo:hi]
        data[start:end] = w[cols]
        w[:] = 0.0
        piv = pivots[i] = float(data[di])
        if not piv > 0.0 or not math.isfinite(piv):
            raise SingularMatrixError(f"ILU0 breakdown: pivot {piv:.3e} in row {i}")

    lu = sp.csr_matrix((data, a.indices.copy(), a.indptr.copy()), shape=(n, n))
    return SparseFactorization(
        kind="ILU0",
        lower=sp.tril(lu, k=-1, format="csr") + sp.identity(n, format="csr"),
        upper=sp.triu(lu, format="csr"),
    )


def ic0(a):
    """Incomplete Cholesky factorization with zero fill-in.

    Computed as the ILU0 factorization ``L D L^T`` of the symmetric input,
    returned as ``(L D^{1/2}) (L D^{1/2})^T``.

    Raises
    ------
    InvalidInputError
        If ``a`` is not symmetric.
    SingularMatrixError
        On a non-positive pivot.
    """
    a = _csr(a)
    diff = a - a.T
    if diff.nnz and abs(diff).max() > 1e-12 * max(1.0, abs(a).max()):
        raise InvalidInputError("IC0 needs a symmetric matrix")
    f = ilu0(a)
    d = np.sqrt(f.upper.diagonal())
    lower = (f.lower @ sp.diags(d)).tocsr()
    lower.sort_indices()
    upper = lower.T.tocsr()
    upper.sort_indices()
    return SparseFactorization(kind="IC0", lower=lower, upper=upper)


def _as_operator(a):
    if callable(a) and not sp.issparse(a) and not isinstance(a, (np.ndarray, spla.LinearOperator)):
        return a
    op = spla.aslinearoperator(a)
    return op.matvec


def _as_precond(precond):
    if precond is None:
        return None
    if isinstance(precond, SparseFactorization):
        return precond.solve
    if isinstance(precond, spla.LinearOperator):
        return precond.matvec
    return precond


def cg(a, b, precond=None, tol=1e-8, maxiter=None, x0=None):
    """Preconditioned conjugate gradients.

    Parameters
    ----------
    a : matrix, LinearOperator or callable
        Symmetric positive definite operator.
    b : (n,) ndarray
    precond : SparseFactorization, LinearOperator or callable, optional
        Symmetric positive definite approximation of ``a^{-1}``.
    tol : float
        Target relative residual ``||b - a x|| / ||b||``.
    maxiter : int, optional
        Defaults to ``10 n``.

    Returns
    -------
    x : ndarray
    info : SolveInfo

    Raises
    ------
    ConvergenceError
        On breakdown (non-positive curvature) or when ``maxiter`` is
        exhausted; carries the best iterate.
    """
    matvec = _as_operator(a)
    apply_m = _as_precond(precond) or (lambda r: r)
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    maxiter = 10 * n if maxiter is None else maxiter
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n), SolveInfo(0, 0.0, "cg")
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - matvec(x)
    res = np.linalg.norm(r) / bnorm
    best_x, best_res = x.copy(), res
    if res <= tol:
        return x, SolveInfo(0, res, "cg")
    z = apply_m(r)
    p = z.copy()
    rz = r @ z
    for it in range(1, maxiter + 1):
        ap = matvec(p)
        curv = p @ ap
        if not curv > 0.0:
            raise ConvergenceError(
                f"CG breakdown at iteration {it}: p^T A p = {curv:.3e}",
                residual=best_res, iterations=it, x=best_x,
            )
        alpha = rz / curv
        x += alpha * p
        r -= alpha * ap
        res = np.linalg.norm(r) / bnorm
        if res < best_res:
            best_x, best_res = x.copy(), res
        if res <= tol:
            # recurrence drift check against the true residual
            true_res = np.linalg.norm(b - matvec(x)) / bnorm
            if true_res <= tol:
                return x, SolveInfo(it, true_res, "cg")
            r = b - matvec(x)
        z = apply_m(r)
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise ConvergenceError(
        f"CG did not reach tol={tol:.1e} in {maxiter} iterations",
        residual=best_res, iterations=maxiter, x=best_x,
    )


def _scipy_krylov(name, solver, a, b, precond, tol, maxiter, x0, **kwargs):
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    if callable(a) and not sp.issparse(a) and not isinstance(a, spla.LinearOperator):
        op = spla.LinearOperator((n, n), matvec=a, dtype=float)
    else:
        op = spla.aslinearoperator(a)
    apply_m = _as_precond(precond)
    m = None if apply_m is None else spla.LinearOperator((n, n), matvec=apply_m, dtype=float)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n), SolveInfo(0, 0.0, name)
    count = [0]

    def callback(_):
        count[0] += 1

    x = x0
    res = math.inf
    # the inner test may be on a preconditioned residual; retighten until the
    # true residual meets the contract
    inner = tol
    for _ in range(4):
        x, info = solver(op, b, x0=x, rtol=inner, atol=0.0, M=m, maxiter=maxiter,
                         callback=callback, **kwargs)
        res = np.linalg.norm(b - op.matvec(x)) / bnorm
        if res <= tol:
            return x, SolveInfo(count[0], res, name)
        if info > 0 and count[0] >= maxiter * kwargs.get("restart", 1):
            break
        inner *= 0.1
    raise ConvergenceError(
        f"{name} did not reach tol={tol:.1e} (residual {res:.2e})",
        residual=res, iterations=count[0], x=x,
    )


def gmres(a, b, precond=None, tol=1e-8, restart=50, maxiter=1000, x0=None):
    """Restarted GMRES; ``maxiter`` counts inner iterations.

    Returns ``(x, SolveInfo)``; raises :class:`ConvergenceError` with the
    best iterate when the relative residual stays above ``tol``.
    """
    cycles = max(1, math.ceil(maxiter / restart))
    return _scipy_krylov(
        "gmres", spla.gmres, a, b, precond, tol, cycles, x0,
        restart=restart, callback_type="pr_norm",
    )


def bicgstab(a, b, precond=None, tol=1e-8, maxiter=1000, x0=None):
    """BiCGstab. Same return/raise contract as :func:`gmres`."""
    return _scipy_krylov("bicgstab", spla.bicgstab, a, b, precond, tol, maxiter, x0)


# ---------------------------------------------------------------------------
# orderings
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Ordering:
    """A symmetric permutation ``A[perm][:, perm]``.

    ``split`` is the size of the leading diagonal block of the top-level
    bisection and ``separator`` the vertices (original numbering) placed
    last, which couple the two halves.
    """

    perm: np.ndarray
    method: str
    split: int = None
    separator: np.ndarray = None

    @property
    def inverse(self):
        inv = np.empty_like(self.perm)
        inv[self.perm] = np.arange(self.perm.size)
        return inv


def _sym_pattern(pattern):
    s = sp.csr_matrix(pattern, dtype=float, copy=True)
    s.data = np.ones_like(s.data)
    s = ((s + s.T) > 0).astype(float).tocsr()
    s.setdiag(0)
    s.eliminate_zeros()
    return s


def edge_cut(pattern, first):
    """Number of off-diagonal-block entries when ``first`` leads the order.

    Counts nonzeros of the symmetrized pattern coupling ``first`` with its
    complement, i.e. ``nnz(A12) + nnz(A21)`` for a symmetric pattern.
    """
    s = _sym_pattern(pattern)
    side = np.zeros(s.shape[0], dtype=bool)
    side[np.asarray(first, dtype=int)] = True
    coo = s.tocoo()
    return int(np.count_nonzero(side[coo.row] != side[coo.col]))


def _pseudo_peripheral(s, start):
    dist = csgraph.shortest_path(s, indices=start, unweighted=True, directed=False)
    ecc = dist[np.isfinite(dist)].max()
    deg = np.diff(s.indptr)
    node = start
    for _ in range(10):
        far = np.flatnonzero(dist == ecc)
        cand = far[np.argmin(deg[far])]
        d2 = csgraph.shortest_path(s, indices=cand, unweighted=True, directed=False)
        e2 = d2[np.isfinite(d2)].max()
        if e2 <= ecc:
            return cand, d2
        node, dist, ecc = cand, d2, e2
    return node, dist


def _refine(s, side, lo, hi, max_moves):
    """Greedy single-vertex moves with positive cut gain under balance."""
    deg = np.asarray(s.sum(axis=1)).ravel()
    size = int(side.sum())
    for _ in range(max_moves):
        ext_true = s @ side.astype(float)
        ext = np.where(side, deg - ext_true, ext_true)
        gain = 2.0 * ext - deg
        # moving a vertex off the first side shrinks it
        allowed = np.where(side, size - 1 >= lo, size + 1 <= hi)
        gain = np.where(allowed, gain, -np.inf)
        v = int(np.argmax(gain))
        if not gain[v] > 0:
            break
        side[v] = not side[v]
        size += 1 if side[v] else -1
    return side


def bisect(pattern, balance=0.25, refine=True):
    """Split the vertices into two parts with a small edge cut.

    Candidates are the natural halving of the current order and the best
    balanced cut of a BFS level structure rooted at a pseudo-peripheral
    vertex; each is improved by greedy boundary moves and the smallest cut
    wins (ties favour the natural order). Disconnected patterns are split
    along components.

    Returns
    -------
    first, second : ndarray
        Sorted vertex indices; ``first`` becomes the leading block.
    """
    s = _sym_pattern(pattern)
    n = s.shape[0]
    if n < 2:
        return np.arange(n), np.arange(0)
    lo = max(1, math.ceil(balance * n))
    hi = n - lo

    ncomp, labels = csgraph.connected_components(s, directed=False)
    if ncomp > 1:
        sizes = np.bincount(labels)
        side = np.zeros(n, dtype=bool)
        total = 0
        for c in np.argsort(-sizes, kind="stable"):
            if total + sizes[c] <= n // 2 or total == 0:
                side[labels == c] = True
                total += sizes[c]
        first = np.flatnonzero(side)
        if 0 < first.size < n:
            return first, np.flatnonzero(~side)

    candidates = []
    natural = np.zeros(n, dtype=bool)
    natural[: n // 2] = True
    candidates.append(natural)

    deg = np.diff(s.indptr)
    root, dist = _pseudo_peripheral(s, int(np.argmin(deg)))
    dist = np.where(np.isfinite(dist), dist, dist[np.isfinite(dist)].max() + 1)
    levels = dist.astype(int)
    counts = np.cumsum(np.bincount(levels))
    coo = s.tocoo()
    best = None
    for lev in range(counts.size - 1):
        if not lo <= counts[lev] <= hi:
            continue
        side = levels <= lev
        cut = np.count_nonzero(side[coo.row] != side[coo.col])
        if best is None or cut < best[0]:
            best = (cut, side)
    if best is not None:
        candidates.append(best[1])

    scored = []
    for side in candidates:
        side = side.copy()
        if refine:
            side = _refine(s, side, lo, hi, max_moves=max(1, n // 4))
        cut = np.count_nonzero(side[coo.row] != side[coo.col])
        scored.append((cut, side))
    cut, side = min(scored, key=lambda t: t[0])
    return np.flatnonzero(side), np.flatnonzero(~side)


def _separator(s, first, second):
    """Vertices of ``second`` adjacent to ``first``."""
    side = np.zeros(s.shape[0], dtype=bool)
    side[first] = True
    touch = (s @ side.astype(float)) > 0
    mask = np.zeros(s.shape[0], dtype=bool)
    mask[second] = True
    return np.flatnonzero(touch & mask)


def nested_dissection(pattern, min_size=64, bisector=None):
    """Nested-dissection ordering of a (symmetrized) sparsity pattern.

    Each level orders ``[first part, second part minus separator,
    separator]`` and recurses on both parts, so the permuted matrix is
    quasi block diagonal with the coupling confined to the separator rows.

    Parameters
    ----------
    pattern : sparse matrix
    min_size : int
        Parts at or below this size keep their natural order.
    bisector : callable, optional
        ``bisector(pattern) -> (first, second)``; replaces :func:`bisect`
        (e.g. with an external graph partitioner).

    Returns
    -------
    Ordering
        ``split`` is the size of the leading top-level part.
    """
    s = _sym_pattern(pattern)
    n = s.shape[0]
    bisector = bisect if bisector is None else bisector
    if n <= max(1, min_size):
        return Ordering(np.arange(n), "natural", split=None, separator=np.arange(0))

    def split(idx):
        sub = s[idx][:, idx]
        first, second = bisector(sub)
        first = np.asarray(first, dtype=int)
        second = np.asarray(second, dtype=int)
        sep = _separator(sub, first, second)
        rest = np.setdiff1d(second, sep, assume_unique=True)
        return idx[first], idx[rest], idx[sep]

    def order(idx):
        if idx.size <= min_size:
            return [idx]
        a, b, sep = split(idx)
        if a.size == 0 or a.size == idx.size:
            return [idx]
        return order(a) + order(b) + [sep]

    a, b, sep = split(np.arange(n))
    pieces = order(a) + order(b) + [sep]
    perm = np.concatenate(pieces).astype(int)
    return Ordering(perm, "nested-dissection", split=int(a.size), separator=np.sort(sep))
