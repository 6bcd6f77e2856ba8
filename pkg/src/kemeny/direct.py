r"""Reference computations of Kemeny's constant.

For vectors ``g, h`` with ``h^T g = 1``, ``h^T 1 != 0`` and ``pi^T g != 0``
the matrix ``I - P + g h^T`` is non-singular and, with ``Z`` its inverse,

.. math::

    \kappa(P) = \operatorname{tr}(Z) - \pi^T Z 1,

which reduces to ``tr(Z) - 1`` for ``g = 1``. Equivalently
``kappa = sum_{i>=2} 1 / (1 - lambda_i)`` over the non-unit eigenvalues.
"""

from dataclasses import dataclass, field
import time

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .exceptions import InvalidInputError, KemenyError, ReducibleChainError, SingularMatrixError
from .markov import StochasticMatrix, _as_matrix, _as_pi, check_irreducible, stationary

__all__ = [
    "KemenyResult",
    "kemeny_direct",
    "kemeny_eig",
    "kemeny_product_identity_check",
    "N_DENSE",
]

#: largest size for which dense O(n^3) methods are attempted
N_DENSE = 4096
# extended-precision trace refinement runs only for sparse P (the long
# double products have no BLAS) and when nnz(P) * n stays below this
_REFINE_WORK = 1e8
_REFINE_DENSITY = 0.05


@dataclass
class KemenyResult:
    """Kemeny's constant together with how it was obtained.

    Attributes
    ----------
    kappa : float
    method : str
        One of ``direct``, ``eig``, ``dnc``, ``hutchpp``, ``closed-form``.
    n : int
        Number of states.
    diagnostics : dict
        Method specific: residuals, recursion depth, sample count, timings.
    """

    kappa: float
    method: str
    n: int
    diagnostics: dict = field(default_factory=dict)

    def __float__(self):
        return float(self.kappa)


def _refined_trace(a, z, g, h):
    r"""``tr(M^{-1})`` from a computed inverse ``z`` of ``M = I - A + g h^T``.

    ``tr(M^{-1}) ~ tr(Z) + tr(Z R)`` with ``R = I - M Z`` evaluated in
    extended precision; the sparse product ``A Z`` keeps it O(nnz n).
    Returns the corrected trace and ``Z 1`` corrected the same way.
    """
    ld = np.longdouble
    n = z.shape[0]
    zl = z.astype(ld)
    al = sp.csr_matrix(a, dtype=ld)
    mz = zl - al @ zl + np.outer(g.astype(ld), h.astype(ld) @ zl)
    r = -mz
    r[np.diag_indices(n)] += 1
    tr = np.trace(zl) + np.sum(zl * r.T)
    z1 = zl.sum(axis=1) + zl @ r.sum(axis=1)
    return tr, z1


def kemeny_direct(p, h=None, g=None, pi=None, n_dense=N_DENSE, refine=None):
    r"""Kemeny's constant from the trace of the deflated resolvent.

    Parameters
    ----------
    p : StochasticMatrix or matrix
    h : (n,) ndarray, optional
        Defaults to ``1/n``.
    g : (n,) ndarray, optional
        Defaults to the all-ones vector, giving ``kappa = tr(Z) - 1``.
    pi : StationaryDistribution or ndarray, optional
        Needed only for ``g != 1``; computed when omitted.
    n_dense : int
        Refuse inputs larger than this.
    refine : bool, optional
        Correct the trace with an extended-precision residual. By default
        enabled for sparse ``P`` when ``nnz(P) * n`` is moderate.

    Returns
    -------
    KemenyResult
    """
    t0 = time.perf_counter()
    a = _as_matrix(p)
    n = a.shape[0]
    if n > n_dense:
        raise InvalidInputError(
            f"n={n} exceeds the dense limit {n_dense}; use kemeny_dnc or kemeny_hutchpp"
        )
    ones = np.ones(n)
    h = ones / n if h is None else np.asarray(h, dtype=float)
    unit_g = g is None
    g = ones if unit_g else np.asarray(g, dtype=float)
    scale = np.abs(h).sum() * np.abs(g).max()
    if abs(h @ g - 1.0) > 1e-12 * max(1.0, scale):
        raise InvalidInputError(f"h^T g = {h @ g!r}, must equal 1")
    if abs(h.sum()) <= 1e-14 * np.abs(h).sum():
        raise InvalidInputError("h^T 1 must be nonzero")
    if not unit_g:
        pi = _as_pi(stationary(p) if pi is None else pi)
        if abs(pi @ g) <= 1e-14 * np.abs(g).max():
            raise InvalidInputError("pi^T g must be nonzero")

    m = np.eye(n) - a.toarray() + np.outer(g, h)
    try:
        z = sla.inv(m, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SingularMatrixError(f"I - P + g h^T is singular: {exc}") from exc

    if refine is None:
        refine = a.nnz <= max(_REFINE_DENSITY * n * n, 4 * n) and a.nnz * n <= _REFINE_WORK
    if refine:
        tr, z1 = _refined_trace(a, z, g, h)
    else:
        tr, z1 = np.trace(z), z.sum(axis=1)
    corr = 1.0 if unit_g else pi @ z1
    kappa = float(tr - corr)
    resid = float(np.abs(np.eye(n) - m @ z).max()) if n <= 1024 else float("nan")
    return KemenyResult(
        kappa,
        "direct",
        n,
        {"inverse_residual": resid, "refined": bool(refine), "elapsed": time.perf_counter() - t0},
    )


def kemeny_eig(p, imag_tol=1e-8, n_dense=N_DENSE):
    r"""Kemeny's constant as ``sum_{i>=2} 1 / (1 - lambda_i)``.

    The eigenvalue closest to one is removed; the sum is formed in complex
    arithmetic and its imaginary part (which cancels over conjugate pairs)
    must stay below ``imag_tol * max(1, |kappa|)``.
    """
    t0 = time.perf_counter()
    a = _as_matrix(p)
    n = a.shape[0]
    if n > n_dense:
        raise InvalidInputError(f"n={n} exceeds the dense limit {n_dense}")
    if n == 1:
        return KemenyResult(0.0, "eig", 1, {"imag": 0.0})
    try:
        lam = sla.eigvals(a.toarray())
    except sla.LinAlgError as exc:
        raise KemenyError(f"eigensolver failed: {exc}") from exc
    lam = np.delete(lam, np.argmin(np.abs(lam - 1.0)))
    gaps = 1.0 - lam
    if np.min(np.abs(gaps)) < 1e-13:
        raise ReducibleChainError("eigenvalue 1 is not simple; chain is reducible")
    total = np.sum(1.0 / gaps)
    if abs(total.imag) > imag_tol * max(1.0, abs(total.real)):
        raise KemenyError(f"imaginary residue {total.imag:.2e} in eigenvalue sum")
    return KemenyResult(
        float(total.real), "eig", n,
        {"imag": float(abs(total.imag)), "elapsed": time.perf_counter() - t0},
    )


def kemeny_product_identity_check(a, b):
    """Kemeny's constants of ``A B`` and ``B A``.

    For ``A`` (m x n) and ``B`` (n x m) row-stochastic, ``A B`` and ``B A``
    share their nonzero eigenvalues, so ``kappa(BA) = kappa(AB) + n - m``
    (equality when square).

    Returns
    -------
    (float, float)
        ``(kappa(AB), kappa(BA))``.
    """
    a = np.atleast_2d(np.asarray(a.toarray() if sp.issparse(a) else a, dtype=float))
    b = np.atleast_2d(np.asarray(b.toarray() if sp.issparse(b) else b, dtype=float))
    if a.shape[::-1] != b.shape:
        raise InvalidInputError(f"incompatible shapes {a.shape} and {b.shape}")
    for name, x in (("A", a), ("B", b)):
        if x.min() < 0 or np.abs(x.sum(axis=1) - 1).max() > 1e-10:
            raise InvalidInputError(f"{name} is not row-stochastic")
    ab = StochasticMatrix(a @ b)
    ba = StochasticMatrix(b @ a)
    for name, q in (("AB", ab), ("BA", ba)):
        cert = check_irreducible(q)
        if not cert:
            raise ReducibleChainError(f"{name} is reducible", cert.n_components)
    return kemeny_direct(ab).kappa, kemeny_direct(ba).kappa
