r"""Randomized estimation of Kemeny's constant with Hutch++.

For a reversible chain (a random walk on an undirected graph) with
stationary vector ``pi``, ``S = Pi^{1/2} P Pi^{-1/2}`` is symmetric and

.. math::

    B = I - S + w w^T, \qquad w = \sqrt{\pi},

is symmetric positive definite and similar to ``I - P + 1 pi^T``. Hence
``tr(B^{-1}) = kappa(P) + 1`` and Hutch++ applied to ``B^{-1}`` (a PSD
operator) estimates Kemeny's constant. Each query ``B^{-1} x`` is a
preconditioned CG solve; the preconditioner is an incomplete Cholesky
factor of ``I - S`` updated by the rank-one term.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
import math
import time

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .direct import KemenyResult
from .exceptions import ConvergenceError, InvalidInputError, SingularMatrixError
from .linalg import cg, ic0
from .markov import SymmetricWalk, _as_matrix, stationary

__all__ = [
    "HutchConfig",
    "SymmetricFrame",
    "sample_count",
    "hutchpp",
    "resolvent_oracle",
    "kemeny_hutchpp",
    "is_reversible",
]

_SHIFTS = (0.0, 1e-10, 1e-8, 1e-6, 1e-4, 1e-2)
_MIN_PIVOT = 1e-6


def sample_count(delta, epsilon):
    r"""Number of matrix-vector queries for a ``(1 +- epsilon)`` estimate.

    ``l = max(3, ceil(sqrt(log(1/delta)) / epsilon + log(1/delta) / 2))``,
    which gives 13 for ``(1/4, 0.1)`` and 25 for ``(1/4, 0.05)``.
    """
    if not 0.0 < delta < 1.0:
        raise InvalidInputError("delta must lie in (0, 1)")
    if not 0.0 < epsilon <= 1.0:
        raise InvalidInputError("epsilon must lie in (0, 1]")
    ld = math.log(1.0 / delta)
    return max(3, math.ceil(math.sqrt(ld) / epsilon + 0.5 * ld))


@dataclass(frozen=True)
class HutchConfig:
    """Options of :func:`kemeny_hutchpp`.

    Attributes
    ----------
    delta, epsilon : float
        Failure probability and relative accuracy; they fix ``l`` unless
        ``l`` is given.
    l : int, optional
        Explicit query count, at least 3. ``l // 3`` queries build the
        sketch, as many project it, the rest are Hutchinson probes
        (13 = 4 + 4 + 5).
    rng_seed : int
        Root seed; every probe draws from its own spawned stream.
    inner_tol : float
        Relative residual of each CG solve (``1e-2`` is a cheaper option).
    workers : int
        Threads for independent probe solves; results do not depend on it.
    """

    delta: float = 0.25
    epsilon: float = 0.1
    l: int = None
    rng_seed: int = 0
    inner_tol: float = 1e-3
    workers: int = 1

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise InvalidInputError("delta must lie in (0, 1)")
        if not 0.0 < self.epsilon < 1.0:
            raise InvalidInputError("epsilon must lie in (0, 1)")
        if self.l is not None and (int(self.l) != self.l or self.l < 3):
            raise InvalidInputError("l must be an integer >= 3")
        if not 0.0 < self.inner_tol < 1.0:
            raise InvalidInputError("inner_tol must lie in (0, 1)")

    @property
    def samples(self):
        return int(self.l) if self.l is not None else sample_count(self.delta, self.epsilon)


def _rademacher(seq, n):
    return np.random.default_rng(seq).integers(0, 2, size=n).astype(float) * 2.0 - 1.0


def _apply(matvec, cols, workers, infos):
    if workers > 1 and len(cols) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            out = list(pool.map(matvec, cols))
    else:
        out = [matvec(c) for c in cols]
    if out and isinstance(out[0], tuple):
        infos.extend(o[1] for o in out)
        out = [o[0] for o in out]
    return np.column_stack(out)


def hutchpp(matvec, n, l, seed=0, workers=1, return_info=False):
    r"""Hutch++ trace estimate of a symmetric PSD operator.

    Parameters
    ----------
    matvec : callable
        ``x -> A x``, or ``x -> (A x, info)`` to collect per-query info.
    n : int
    l : int
        Total number of queries (at least 3).
    seed : int or numpy.random.SeedSequence
        Probe ``i`` uses the ``i``-th child of ``SeedSequence(seed)``.
    workers : int
        Threads for the queries of one stage; the reduction order is fixed.
    return_info : bool
        Also return the per-query infos in query order.

    Returns
    -------
    float or (float, list)
        ``tr(Q^T A Q) + tr(G^T (I-QQ^T) A (I-QQ^T) G) / m`` with ``Q`` an
        orthonormal basis of ``A S``.
    """
    if l < 3:
        raise InvalidInputError("Hutch++ needs at least 3 queries")
    k = l // 3
    m = l - 2 * k
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    streams = root.spawn(l)
    infos = []
    sketch = np.column_stack([_rademacher(s, n) for s in streams[:k]])
    a_s = _apply(matvec, list(sketch.T), workers, infos)
    q, _ = np.linalg.qr(a_s)
    a_q = _apply(matvec, list(q.T), workers, infos)
    g = np.column_stack([_rademacher(s, n) for s in streams[2 * k:]])
    g -= q @ (q.T @ g)
    a_g = _apply(matvec, list(g.T), workers, infos)
    a_g -= q @ (q.T @ a_g)
    est = float(np.trace(q.T @ a_q) + np.sum(g * a_g) / m)
    return (est, infos) if return_info else est


def is_reversible(p, pi=None, tol=1e-10):
    """Whether ``diag(pi) P`` is symmetric (detailed balance)."""
    a = _as_matrix(p)
    pi = stationary(a).pi if pi is None else np.asarray(pi, dtype=float)
    f = sp.diags(pi) @ a
    diff = f - f.T
    return not diff.nnz or abs(diff).max() <= tol * abs(f).max()


class SymmetricFrame:
    r"""Reusable solver for ``B y = x`` with ``B = I - S + w w^T``.

    Parameters
    ----------
    p : SymmetricWalk or StochasticMatrix
        A reversible chain.

    Attributes
    ----------
    s : csr_matrix
        The symmetric similarity transform of ``P``.
    w : ndarray
        ``sqrt(pi)``.
    shift : float
        Diagonal shift needed for the incomplete factorization (usually 0).
    """

    def __init__(self, p, reversible_tol=1e-10):
        if isinstance(p, SymmetricWalk):
            s = p.matrix
            pi = p.stationary
        else:
            a = _as_matrix(p)
            pi = stationary(a).pi
            if not is_reversible(a, pi, reversible_tol):
                raise InvalidInputError(
                    "Hutch++ needs a reversible chain (random walk on an undirected graph); "
                    "use kemeny_dnc for this input"
                )
            r = np.sqrt(pi)
            s = sp.diags(r) @ a @ sp.diags(1.0 / r)
        s = ((s + s.T) * 0.5).tocsr()
        self.n = s.shape[0]
        self.s = s
        self.pi = pi
        # unit 2-norm since pi sums to one
        self.w = np.sqrt(pi)
        self._precond()

    def _precond(self):
        n = self.n
        base = (sp.identity(n, format="csr") - self.s).tocsr()
        err = None
        for shift in _SHIFTS:
            try:
                fac = ic0(base + shift * sp.identity(n, format="csr"))
            except SingularMatrixError as exc:
                err = exc
                continue
            # I - S is singular; a near-exact factor has a tiny last pivot
            # that wrecks the rank-one update in floating point
            piv = fac.lower.diagonal() ** 2
            if piv.min() >= _MIN_PIVOT * piv.max():
                break
            err = SingularMatrixError(f"pivot ratio {piv.min() / piv.max():.1e}")
        else:
            raise SingularMatrixError(f"incomplete Cholesky failed for every shift: {err}")
        self.shift = shift
        lower = fac.lower.tocsr()
        upper = fac.upper.tocsr()
        c = spla.spsolve_triangular(lower, self.w, lower=True)
        beta = 1.0 / (1.0 + c @ c)

        # M^{-1} = L^{-T} (I - beta c c^T) L^{-1}, the inverse of L L^T + w w^T
        def apply(r):
            t = spla.spsolve_triangular(lower, r, lower=True)
            t -= beta * (c @ t) * c
            return spla.spsolve_triangular(upper, t, lower=False)

        self._m = apply

    def matvec(self, x):
        """``B x``."""
        return x - self.s @ x + self.w * (self.w @ x)

    def solve(self, x, tol=1e-3):
        """CG solve of ``B y = x``; returns ``(y, SolveInfo)``."""
        return cg(self.matvec, x, self._m, tol=tol, maxiter=10 * self.n + 100)


def resolvent_oracle(p, x, h=None, inner_tol=1e-3, max_refine=5):
    r"""Solve ``(I - P + 1 h^T) y = x`` for a reversible chain.

    With ``Pi = diag(pi)``, ``I - P + 1 pi^T = Pi^{-1/2} B Pi^{1/2}``; the
    general ``h`` follows from the rank-one identity
    ``y = y0 - 1 (h - pi)^T y0`` with ``y0`` the ``h = pi`` solution.
    Iterative refinement enforces
    ``||(I - P + 1 h^T) y - x|| <= inner_tol ||x||``.

    Parameters
    ----------
    p : SymmetricFrame, SymmetricWalk or StochasticMatrix
    x : (n,) ndarray
    h : (n,) ndarray, optional
        Any vector with ``h^T 1 = 1``; defaults to ``1/n``.

    Raises
    ------
    ConvergenceError
        When CG or the refinement fails; carries the residual.
    """
    frame = p if isinstance(p, SymmetricFrame) else SymmetricFrame(p)
    n = frame.n
    x = np.asarray(x, dtype=float)
    h = np.full(n, 1.0 / n) if h is None else np.asarray(h, dtype=float)
    if abs(h.sum() - 1.0) > 1e-12:
        raise InvalidInputError("h must sum to one")
    dh = h - frame.pi
    sq = frame.w

    def op(y):
        return y - (frame.s @ (sq * y)) / sq + h @ y

    xnorm = np.linalg.norm(x)
    if xnorm == 0.0:
        return np.zeros(n)
    y = np.zeros(n)
    tol = inner_tol
    for _ in range(max_refine):
        r = x - op(y)
        res = np.linalg.norm(r) / xnorm
        if res <= inner_tol:
            return y
        y0, _ = frame.solve(sq * r, tol)
        y0 /= sq
        y = y + y0 - dh @ y0
        # the diagonal scaling can amplify the residual; tighten on retries
        tol *= 0.1
    r = x - op(y)
    res = np.linalg.norm(r) / xnorm
    if res <= inner_tol:
        return y
    raise ConvergenceError(
        f"resolvent oracle residual {res:.2e} exceeds {inner_tol:.1e}", residual=res, x=y
    )


def kemeny_hutchpp(p, cfg=None):
    """Hutch++ estimate of Kemeny's constant of a reversible chain.

    Parameters
    ----------
    p : SymmetricWalk or StochasticMatrix
        Non-reversible chains are refused.
    cfg : HutchConfig, optional

    Returns
    -------
    KemenyResult
        ``diagnostics`` holds ``l``, the sketch/probe split, ``seed``, the
        per-query CG residuals and iteration counts, and the
        preconditioner shift.
    """
    t0 = time.perf_counter()
    cfg = HutchConfig() if cfg is None else cfg
    frame = p if isinstance(p, SymmetricFrame) else SymmetricFrame(p)
    l = cfg.samples
    est, infos = hutchpp(
        lambda x: frame.solve(x, cfg.inner_tol), frame.n, l, cfg.rng_seed, cfg.workers,
        return_info=True,
    )
    k = l // 3
    return KemenyResult(
        est - 1.0, "hutchpp", frame.n,
        {"l": l, "split": [k, k, l - 2 * k], "seed": cfg.rng_seed, "inner_tol": cfg.inner_tol,
         "residuals": [float(i.residual) for i in infos],
         "cg_iterations": [int(i.iterations) for i in infos], "shift": frame.shift,
         "elapsed": time.perf_counter() - t0},
    )
