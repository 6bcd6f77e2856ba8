r"""Divide-and-conquer computation of Kemeny's constant.

For a two-block split of an irreducible chain ``P`` with censored chains
``P1``, ``P2`` and block masses ``alpha1``, ``alpha2``,

.. math::

    \kappa(P) = \kappa(P_1) + \kappa(P_2) + \gamma, \qquad
    \gamma = \alpha_1 \theta - \alpha_2,

where ``theta = pihat2^T (x + y)`` with ``x = (I - P22)^{-1} 1`` and
``y = (I - P22)^{-1} P21 (I - P1 + 1 pihat1^T)^{-1} P12 x``. Recursing on
``P1`` and ``P2`` (whose stationary vectors are the normalized restrictions
``pihat1``, ``pihat2``) down to a dense base case gives :func:`kemeny_dnc`.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import logging
import math
import os
import threading
import time

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .direct import N_DENSE, KemenyResult, kemeny_direct
from .exceptions import (
    ConvergenceError,
    InvalidInputError,
    KemenyError,
    ReducibleChainError,
    SingularMatrixError,
)
from .linalg import auto_lu, bicgstab, bisect, gmres, ilu0
from .markov import (
    BlockPartition,
    _as_matrix,
    _as_pi,
    _complement,
    _split_m,
    _SplitFactors,
    aggregated,
    check_irreducible,
    stationary,
)

__all__ = [
    "DncConfig",
    "DncError",
    "ThetaGamma",
    "theta_via_solves",
    "theta_alternatives",
    "gamma_resolvent",
    "kemeny_dnc",
    "threads_from_env",
]

log = logging.getLogger(__name__)

SPLITS = ("half", "nd")
SOLVERS = ("lu", "gmres", "bicgstab")


def threads_from_env(default=1):
    """Branch parallelism from ``KEMENY_THREADS`` (0 means all CPUs)."""
    raw = os.environ.get("KEMENY_THREADS")
    if raw is None or not raw.strip():
        return default
    try:
        k = int(raw)
    except ValueError:
        raise InvalidInputError(f"KEMENY_THREADS must be an integer, got {raw!r}") from None
    if k < 0:
        raise InvalidInputError("KEMENY_THREADS must be nonnegative")
    return k if k > 0 else (os.cpu_count() or 1)


@dataclass(frozen=True)
class DncConfig:
    """Options of :func:`kemeny_dnc`.

    Attributes
    ----------
    base_size : int
        Chains with fewer states are handled by the dense formula.
    split : {"half", "nd"}
        ``"half"`` splits at ``floor(n/2)``; ``"nd"`` reorders each level by
        a small-cut bisection first.
    solver : {"lu", "gmres", "bicgstab"}
        How the three correction systems are solved. ``"lu"`` reuses the
        factorization of ``I - P22`` built for the complement; the Krylov
        options use ILU(0) preconditioners and fall back to LU on failure.
    tol : float
        Relative residual for the Krylov solves.
    max_depth : int
        Recursion stops (dense base case) at this depth.
    drop_tol : float
        Drop tolerance for complement entries (0 keeps them all).
    validate : bool
        Re-check irreducibility of every complement.
    threads : int
        Upper bound on concurrently evaluated branches (1 = sequential).
        Defaults to ``KEMENY_THREADS``.
    """

    base_size: int = 512
    split: str = "half"
    solver: str = "lu"
    tol: float = 1e-8
    max_depth: int = 64
    drop_tol: float = 0.0
    validate: bool = False
    threads: int = field(default_factory=threads_from_env)
    restart: int = 50
    maxiter: int = 1000

    def __post_init__(self):
        if self.base_size < 2:
            raise InvalidInputError("base_size must be at least 2")
        if not self.tol > 0:
            raise InvalidInputError("tol must be positive")
        if self.split not in SPLITS:
            raise InvalidInputError(f"split must be one of {SPLITS}, got {self.split!r}")
        if self.solver not in SOLVERS:
            raise InvalidInputError(f"solver must be one of {SOLVERS}, got {self.solver!r}")
        if self.max_depth < 0 or self.threads < 0:
            raise InvalidInputError("max_depth and threads must be nonnegative")


@dataclass(frozen=True)
class ThetaGamma:
    """Correction scalars of one split, ``gamma = alpha1 * theta - alpha2``."""

    theta: float
    gamma: float
    expression_used: str
    diagnostics: dict = field(default_factory=dict)


class DncError(KemenyError):
    """Failure inside the recursion; ``path`` locates the offending node."""

    def __init__(self, message, path):
        super().__init__(f"{message} (at {path})")
        self.path = path


def _deflated_lu_solver(p1, pihat1):
    r"""Solver for ``(I - P1 + 1 pihat1^T) y = b`` via sparse LU.

    ``I - P1 + 1 e_k^T`` differs from the deflated matrix by the rank-one
    term ``1 (pihat1 - e_k)^T`` and maps ``1`` to ``1``; Sherman-Morrison
    then reduces to ``y = y0 - 1 (pihat1^T y0 - y0[k])``.
    """
    n = p1.shape[0]
    k = int(np.argmax(pihat1))
    col = sp.csr_matrix((np.ones(n), (np.arange(n), np.full(n, k))), shape=(n, n))
    lu = auto_lu(sp.identity(n, format="csr") - p1 + col)

    def solve(b):
        y0 = lu.solve(b)
        return y0 - (pihat1 @ y0 - y0[k])

    return solve


def _krylov(cfg):
    if cfg.solver == "gmres":
        return lambda a, b, m: gmres(a, b, m, tol=cfg.tol, restart=cfg.restart, maxiter=cfg.maxiter)
    return lambda a, b, m: bicgstab(a, b, m, tol=cfg.tol, maxiter=cfg.maxiter)


def _safe_ilu0(a):
    try:
        return ilu0(a)
    except SingularMatrixError:
        return None


def _theta(f, p1, pihat1, pihat2, cfg):
    """Three-solve evaluation of theta; returns ``(theta, diagnostics)``."""
    m, n2 = f.p11.shape[0], f.p22.shape[0]
    ones2 = np.ones(n2)
    diag = {"solver": cfg.solver, "fallbacks": 0, "residual": 0.0}
    lu_deflated = None

    def deflated_lu(b):
        nonlocal lu_deflated
        if lu_deflated is None:
            lu_deflated = _deflated_lu_solver(p1, pihat1)
        return lu_deflated(b)

    if cfg.solver == "lu":
        x = f.lu22.solve(ones2)
        y = deflated_lu(f.p12 @ x)
        y = f.lu22.solve(f.p21 @ y)
        return float(pihat2 @ (x + y)), diag

    solve = _krylov(cfg)
    a22 = (sp.identity(n2, format="csr") - f.p22).tocsr()
    pre22 = _safe_ilu0(a22)
    # preconditioner for the deflated system: ILU(0) of
    # I - P11 - P12 diag(I - P22)^{-1} P21, a sparse stand-in for I - P1
    approx = sp.identity(m, format="csr") - f.p11 - f.p12 @ sp.diags(1.0 / a22.diagonal()) @ f.p21
    pre1 = _safe_ilu0(approx)

    def deflated_op(v):
        return v - p1 @ v + pihat1 @ v

    def run(op, b, pre, fallback):
        try:
            x, info = solve(op, b, pre)
            diag["residual"] = max(diag["residual"], info.residual)
            return x
        except ConvergenceError as exc:
            log.debug("Krylov solve failed (%s); falling back to LU", exc)
            diag["fallbacks"] += 1
            return fallback(b)

    x = run(a22, ones2, pre22, f.lu22.solve)
    y = run(deflated_op, f.p12 @ x, pre1, deflated_lu)
    y = run(a22, f.p21 @ y, pre22, f.lu22.solve)
    return float(pihat2 @ (x + y)), diag


def theta_via_solves(p, split, pihat1, pihat2, solver="lu", tol=1e-8, complements=None):
    """Correction scalars of a split by the three-solve sequence.

    Parameters
    ----------
    p : StochasticMatrix
    split : BlockPartition or int
    pihat1, pihat2 : ndarray
        Stationary vectors of the two censored chains.
    solver : {"lu", "gmres", "bicgstab"}
    complements : CensoredPair, optional
        Reuse an already computed ``P1``.

    Returns
    -------
    ThetaGamma
    """
    a = _as_matrix(p)
    m = _split_m(split)
    BlockPartition(m, a.shape[0])
    pihat1 = _as_pi(pihat1)
    pihat2 = _as_pi(pihat2)
    f = _SplitFactors.build(a, m)
    if complements is not None:
        p1 = complements.p1.matrix
    else:
        p1 = _complement(f.p11, f.p12, f.p21, f.lu22)
    a1, a2 = aggregated(a, m, pihat1, pihat2).stationary
    cfg = DncConfig(solver=solver, tol=tol)
    theta, diag = _theta(f, p1, pihat1, pihat2, cfg)
    return ThetaGamma(theta, a1 * theta - a2, "three_solve", diag)


def _dense_blocks(p, m):
    a = _as_matrix(p).toarray()
    return a, a[:m, :m], a[:m, m:], a[m:, :m], a[m:, m:]


def theta_alternatives(p, split, pihat1, pihat2, n_max=2000):
    r"""Four algebraically equivalent evaluations of theta (dense).

    ``full_resolvent``
        ``[0, pihat2^T] (I - P + [1; 0][pihat1^T, 0])^{-1} [0; 1]``.
    ``three_solve``
        ``pihat2^T (I + (I-P22)^{-1} P21 (I-P1+1 pihat1^T)^{-1} P12) (I-P22)^{-1} 1``.
    ``deflated_schur``
        ``pihat2^T (I - P22 - P21 (I-P11+1 pihat1^T)^{-1} P12)^{-1} 1``.
    ``complement_update``
        ``pihat2^T (I - P2 + c P21 S 1 pihat1^T S P12)^{-1} 1`` with
        ``S = (I-P11)^{-1}`` and ``c = 1 / (1 + pihat1^T S 1)``.

    Intended for validation; refuses ``n > n_max``.
    """
    m = _split_m(split)
    a, p11, p12, p21, p22 = _dense_blocks(p, m)
    n = a.shape[0]
    if n > n_max:
        raise InvalidInputError(f"dense theta evaluation refused for n={n} > {n_max}")
    BlockPartition(m, n)
    h1 = np.asarray(pihat1, dtype=float)
    h2 = np.asarray(pihat2, dtype=float)
    i1, i2 = np.eye(m), np.eye(n - m)
    e1, e2 = np.ones(m), np.ones(n - m)

    u = np.concatenate([e1, np.zeros(n - m)])
    v = np.concatenate([h1, np.zeros(n - m)])
    rhs = np.concatenate([np.zeros(m), e2])
    full = np.concatenate([np.zeros(m), h2]) @ sla.solve(np.eye(n) - a + np.outer(u, v), rhs)

    p1 = p11 + p12 @ sla.solve(i2 - p22, p21)
    x = sla.solve(i2 - p22, e2)
    y = sla.solve(i1 - p1 + np.outer(e1, h1), p12 @ x)
    y = sla.solve(i2 - p22, p21 @ y)
    three = h2 @ (x + y)

    schur = i2 - p22 - p21 @ sla.solve(i1 - p11 + np.outer(e1, h1), p12)
    deflated = h2 @ sla.solve(schur, e2)

    s = sla.inv(i1 - p11)
    p2 = p22 + p21 @ s @ p12
    c = 1.0 / (1.0 + h1 @ s @ e1)
    upd = i2 - p2 + c * np.outer(p21 @ s @ e1, h1 @ s @ p12)
    complement = h2 @ sla.solve(upd, e2)

    return {
        "full_resolvent": float(full),
        "three_solve": float(three),
        "deflated_schur": float(deflated),
        "complement_update": float(complement),
    }


def gamma_resolvent(p, pi, split, u=None, v=None):
    r"""The correction ``gamma`` from a deflated resolvent of ``P`` (dense).

    .. math::

        \gamma = [\hat\pi_1^T, -\hat\pi_2^T] (I - P + u v^T)^{-1}
                 [\alpha_2 1; -\alpha_1 1]

    for any ``u, v`` with ``v^T 1 != 0`` and ``pi^T u != 0`` (defaults:
    ``u = 1``, ``v = pi``).
    """
    m = _split_m(split)
    a = _as_matrix(p).toarray()
    n = a.shape[0]
    BlockPartition(m, n)
    pi = _as_pi(pi)
    u = np.ones(n) if u is None else np.asarray(u, dtype=float)
    v = pi if v is None else np.asarray(v, dtype=float)
    if abs(v.sum()) <= 1e-14 * np.abs(v).sum():
        raise InvalidInputError("v^T 1 must be nonzero")
    if abs(pi @ u) <= 1e-14 * np.abs(u).max():
        raise InvalidInputError("pi^T u must be nonzero")
    a1, a2 = pi[:m].sum(), pi[m:].sum()
    left = np.concatenate([pi[:m] / a1, -pi[m:] / a2])
    rhs = np.concatenate([np.full(m, a2), np.full(n - m, -a1)])
    try:
        z = sla.solve(np.eye(n) - a + np.outer(u, v), rhs)
    except sla.LinAlgError as exc:
        raise SingularMatrixError(f"I - P + u v^T is singular: {exc}") from exc
    return float(left @ z)


class _Recursion:
    def __init__(self, cfg):
        self.cfg = cfg
        self.lock = threading.Lock()
        self.stats = {
            "depth": 0,
            "nodes": 0,
            "base_cases": 0,
            "fallbacks": 0,
            "max_krylov_residual": 0.0,
            "max_complement_nnz": 0,
        }
        self.parallel_depth = int(math.log2(cfg.threads)) if cfg.threads > 1 else 0

    def record(self, **kw):
        with self.lock:
            s = self.stats
            s["nodes"] += 1
            s["depth"] = max(s["depth"], kw.get("depth", 0))
            s["base_cases"] += kw.get("base", 0)
            s["fallbacks"] += kw.get("fallbacks", 0)
            s["max_krylov_residual"] = max(s["max_krylov_residual"], kw.get("residual", 0.0))
            s["max_complement_nnz"] = max(s["max_complement_nnz"], kw.get("nnz", 0))

    def base(self, a, depth):
        n = a.shape[0]
        self.record(depth=depth, base=1)
        if n == 1:
            return 0.0
        if n > N_DENSE:
            raise InvalidInputError(f"base case of size {n} exceeds the dense limit")
        return kemeny_direct(a).kappa

    def __call__(self, a, pi, depth=0, path="root"):
        cfg = self.cfg
        n = a.shape[0]
        if n < cfg.base_size or n == 1 or depth >= cfg.max_depth:
            return self.base(a, depth)
        try:
            if cfg.split == "nd":
                first, second = bisect(a)
                perm = np.concatenate([first, second])
                a = a[perm][:, perm].tocsr()
                pi = pi[perm]
                m = first.size
            else:
                m = n // 2
            f = _SplitFactors.build(a, m)
            p1, p2 = f.complements(cfg.drop_tol)
            a1, a2 = pi[:m].sum(), pi[m:].sum()
            pihat1, pihat2 = pi[:m] / a1, pi[m:] / a2
            theta, diag = _theta(f, p1, pihat1, pihat2, cfg)
            del f
            if cfg.validate:
                for name, q in (("P1", p1), ("P2", p2)):
                    cert = check_irreducible(q)
                    if not cert:
                        raise ReducibleChainError(f"{name} is reducible", cert.n_components)
        except DncError:
            raise
        except (SingularMatrixError, ConvergenceError, ReducibleChainError) as exc:
            raise DncError(str(exc), path) from exc
        gamma = a1 * theta - a2
        self.record(depth=depth, fallbacks=diag["fallbacks"], residual=diag["residual"],
                    nnz=max(p1.nnz, p2.nnz))
        del a
        if depth < self.parallel_depth:
            with ThreadPoolExecutor(max_workers=1) as pool:
                fut = pool.submit(self, p2, pihat2, depth + 1, path + "/2")
                k1 = self(p1, pihat1, depth + 1, path + "/1")
                k2 = fut.result()
        else:
            k1 = self(p1, pihat1, depth + 1, path + "/1")
            k2 = self(p2, pihat2, depth + 1, path + "/2")
        return k1 + k2 + gamma


def kemeny_dnc(p, pi=None, cfg=None):
    """Kemeny's constant by recursive stochastic complementation.

    Parameters
    ----------
    p : StochasticMatrix
        Irreducible chain.
    pi : StationaryDistribution or ndarray, optional
        Its stationary vector (computed when omitted). Sub-problems reuse
        normalized restrictions of it.
    cfg : DncConfig, optional

    Returns
    -------
    KemenyResult
        ``diagnostics`` holds recursion depth, node and base-case counts,
        Krylov fallbacks and the largest complement nnz.

    Raises
    ------
    DncError
        When a factorization or solve fails; the message names the
        recursion path (``root/1/2`` = second child of the first child).
    """
    t0 = time.perf_counter()
    cfg = DncConfig() if cfg is None else cfg
    a = _as_matrix(p)
    pi = _as_pi(stationary(p) if pi is None else pi)
    if pi.shape != (a.shape[0],):
        raise InvalidInputError("stationary vector has the wrong length")
    rec = _Recursion(cfg)
    kappa = rec(a, pi)
    diag = dict(rec.stats)
    diag["elapsed"] = time.perf_counter() - t0
    diag["config"] = {
        "base_size": cfg.base_size, "split": cfg.split, "solver": cfg.solver, "tol": cfg.tol,
    }
    return KemenyResult(float(kappa), "dnc", a.shape[0], diag)
