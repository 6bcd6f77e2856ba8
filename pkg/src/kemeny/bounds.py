r"""A-priori bounds on the split quantities and a perturbation estimate.

All norms are the infinity norm (largest absolute row sum) unless stated.
With ``a1 = ||pi_1||_1`` the mass of the first block,

.. math::

    \frac{1-\|P_{22}\|}{1-\|P_{22}\|+\|P_{12}\|} \le a_1 \le
    \frac{\|P_{21}\|}{1-\|P_{11}\|+\|P_{21}\|},

and ``gamma = (1 + theta) a1 - 1`` turns these into bounds on ``gamma``.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .direct import N_DENSE
from .exceptions import InvalidInputError
from .linalg import sparse_lu
from .markov import _as_matrix, _as_pi, _split_m, _SplitFactors, blocks, stationary

__all__ = [
    "Interval",
    "BoundValue",
    "PerturbationSpec",
    "PerturbationEstimate",
    "inf_norm",
    "pi1_bounds",
    "theta_upper_bound",
    "gamma_bounds",
    "perturbation_bound",
]

#: exact dense norms up to this size, estimates above
EXACT_MAX = 2000
# relative outward padding absorbing rounding in the bound arithmetic
_PAD = 1e-13


@dataclass(frozen=True)
class Interval:
    """Closed interval ``[lo, hi]`` with provenance flags."""

    lo: float
    hi: float
    flags: tuple = ()

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise InvalidInputError(f"empty interval [{self.lo}, {self.hi}]")

    def __contains__(self, x):
        return self.lo <= x <= self.hi

    @property
    def width(self):
        return self.hi - self.lo

    def intersect(self, other):
        lo, hi = max(self.lo, other.lo), min(self.hi, other.hi)
        if lo > hi:
            raise InvalidInputError("bounds are inconsistent: empty intersection")
        return Interval(lo, hi, tuple(dict.fromkeys(self.flags + other.flags)))


class BoundValue(float):
    """A float carrying flags (e.g. ``"estimate"`` when a norm was estimated)."""

    def __new__(cls, value, flags=()):
        obj = super().__new__(cls, value)
        obj.flags = tuple(flags)
        return obj


def _padded(lo, hi, flags=()):
    s = _PAD * max(1.0, abs(lo), abs(hi))
    return Interval(lo - s, hi + s, tuple(flags))


def inf_norm(a):
    """Largest absolute row sum of a dense or sparse matrix."""
    if sp.issparse(a):
        if a.shape[0] == 0:
            return 0.0
        return float(np.asarray(abs(a).sum(axis=1)).max())
    a = np.asarray(a)
    return float(np.abs(a).sum(axis=1).max()) if a.size else 0.0


def pi1_bounds(p, split):
    """Interval for the stationary mass of the first block.

    Each endpoint needs its own diagonal block to have norm below one; when
    that fails the endpoint falls back to 0 (resp. 1) and the interval gets
    the flag ``"trivial-lower"`` (resp. ``"trivial-upper"``).

    Examples
    --------
    Constant row sums ``r1, r2`` collapse the interval to
    ``(1 - r2) / (2 - r1 - r2)``.
    """
    p11, p12, p21, p22 = blocks(_as_matrix(p), _split_m(split))
    n11, n12, n21, n22 = map(inf_norm, (p11, p12, p21, p22))
    flags = []
    if n22 < 1.0:
        lo = (1.0 - n22) / (1.0 - n22 + n12)
    else:
        lo = 0.0
        flags.append("trivial-lower")
    if n11 < 1.0:
        hi = n21 / (1.0 - n11 + n21)
    else:
        hi = 1.0
        flags.append("trivial-upper")
    iv = _padded(lo, hi, flags)
    return Interval(max(iv.lo, 0.0), min(iv.hi, 1.0), iv.flags)


def _deflated_inv_norm(p1, pihat1, exact_max):
    """``||(I - P1 + 1 pihat1^T)^{-1}||_inf``, exact or estimated."""
    m = p1.shape[0]
    if m <= exact_max:
        g = np.eye(m) - p1.toarray() + np.outer(np.ones(m), pihat1)
        return inf_norm(sla.inv(g)), False
    # ||X||_inf = ||X^T||_1; estimate the latter with Hager/Higham
    k = int(np.argmax(pihat1))
    col = sp.csr_matrix((np.ones(m), (np.arange(m), np.full(m, k))), shape=(m, m))
    g = (sp.identity(m, format="csr") - p1 + col).tocsr()
    lu, lut = sparse_lu(g), sparse_lu(g.T.tocsc())
    v = pihat1.copy()
    v[k] -= 1.0
    ones = np.ones(m)
    w = lut.solve(v)

    def solve_t(b):  # (G^T + v 1^T)^{-1} b
        y = lut.solve(b)
        return y - w * (ones @ y) / (1.0 + ones @ w)

    def solve(b):  # (G + 1 v^T)^{-1} b, using G^{-1} 1 = 1
        y = lu.solve(b)
        return y - v @ y

    op = spla.LinearOperator(
        (m, m),
        matvec=lambda b: solve_t(np.ravel(b)),
        rmatvec=lambda b: solve(np.ravel(b)),
        dtype=float,
    )
    return float(spla.onenormest(op)), True


def theta_upper_bound(p, split, pihat1=None, exact_max=EXACT_MAX):
    r"""Upper bound on ``|theta|``.

    .. math::

        \theta \le \|(I-P_{22})^{-1}\| \bigl(1 + \|P_{12}\|\,
        \|(I-P_1+1\hat\pi_1^T)^{-1}\|\bigr)

    ``(I - P22)^{-1}`` is entrywise nonnegative, so its norm is the largest
    entry of ``(I - P22)^{-1} 1`` (exact at any size). The deflated
    inverse norm is exact for ``m <= exact_max`` and estimated otherwise,
    in which case the result carries the flag ``"estimate"``.

    Returns
    -------
    BoundValue
    """
    a = _as_matrix(p)
    m = _split_m(split)
    if pihat1 is None:
        pi = stationary(a).pi
        pihat1 = pi[:m] / pi[:m].sum()
    pihat1 = np.asarray(pihat1, dtype=float)
    f = _SplitFactors.build(a, m)
    p1, _ = f.complements()
    n_inv22 = float(f.lu22.solve(np.ones(a.shape[0] - m)).max())
    n_y, estimated = _deflated_inv_norm(p1, pihat1, exact_max)
    value = n_inv22 * (1.0 + inf_norm(f.p12) * n_y)
    return BoundValue(value, ("estimate",) if estimated else ())


def gamma_bounds(p, split, theta=None, resolvent=False, pi=None, exact_max=EXACT_MAX):
    r"""Interval containing ``gamma = (1 + theta) a1 - 1``.

    Parameters
    ----------
    theta : float, optional
        Exact ``theta``. When omitted, ``theta`` is only known to lie in
        ``[-U, U]`` with ``U`` from :func:`theta_upper_bound`.
    resolvent : bool
        Also apply ``|gamma| <= 2 ||(I - P + 1 pi^T)^{-1}|| max(a1, 1 - a1)``
        and return the intersection.

    Notes
    -----
    ``gamma`` is bilinear in ``(theta, a1)``, so its extremes over the box
    are attained at corners; this covers both signs of ``1 + theta``.
    """
    a = _as_matrix(p)
    m = _split_m(split)
    a1 = pi1_bounds(a, m)
    flags = list(a1.flags)
    if theta is None or resolvent:
        pi = _as_pi(stationary(a) if pi is None else pi)
    if theta is None:
        u = theta_upper_bound(a, m, pi[:m] / pi[:m].sum(), exact_max)
        t_lo, t_hi = -float(u), float(u)
        flags += ["theta-box", *u.flags]
    else:
        t_lo = t_hi = float(theta)
    corners = [(1.0 + t) * x - 1.0 for t in (t_lo, t_hi) for x in (a1.lo, a1.hi)]
    out = _padded(min(corners), max(corners), flags)
    if resolvent:
        mass = pi[:m].sum()
        nz, est = _deflated_inv_norm(a, pi, exact_max)
        r = 2.0 * nz * max(mass, 1.0 - mass)
        out = out.intersect(_padded(-r, r, ["resolvent"] + (["estimate"] if est else [])))
    return out


@dataclass(frozen=True)
class PerturbationSpec:
    """Direction ``E`` (zero row sums, ``||E||_inf <= 1``) and size ``eps``."""

    e: object
    eps: float

    def __post_init__(self):
        e = self.e.toarray() if sp.issparse(self.e) else np.asarray(self.e, dtype=float)
        if e.ndim != 2 or e.shape[0] != e.shape[1]:
            raise InvalidInputError("E must be square")
        if not self.eps >= 0:
            raise InvalidInputError("eps must be nonnegative")
        if e.size and np.abs(e.sum(axis=1)).max() > 1e-12:
            raise InvalidInputError("E must have zero row sums")
        if inf_norm(e) > 1.0 + 1e-12:
            raise InvalidInputError("||E||_inf must not exceed 1")
        object.__setattr__(self, "e", e)


@dataclass(frozen=True)
class PerturbationEstimate:
    """First-order change of Kemeny's constant under ``P -> P + eps E``.

    ``bound = eps ||Z^2||_F ||E||_F`` bounds ``|first_order|``, where
    ``first_order = eps tr(Z^2 E)`` and ``Z = (I - P + 1 h^T)^{-1}``.
    """

    bound: float
    first_order: float
    z2_fro: float
    e_fro: float
    diagnostics: dict = field(default_factory=dict)


def perturbation_bound(p, spec, h=None, n_dense=N_DENSE):
    """First-order bound and estimate for a stochastic perturbation.

    Parameters
    ----------
    p : StochasticMatrix
    spec : PerturbationSpec
    h : ndarray, optional
        Any vector with ``h^T 1 = 1``; defaults to ``1/n``.

    Returns
    -------
    PerturbationEstimate
    """
    a = _as_matrix(p)
    n = a.shape[0]
    if n > n_dense:
        raise InvalidInputError(f"perturbation analysis is dense; n={n} > {n_dense}")
    e = spec.e
    if e.shape != (n, n):
        raise InvalidInputError("E and P have different shapes")
    ad = a.toarray()
    if (ad + spec.eps * e).min() < -1e-14:
        raise InvalidInputError("P + eps E has negative entries")
    h = np.full(n, 1.0 / n) if h is None else np.asarray(h, dtype=float)
    if abs(h.sum() - 1.0) > 1e-12:
        raise InvalidInputError("h must sum to one")
    z = sla.inv(np.eye(n) - ad + np.outer(np.ones(n), h))
    z2 = z @ z
    z2f = float(np.linalg.norm(z2, "fro"))
    ef = float(np.linalg.norm(e, "fro"))
    first = float(spec.eps * np.sum(z2 * e.T))
    return PerturbationEstimate(spec.eps * z2f * ef, first, z2f, ef)
