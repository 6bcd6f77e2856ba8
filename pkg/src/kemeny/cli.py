"""Command-line driver: read a matrix, build a chain, compute kappa, report.

Exit codes: 0 success, 2 invalid input or usage, 3 reducible chain,
4 numerical failure, 1 any other error.
"""

import argparse
import csv
from dataclasses import asdict, dataclass
import io
import json
import logging
import math
import sys

import numpy as np

from . import __version__
from .direct import N_DENSE, kemeny_direct, kemeny_eig
from .dnc import DncConfig, DncError, kemeny_dnc, threads_from_env
from .exceptions import (
    ConvergenceError,
    InvalidInputError,
    KemenyError,
    ReducibleChainError,
    SingularMatrixError,
)
from .hutch import HutchConfig, is_reversible, kemeny_hutchpp
from .markov import (
    StochasticMatrix,
    SymmetricWalk,
    _as_matrix,
    blocks,
    build_from_graph,
    check_irreducible,
    largest_component,
)
from .mmio import read_matrix_market
from .structured import (
    constant_rowsums,
    detect_period,
    kemeny_bipartite,
    kemeny_constant_rowsum,
    kemeny_periodic,
    periodic_from_matrix,
)

__all__ = ["RunConfig", "auto_dispatch", "load_chain", "run", "main", "SCHEMA_VERSION"]

SCHEMA_VERSION = 1
METHODS = ("direct", "eig", "dnc", "hutchpp", "auto", "closed-form")
# timing keys are dropped from reports so identical runs serialize identically
_VOLATILE = ("elapsed",)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RunConfig:
    """Everything one CLI invocation needs.

    Only the options of the selected method are validated.
    """

    input: str
    kind: str = "adjacency"
    normalize: str = "row"
    method: str = "auto"
    n0: int = 512
    split: str = "half"
    solver: str = "lu"
    tol: float = 1e-8
    delta: float = 0.25
    eps: float = 0.1
    samples: int = None
    seed: int = 0
    inner_tol: float = 1e-3
    output: str = "human"
    largest_scc: bool = False
    keep_weights: bool = False
    coarse: bool = False
    n_dense: int = N_DENSE

    def __post_init__(self):
        if self.kind not in ("adjacency", "transition"):
            raise InvalidInputError(f"unknown input kind {self.kind!r}")
        if self.normalize not in ("row", "sym"):
            raise InvalidInputError(f"unknown normalization {self.normalize!r}")
        if self.method not in METHODS:
            raise InvalidInputError(f"unknown method {self.method!r}")
        if self.output not in ("human", "json", "csv"):
            raise InvalidInputError(f"unknown output format {self.output!r}")

    def dnc_config(self):
        return DncConfig(base_size=self.n0, split=self.split, solver=self.solver, tol=self.tol)

    def hutch_config(self):
        return HutchConfig(
            delta=self.delta, epsilon=self.eps, l=self.samples, rng_seed=self.seed,
            inner_tol=self.inner_tol, workers=threads_from_env(),
        )


def _zero_diagonal_blocks(a, m):
    p11, _, _, p22 = blocks(a, m)
    return not p11.count_nonzero() and not p22.count_nonzero()


def _closed_form_kind(a):
    """Which closed form applies under the halving split, if any."""
    n = a.shape[0]
    if n < 2:
        return None
    m = n // 2
    if _zero_diagonal_blocks(a, m):
        return "bipartite"
    if constant_rowsums(a, m) is not None:
        return "constant-rowsum"
    return None


def auto_dispatch(p, n_dense=N_DENSE, coarse=False, symmetric=None):
    """Pick a method for ``p``.

    Order: a closed form when the halving split has zero diagonal blocks or
    constant-row-sum diagonal blocks; ``direct`` when ``n <= n_dense``;
    ``hutchpp`` when the chain is reversible and ``coarse`` is set;
    otherwise ``dnc``.
    """
    a = p.transition().matrix if isinstance(p, SymmetricWalk) else _as_matrix(p)
    if _closed_form_kind(a) is not None:
        return "closed-form"
    if a.shape[0] <= n_dense:
        return "direct"
    if coarse:
        if symmetric is None:
            symmetric = isinstance(p, SymmetricWalk) or is_reversible(a)
        if symmetric:
            return "hutchpp"
    return "dnc"


def _closed_form(p):
    a = _as_matrix(p)
    kind = _closed_form_kind(a)
    if kind == "bipartite":
        return kemeny_bipartite(a, a.shape[0] // 2)
    if kind == "constant-rowsum":
        return kemeny_constant_rowsum(a, a.shape[0] // 2)
    d, _ = detect_period(a)
    if d >= 2:
        chain, perm = periodic_from_matrix(a)
        res = kemeny_periodic(chain)
        res.diagnostics["detected_period"] = d
        return res
    raise InvalidInputError(
        "no closed form applies: need zero or constant-row-sum diagonal blocks under the "
        "halving split, or a periodic chain"
    )


def load_chain(cfg):
    """Read the input and build the chain.

    Returns
    -------
    (StochasticMatrix or SymmetricWalk, dict)
        The chain and provenance info (original size, component flag).
    """
    a = read_matrix_market(cfg.input)
    if a.shape[0] != a.shape[1]:
        raise InvalidInputError(f"matrix must be square, got {a.shape}")
    info = {"n_input": int(a.shape[0]), "largest_component": False}
    if cfg.kind == "adjacency":
        directed = cfg.normalize == "row"
        if cfg.largest_scc:
            a, idx = largest_component(a, directed=directed)
            info["largest_component"] = bool(idx.size < info["n_input"])
        mode = "row" if cfg.normalize == "row" else "symmetric"
        chain = build_from_graph(a, mode=mode, binarize=not cfg.keep_weights)
    else:
        if cfg.largest_scc:
            a, idx = largest_component(a, directed=True)
            info["largest_component"] = bool(idx.size < info["n_input"])
            # restricted rows no longer sum to one; renormalize
            rows = np.asarray(a.sum(axis=1)).ravel()
            if np.any(rows <= 0):
                raise InvalidInputError("largest component has a state without transitions")
            a = a.multiply(1.0 / rows[:, None]).tocsr()
        chain = StochasticMatrix(a)
        if cfg.normalize == "sym":
            if not is_reversible(chain):
                raise InvalidInputError("--normalize sym needs a reversible transition matrix")
    pattern = chain.matrix
    cert = check_irreducible(pattern)
    if not cert:
        raise ReducibleChainError(
            f"chain is reducible ({cert.n_components} strongly connected components); "
            "rerun with --largest-scc",
            cert.n_components,
        )
    return chain, info


def _compute(chain, cfg, method):
    p = chain.transition() if isinstance(chain, SymmetricWalk) else chain
    if method == "direct":
        return kemeny_direct(p, n_dense=max(cfg.n_dense, p.n))
    if method == "eig":
        return kemeny_eig(p, n_dense=max(cfg.n_dense, p.n))
    if method == "dnc":
        return kemeny_dnc(p, cfg=cfg.dnc_config())
    if method == "hutchpp":
        return kemeny_hutchpp(chain, cfg.hutch_config())
    return _closed_form(p)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items() if k not in _VOLATILE}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    return x


def _report(result, chain, cfg, info):
    return {
        "schema_version": SCHEMA_VERSION,
        "kappa": result.kappa,
        "method": result.method,
        "n": result.n,
        "nnz": int(chain.nnz),
        "largest_component": info["largest_component"],
        "n_input": info["n_input"],
        "diagnostics": _jsonable(result.diagnostics),
        "config": _jsonable(asdict(cfg)),
    }


def format_report(report, fmt):
    """Serialize a report dict as ``human``, ``json`` or ``csv`` text."""
    if fmt == "json":
        return json.dumps(_jsonable(report), sort_keys=True, indent=2) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        cols = ["input", "method", "n", "nnz", "largest_component", "kappa"]
        w.writerow(cols)
        w.writerow([report["config"]["input"], report["method"], report["n"], report["nnz"],
                    int(report["largest_component"]), repr(report["kappa"])])
        return buf.getvalue()
    mark = " (largest component)" if report["largest_component"] else ""
    lines = [
        f"kappa   {report['kappa']:.10g}",
        f"method  {report['method']}",
        f"n       {report['n']}{mark}",
        f"nnz     {report['nnz']}",
    ]
    for k, v in sorted(report["diagnostics"].items()):
        if isinstance(v, list) and len(v) > 8:
            v = f"[{len(v)} values]"
        lines.append(f"  {k}: {v}")
    return "\n".join(lines) + "\n"


def run(cfg):
    """Execute one configuration.

    Returns
    -------
    (KemenyResult, dict)
        The result and the report dictionary (see :func:`format_report`).
    """
    chain, info = load_chain(cfg)
    method = cfg.method
    if method == "auto":
        method = auto_dispatch(chain, cfg.n_dense, cfg.coarse)
    if method == "hutchpp" and not (isinstance(chain, SymmetricWalk) or is_reversible(chain)):
        raise InvalidInputError("hutchpp needs an undirected graph (reversible chain); use dnc")
    result = _compute(chain, cfg, method)
    return result, _report(result, chain, cfg, info)


def _parser():
    ap = argparse.ArgumentParser(
        prog="kemeny",
        description="Compute Kemeny's constant of a Markov chain given as a Matrix Market file.",
    )
    ap.add_argument("input", help="Matrix Market file (adjacency or transition matrix)")
    ap.add_argument("--kind", choices=("adjacency", "transition"), default="adjacency")
    ap.add_argument("--normalize", choices=("row", "sym"), default="row",
                    help="row: D^-1 A; sym: undirected walk (needed for hutchpp)")
    ap.add_argument("--method", choices=METHODS, default="auto")
    ap.add_argument("--n0", type=int, default=512, help="dnc base-case size")
    ap.add_argument("--split", choices=("half", "nd"), default="half")
    ap.add_argument("--solver", choices=("lu", "gmres", "bicgstab"), default="lu")
    ap.add_argument("--tol", type=float, default=1e-8, help="dnc Krylov tolerance")
    ap.add_argument("--delta", type=float, default=0.25, help="Hutch++ failure probability")
    ap.add_argument("--eps", type=float, default=0.1, help="Hutch++ relative accuracy")
    ap.add_argument("--samples", type=int, default=None, help="Hutch++ query count")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--inner-tol", type=float, default=1e-3, help="Hutch++ CG tolerance")
    ap.add_argument("--largest-scc", action="store_true",
                    help="restrict to the largest strongly connected component")
    ap.add_argument("--keep-weights", action="store_true",
                    help="keep edge weights instead of setting them to one")
    ap.add_argument("--coarse", action="store_true",
                    help="let auto pick hutchpp for large undirected graphs")
    ap.add_argument("--n-dense", type=int, default=N_DENSE,
                    help="largest size auto sends to the dense method")
    fmt = ap.add_mutually_exclusive_group()
    fmt.add_argument("--json", dest="output", action="store_const", const="json")
    fmt.add_argument("--csv", dest="output", action="store_const", const="csv")
    ap.set_defaults(output="human")
    ap.add_argument("-v", "--verbose", action="store_true")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return ap


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    opts = vars(args)
    opts.pop("verbose")
    try:
        cfg = RunConfig(**opts)
        _, report = run(cfg)
    except ReducibleChainError as exc:
        print(f"kemeny: error: {exc}", file=sys.stderr)
        return 3
    except DncError as exc:
        print(f"kemeny: numerical failure: {exc}", file=sys.stderr)
        return 3 if isinstance(exc.__cause__, ReducibleChainError) else 4
    except (ConvergenceError, SingularMatrixError) as exc:
        print(f"kemeny: numerical failure: {exc}", file=sys.stderr)
        return 4
    except (InvalidInputError, OSError) as exc:
        print(f"kemeny: error: {exc}", file=sys.stderr)
        return 2
    except KemenyError as exc:
        print(f"kemeny: error: {exc}", file=sys.stderr)
        return 1
    sys.stdout.write(format_report(report, cfg.output))
    return 0


if __name__ == "__main__":
    sys.exit(main())
