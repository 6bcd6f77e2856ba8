import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kemeny.direct import kemeny_direct
from kemeny.exceptions import InvalidInputError
from kemeny.generators import grid_graph, path_graph, random_irreducible, uniform_chain
from kemeny.hutch import (
    HutchConfig,
    SymmetricFrame,
    hutchpp,
    is_reversible,
    kemeny_hutchpp,
    resolvent_oracle,
    sample_count,
)
from kemeny.markov import build_from_graph, stationary


def test_sample_count():
    assert sample_count(0.25, 0.1) == 13
    assert sample_count(0.25, 0.05) == 25
    # the epsilon term doubles when epsilon halves
    ld = math.log(4)
    assert sample_count(0.25, 0.05) == math.ceil(2 * math.sqrt(ld) / 0.1 + ld / 2)
    assert sample_count(0.9, 1.0) == 3
    with pytest.raises(InvalidInputError):
        sample_count(0.0, 0.1)
    with pytest.raises(InvalidInputError):
        sample_count(0.5, 0.0)


def test_config():
    assert HutchConfig().samples == 13
    assert HutchConfig(l=30).samples == 30
    for bad in ({"l": 2}, {"delta": 1.0}, {"inner_tol": 0.0}, {"epsilon": 0.0}):
        with pytest.raises(InvalidInputError):
            HutchConfig(**bad)


def test_hutchpp_exact_for_low_rank():
    rng = np.random.default_rng(0)
    u = rng.standard_normal((50, 3))
    a = u @ u.T
    # 12 queries give a sketch of rank 4, which captures rank 3 exactly
    assert hutchpp(lambda x: a @ x, 50, 12, seed=1) == pytest.approx(np.trace(a), rel=1e-10)


def test_hutchpp_unbiased():
    rng = np.random.default_rng(1)
    u = rng.standard_normal((100, 100))
    a = u @ u.T / 100 + np.eye(100)
    est = [hutchpp(lambda x: a @ x, 100, 9, seed=s) for s in range(1000)]
    tr = np.trace(a)
    se = np.std(est) / np.sqrt(len(est))
    assert abs(np.mean(est) - tr) <= 4 * se


def test_hutchpp_deterministic_and_worker_independent():
    a = np.diag(np.arange(1.0, 41.0))
    first = hutchpp(lambda x: a @ x, 40, 13, seed=7)
    assert hutchpp(lambda x: a @ x, 40, 13, seed=7) == first
    assert hutchpp(lambda x: a @ x, 40, 13, seed=7, workers=4) == first
    assert hutchpp(lambda x: a @ x, 40, 13, seed=8) != first
    with pytest.raises(InvalidInputError):
        hutchpp(lambda x: x, 5, 2)


def test_reversibility_check():
    p = build_from_graph(grid_graph(5))
    assert is_reversible(p)
    q = random_irreducible(30, density=0.1, seed=0)
    assert not is_reversible(q)
    with pytest.raises(InvalidInputError):
        SymmetricFrame(q)
    with pytest.raises(InvalidInputError):
        kemeny_hutchpp(q)


def test_frame_trace_identity():
    walk = build_from_graph(grid_graph(6), mode="symmetric")
    frame = SymmetricFrame(walk)
    dense = np.column_stack([frame.matvec(e) for e in np.eye(frame.n)])
    assert np.allclose(dense, dense.T)
    assert np.trace(np.linalg.inv(dense)) == pytest.approx(kemeny_direct(walk.transition()).kappa + 1)
    assert np.linalg.norm(frame.w) == pytest.approx(1.0)


def test_oracle_fixed_vector():
    p = build_from_graph(path_graph(100))
    ones = np.ones(100)
    y = resolvent_oracle(p, ones, inner_tol=1e-10)
    assert np.abs(y - 1).max() < 1e-8
    # at the default tolerance only the residual is guaranteed
    h = np.full(100, 0.01)
    y = resolvent_oracle(p, ones)
    m = np.eye(100) - p.toarray() + np.outer(ones, h)
    assert np.linalg.norm(m @ y - ones) <= 1e-3 * np.linalg.norm(ones)


def test_oracle_matches_dense_solve():
    p = build_from_graph(path_graph(100))
    x = np.random.default_rng(2).standard_normal(100)
    m = np.eye(100) - p.toarray() + np.full((100, 100), 0.01)
    y = resolvent_oracle(p, x, inner_tol=1e-12)
    assert np.abs(y - np.linalg.solve(m, x)).max() <= 1e-8
    h = stationary(p).pi
    yh = resolvent_oracle(p, x, h=h, inner_tol=1e-12)
    assert np.abs(yh - np.linalg.solve(np.eye(100) - p.toarray() + np.outer(np.ones(100), h), x)).max() <= 1e-8


def test_oracle_uniform_chain():
    # with h = 1/n the deflated matrix of the uniform chain is the identity
    x = np.random.default_rng(3).standard_normal(20)
    assert resolvent_oracle(uniform_chain(20), x, inner_tol=1e-12) == pytest.approx(x, abs=1e-10)
    assert np.allclose(resolvent_oracle(uniform_chain(20), np.zeros(20)), 0.0)


def test_hutchpp_uniform_chain():
    r = kemeny_hutchpp(uniform_chain(30), HutchConfig(l=30, rng_seed=0))
    # the frame operator is the identity; the sketch part is exact
    assert abs(r.kappa - 29) / 29 < 0.2


def test_kemeny_hutchpp_diagnostics_and_determinism():
    walk = build_from_graph(grid_graph(8), mode="symmetric")
    cfg = HutchConfig(rng_seed=5)
    r = kemeny_hutchpp(walk, cfg)
    assert r.method == "hutchpp" and r.n == 64
    d = r.diagnostics
    assert d["l"] == 13 and d["split"] == [4, 4, 5]
    assert len(d["residuals"]) == 13 and max(d["residuals"]) <= cfg.inner_tol
    assert kemeny_hutchpp(walk, cfg).kappa == r.kappa
    assert kemeny_hutchpp(walk, HutchConfig(rng_seed=5, workers=3)).kappa == r.kappa


def test_hutchpp_many_queries_is_accurate():
    walk = build_from_graph(grid_graph(10), mode="symmetric")
    ref = kemeny_direct(walk.transition()).kappa
    r = kemeny_hutchpp(walk, HutchConfig(l=90, inner_tol=1e-8, rng_seed=1))
    assert abs(r.kappa - ref) / ref < 0.02


@settings(max_examples=6, deadline=None)
@given(k=st.integers(3, 6), seed=st.integers(0, 2**31))
def test_hutchpp_full_sketch_is_exact(k, seed):
    walk = build_from_graph(grid_graph(k), mode="symmetric")
    ref = kemeny_direct(walk.transition()).kappa
    r = kemeny_hutchpp(walk, HutchConfig(l=3 * k * k, inner_tol=1e-10, rng_seed=seed))
    # every query in the sketch: the estimate is exact up to solver error
    assert r.kappa == pytest.approx(ref, rel=1e-6)
