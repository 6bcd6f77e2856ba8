import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from kemeny.direct import kemeny_direct
from kemeny.dnc import (
    DncConfig,
    DncError,
    gamma_resolvent,
    kemeny_dnc,
    theta_alternatives,
    theta_via_solves,
    threads_from_env,
)
from kemeny.exceptions import InvalidInputError
from kemeny.generators import (
    directed_cycle,
    grid_graph,
    random_irreducible,
    random_periodic,
    random_rowsum_chain,
    uniform_chain,
)
from kemeny.markov import StochasticMatrix, build_from_graph, stationary, stochastic_complements
from kemeny.structured import assemble_periodic


def _pihats(p, m):
    pair = stochastic_complements(p, m)
    return pair.pihat1, pair.pihat2


def _dense_theta(p, m):
    # theta = [0, pihat2^T] (I - P + [1; 0][pihat1^T, 0])^{-1} [0; 1]
    a = p.toarray()
    n = a.shape[0]
    h1, h2 = _pihats(p, m)
    u = np.r_[np.ones(m), np.zeros(n - m)]
    v = np.r_[h1, np.zeros(n - m)]
    z = np.linalg.inv(np.eye(n) - a + np.outer(u, v))
    return np.r_[np.zeros(m), h2] @ z @ np.r_[np.zeros(m), np.ones(n - m)]


@pytest.mark.parametrize("d", [2, 3, 5])
def test_theta_periodic(d):
    chain = random_periodic(d, max_size=6, seed=d)
    p = assemble_periodic(chain.blocks)
    m = chain.sizes[0]
    t = theta_via_solves(p, m, *_pihats(p, m))
    assert t.theta == pytest.approx(1.5 * d - 1, abs=1e-10)
    assert t.gamma == pytest.approx(0.5, abs=1e-10)
    assert t.expression_used == "three_solve"


@pytest.mark.parametrize("solver", ["lu", "gmres", "bicgstab"])
def test_theta_constant_rowsum(solver):
    r1, r2 = 0.5, 0.25
    p = random_rowsum_chain(6, 9, r1, r2, seed=1)
    t = theta_via_solves(p, 6, *_pihats(p, 6), solver=solver, tol=1e-12)
    assert t.theta == pytest.approx((2 - r1) / (1 - r2), abs=1e-9)
    assert t.gamma == pytest.approx(1 / (2 - r1 - r2), abs=1e-9)
    vals = theta_alternatives(p, 6, *_pihats(p, 6))
    assert np.allclose(list(vals.values()), (2 - r1) / (1 - r2), atol=1e-10)


@settings(max_examples=20, deadline=None)
@given(n=st.integers(2, 150), seed=st.integers(0, 2**31), frac=st.floats(0.01, 0.99))
def test_theta_matches_dense_resolvent(n, seed, frac):
    p = random_irreducible(n, density=0.05, seed=seed)
    m = min(n - 1, max(1, int(frac * n)))
    t = theta_via_solves(p, m, *_pihats(p, m))
    ref = _dense_theta(p, m)
    assert abs(t.theta - ref) <= 1e-8 * max(1.0, abs(ref))


def test_theta_alternatives_spread():
    p = random_irreducible(50, density=0.1, seed=11)
    vals = list(theta_alternatives(p, 20, *_pihats(p, 20)).values())
    assert max(vals) - min(vals) <= 1e-8 * max(1.0, abs(vals[0]))
    with pytest.raises(InvalidInputError):
        theta_alternatives(p, 20, *_pihats(p, 20), n_max=10)


def test_theta_alternatives_periodic_d3():
    chain = random_periodic(3, sizes=(2, 3, 4), seed=0)
    p = assemble_periodic(chain.blocks)
    vals = theta_alternatives(p, 2, *_pihats(p, 2))
    assert np.allclose(list(vals.values()), 3.5, atol=1e-10)


def test_gamma_resolvent_choice_of_u_v():
    p = random_irreducible(60, density=0.1, seed=2)
    pi = stationary(p).pi
    m = 25
    g0 = gamma_resolvent(p, pi, m)
    u = np.r_[np.ones(m), np.zeros(60 - m)]
    v = np.r_[pi[:m], np.zeros(60 - m)]
    assert gamma_resolvent(p, pi, m, u=u, v=v) == pytest.approx(g0, abs=1e-9)
    rng = np.random.default_rng(0)
    assert gamma_resolvent(p, pi, m, u=rng.random(60), v=rng.random(60)) == pytest.approx(g0, abs=1e-9)
    pair = stochastic_complements(p, m)
    k = kemeny_direct(p).kappa - kemeny_direct(pair.p1).kappa - kemeny_direct(pair.p2).kappa
    assert g0 == pytest.approx(k, abs=1e-9)
    with pytest.raises(InvalidInputError):
        gamma_resolvent(p, pi, m, v=np.r_[1.0, -1.0, np.zeros(58)])


def test_gamma_resolvent_bipartite_and_uniform():
    chain = random_periodic(2, sizes=(3, 5), seed=4)
    p = assemble_periodic(chain.blocks)
    assert gamma_resolvent(p, stationary(p), 3) == pytest.approx(0.5, abs=1e-12)
    u = uniform_chain(10)
    for m in (1, 3, 5, 9):
        pair = stochastic_complements(u, m)
        expect = 9 - kemeny_direct(pair.p1).kappa - kemeny_direct(pair.p2).kappa
        assert gamma_resolvent(u, np.full(10, 0.1), m) == pytest.approx(expect, abs=1e-12)


def test_dnc_small_input_is_direct():
    p = random_irreducible(40, density=0.1, seed=3)
    r = kemeny_dnc(p, cfg=DncConfig(base_size=64))
    assert r.kappa == kemeny_direct(p).kappa
    assert r.diagnostics["base_cases"] == 1 and r.method == "dnc"


def test_dnc_complete_bipartite():
    adj = np.zeros((5, 5))
    adj[:2, 2:] = 1
    adj[2:, :2] = 1
    p = build_from_graph(adj)
    r = kemeny_dnc(p, cfg=DncConfig(base_size=2))
    assert r.kappa == pytest.approx(3.5, abs=1e-12)


@pytest.mark.parametrize("split", ["half", "nd"])
@pytest.mark.parametrize("solver", ["lu", "gmres", "bicgstab"])
def test_dnc_n1000(split, solver):
    p = random_irreducible(1000, density=0.004, seed=8)
    ref = kemeny_direct(p).kappa
    r = kemeny_dnc(p, cfg=DncConfig(base_size=64, split=split, solver=solver, tol=1e-10))
    assert abs(r.kappa - ref) <= 1e-6 * ref
    assert r.diagnostics["depth"] >= 4


@settings(max_examples=15, deadline=None)
@given(n=st.integers(2, 200), seed=st.integers(0, 2**31), base=st.integers(2, 40))
def test_dnc_matches_direct(n, seed, base):
    p = random_irreducible(n, density=0.05, seed=seed)
    ref = kemeny_direct(p).kappa
    r = kemeny_dnc(p, cfg=DncConfig(base_size=base))
    assert abs(r.kappa - ref) <= 1e-8 * (1 + ref)


def test_dnc_cycle_and_grid():
    assert kemeny_dnc(directed_cycle(300), cfg=DncConfig(base_size=8)).kappa == pytest.approx(149.5, abs=1e-9)
    p = build_from_graph(grid_graph(15))
    ref = kemeny_direct(p).kappa
    assert kemeny_dnc(p, cfg=DncConfig(base_size=16, split="nd")).kappa == pytest.approx(ref, rel=1e-10)


def test_dnc_threads_agree():
    p = random_irreducible(600, density=0.01, seed=5)
    seq = kemeny_dnc(p, cfg=DncConfig(base_size=32, threads=1)).kappa
    par = kemeny_dnc(p, cfg=DncConfig(base_size=32, threads=4)).kappa
    assert par == pytest.approx(seq, rel=1e-13)


def test_dnc_error_names_path():
    blocks = sp.block_diag([directed_cycle(4).matrix, directed_cycle(4).matrix])
    p = StochasticMatrix(blocks)
    with pytest.raises(DncError) as err:
        kemeny_dnc(p, pi=np.full(8, 1 / 8), cfg=DncConfig(base_size=2))
    assert err.value.path == "root"
    assert "root" in str(err.value)


def test_dnc_drop_tol_and_validate():
    p = random_irreducible(300, density=0.02, seed=6)
    ref = kemeny_direct(p).kappa
    r = kemeny_dnc(p, cfg=DncConfig(base_size=32, validate=True))
    assert r.kappa == pytest.approx(ref, rel=1e-10)
    loose = kemeny_dnc(p, cfg=DncConfig(base_size=32, drop_tol=1e-8))
    assert loose.kappa == pytest.approx(ref, rel=1e-4)


def test_config_validation():
    with pytest.raises(InvalidInputError):
        DncConfig(split="metis")
    with pytest.raises(InvalidInputError):
        DncConfig(solver="qr")
    with pytest.raises(InvalidInputError):
        DncConfig(base_size=1)
    with pytest.raises(InvalidInputError):
        DncConfig(tol=0)


def test_threads_env(monkeypatch):
    monkeypatch.setenv("KEMENY_THREADS", "3")
    assert threads_from_env() == 3
    assert DncConfig().threads == 3
    monkeypatch.setenv("KEMENY_THREADS", "0")
    assert threads_from_env() >= 1
    monkeypatch.setenv("KEMENY_THREADS", "many")
    with pytest.raises(InvalidInputError):
        threads_from_env()
    monkeypatch.delenv("KEMENY_THREADS")
    assert threads_from_env() == 1
