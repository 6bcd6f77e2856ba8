import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kemeny.direct import kemeny_direct
from kemeny.dnc import gamma_resolvent
from kemeny.exceptions import InvalidInputError, ReducibleChainError
from kemeny.generators import directed_cycle, random_periodic, random_rowsum_chain, random_stochastic
from kemeny.markov import StochasticMatrix, build_from_graph, stationary
from kemeny.structured import (
    PeriodicChain,
    assemble_periodic,
    constant_rowsums,
    detect_period,
    extremal_periodic,
    kemeny_bipartite,
    kemeny_constant_rowsum,
    kemeny_kronecker,
    kemeny_periodic,
    kemeny_periodic_decomposition_check,
    kronecker_gamma,
    periodic_from_matrix,
)


def _uniform_blocks(sizes):
    d = len(sizes)
    return tuple(np.full((sizes[(i + 1) % d], sizes[i]), 1.0 / sizes[i]) for i in range(d))


def test_assemble_examples():
    assert np.array_equal(assemble_periodic([[[1.0]], [[1.0]]]).toarray(), [[0, 1], [1, 0]])
    cyc = assemble_periodic([[[1.0]]] * 3).toarray()
    assert np.array_equal(np.linalg.matrix_power(cyc, 3), np.eye(3))
    assert kemeny_direct(cyc).kappa == pytest.approx(1.0)


def test_complete_bipartite_is_block_cyclic():
    adj = np.zeros((5, 5))
    adj[:2, 2:] = adj[2:, :2] = 1
    p = build_from_graph(adj)
    chain, perm = periodic_from_matrix(p)
    assert chain.d == 2 and sorted(chain.sizes) == [2, 3]
    q = assemble_periodic(chain).toarray()
    assert np.allclose(q, p.toarray()[np.ix_(perm, perm)])


def test_periodic_chain_validation():
    with pytest.raises(InvalidInputError):
        PeriodicChain((np.ones((2, 2)) / 2,))
    with pytest.raises(InvalidInputError):
        PeriodicChain((np.ones((2, 3)) / 3, np.ones((3, 3)) / 3))
    with pytest.raises(InvalidInputError):
        PeriodicChain((np.ones((1, 2)), np.ones((2, 1))))


@pytest.mark.parametrize("sizes", [(3, 3), (2, 5, 4), (4, 1, 2, 3), (2, 2, 2, 2, 2)])
def test_uniform_blocks(sizes):
    chain = PeriodicChain(_uniform_blocks(sizes))
    n, d = sum(sizes), len(sizes)
    assert kemeny_periodic(chain).kappa == pytest.approx(n - (d + 1) / 2, abs=1e-10)
    assert kemeny_direct(assemble_periodic(chain)).kappa == pytest.approx(n - (d + 1) / 2, abs=1e-10)


def test_bipartite_formula():
    chain = random_periodic(2, sizes=(4, 7), seed=3)
    p = assemble_periodic(chain)
    r = kemeny_bipartite(p, 4)
    a21, a12 = chain.blocks
    expect = 2 * kemeny_direct(a12 @ a21).kappa - 4 + 7 + 0.5
    assert r.kappa == pytest.approx(expect, abs=1e-10)
    assert r.kappa == pytest.approx(kemeny_direct(p).kappa, abs=1e-9)
    assert r.diagnostics["structure"] == "bipartite"
    with pytest.raises(InvalidInputError):
        kemeny_bipartite(random_stochastic(6, seed=0), 3)


@settings(max_examples=30, deadline=None)
@given(d=st.integers(2, 5), seed=st.integers(0, 2**31))
def test_periodic_matches_direct(d, seed):
    chain = random_periodic(d, max_size=6, density=0.6, seed=seed)
    direct = kemeny_direct(assemble_periodic(chain)).kappa
    assert kemeny_periodic(chain).kappa == pytest.approx(direct, rel=1e-9)


def test_periodic_d3_small_sizes():
    chain = random_periodic(3, sizes=(2, 4, 3), seed=9)
    assert kemeny_periodic(chain).kappa == pytest.approx(
        kemeny_direct(assemble_periodic(chain)).kappa, abs=1e-9)


def test_periodic_reducible_product():
    a = np.eye(2)
    with pytest.raises(ReducibleChainError):
        kemeny_periodic(PeriodicChain((a, a)))


@pytest.mark.parametrize("d", [2, 3, 4])
def test_decomposition_check(d):
    chain = random_periodic(d, max_size=5, seed=d)
    kp, k1, k2, gamma = kemeny_periodic_decomposition_check(chain)
    assert gamma == pytest.approx(0.5, abs=1e-9)
    assert kp - k1 - k2 == pytest.approx(0.5, abs=1e-9)


def test_decomposition_recursion_d4():
    chain = random_periodic(4, max_size=5, seed=7)
    kp = kemeny_direct(assemble_periodic(chain)).kappa
    shifts = sum(kemeny_direct(chain.product(start=s)).kappa for s in range(1, 5))
    assert kp == pytest.approx(shifts + 1.5, abs=1e-9)


def test_decomposition_unit_blocks():
    kp, k1, k2, gamma = kemeny_periodic_decomposition_check(PeriodicChain(((np.ones((1, 1)),) * 3)))
    assert (kp, k1, k2) == pytest.approx((1.0, 0.0, 0.5), abs=1e-12)
    assert gamma == pytest.approx(0.5, abs=1e-12)


def test_kronecker_two_state():
    a = np.array([[0.7, 0.3], [0.1, 0.9]])
    r = kemeny_kronecker(a, a)
    assert r.kappa == pytest.approx(kemeny_direct(np.kron(a, a)).kappa, abs=1e-9)
    # the closed-form correction agrees with the resolvent expression
    pi = stationary(np.kron(a, a))
    assert kronecker_gamma(a) == pytest.approx(gamma_resolvent(np.kron(a, a), pi, 2), abs=1e-9)


def test_kronecker_uniform():
    u = np.full((2, 2), 0.5)
    assert kemeny_kronecker(u, u).kappa == pytest.approx(3.0, abs=1e-12)


def test_kronecker_gamma_independent_of_b():
    rng = np.random.default_rng(4)
    a = random_stochastic(4, seed=rng)
    g = kronecker_gamma(a)
    for size in (2, 3, 5):
        b = random_stochastic(size, seed=rng)
        p = np.kron(a.toarray(), b.toarray())
        assert gamma_resolvent(p, stationary(p), size) == pytest.approx(g, abs=1e-10)


def test_kronecker_reducible():
    with pytest.raises(ReducibleChainError):
        kemeny_kronecker(directed_cycle(2), directed_cycle(2))


def test_rowsum_periodic_limit():
    chain = random_periodic(2, sizes=(3, 4), seed=1)
    r = kemeny_constant_rowsum(assemble_periodic(chain), 3)
    assert r.diagnostics["gamma"] == pytest.approx(0.5)
    assert (r.diagnostics["alpha1"], r.diagnostics["alpha2"]) == pytest.approx((0.5, 0.5))


def test_rowsum_instance():
    p = random_rowsum_chain(5, 8, 0.5, 0.25, seed=2)
    r = kemeny_constant_rowsum(p, 5)
    assert r.kappa == pytest.approx(kemeny_direct(p).kappa, abs=1e-9)
    assert r.diagnostics["alpha1"] == pytest.approx(0.6)
    assert stationary(p).pi[:5].sum() == pytest.approx(0.6, abs=1e-12)


def test_rowsum_symmetric_masses():
    p = random_rowsum_chain(4, 6, 0.3, 0.3, seed=5)
    r = kemeny_constant_rowsum(p, 4)
    assert r.diagnostics["alpha1"] == pytest.approx(0.5)
    assert stationary(p).pi[:4].sum() == pytest.approx(0.5, abs=1e-12)


def test_rowsum_detection():
    assert constant_rowsums(random_rowsum_chain(3, 3, 0.2, 0.7, seed=0), 3) == pytest.approx((0.2, 0.7))
    assert constant_rowsums(random_stochastic(6, seed=0), 3) is None
    with pytest.raises(InvalidInputError):
        kemeny_constant_rowsum(random_stochastic(6, seed=0), 3)


@pytest.mark.parametrize("d,sizes,expect", [
    (2, (2, 2), 1.5),
    (3, (2, 3, 2), 3.5),
    (4, (1, 1, 1, 1), 1.5),
    (5, (3, 4, 3, 5, 6), 21 - 8),
])
def test_extremal(d, sizes, expect):
    chain = extremal_periodic(d, sizes)
    n, n1 = sum(sizes), sizes[0]
    assert expect == pytest.approx(n - (d * n1 + 1) / 2)
    assert kemeny_direct(assemble_periodic(chain)).kappa == pytest.approx(expect, abs=1e-10)
    assert kemeny_periodic(chain).kappa == pytest.approx(expect, abs=1e-10)


def test_extremal_rejects_bad_sizes():
    with pytest.raises(InvalidInputError):
        extremal_periodic(3, (3, 2, 4))
    with pytest.raises(InvalidInputError):
        extremal_periodic(1, (3,))


@settings(max_examples=25, deadline=None)
@given(d=st.integers(2, 5), seed=st.integers(0, 2**31))
def test_extremal_is_lower_bound(d, seed):
    rng = np.random.default_rng(seed)
    n1 = int(rng.integers(1, 5))
    sizes = [n1] + [int(s) for s in rng.integers(n1, 8, d - 1)]
    chain = random_periodic(d, sizes=sizes, density=0.5, seed=rng)
    n = sum(sizes)
    assert kemeny_periodic(chain).kappa >= n - (d * n1 + 1) / 2 - 1e-9


@settings(max_examples=25, deadline=None)
@given(d=st.integers(2, 5), seed=st.integers(0, 2**31))
def test_detect_period_roundtrip(d, seed):
    chain = random_periodic(d, max_size=5, seed=seed)
    p = assemble_periodic(chain)
    perm = np.random.default_rng(seed).permutation(p.n)
    q = StochasticMatrix(p.matrix[perm][:, perm])
    found, labels = detect_period(q)
    assert found == d
    rebuilt, order = periodic_from_matrix(q)
    assert kemeny_periodic(rebuilt).kappa == pytest.approx(kemeny_direct(p).kappa, rel=1e-9)
    assert np.array_equal(np.sort(order), np.arange(p.n))


def test_detect_aperiodic():
    assert detect_period(random_stochastic(5, seed=1))[0] == 1
    with pytest.raises(InvalidInputError):
        periodic_from_matrix(random_stochastic(5, seed=1))
