import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kemeny.direct import kemeny_direct, kemeny_eig, kemeny_product_identity_check
from kemeny.exceptions import InvalidInputError, ReducibleChainError
from kemeny.generators import directed_cycle, random_irreducible, random_stochastic, uniform_chain
from kemeny.markov import stationary

A, B = 0.3, 0.1
TWO_STATE = [[1 - A, A], [B, 1 - B]]


@pytest.mark.parametrize("n", [2, 3, 17, 64])
def test_uniform(n):
    assert kemeny_direct(uniform_chain(n)).kappa == pytest.approx(n - 1, abs=1e-10)
    assert kemeny_eig(uniform_chain(n)).kappa == pytest.approx(n - 1, abs=1e-10)


@pytest.mark.parametrize("m", [2, 3, 10, 101])
def test_cycle(m):
    assert kemeny_direct(directed_cycle(m)).kappa == pytest.approx((m - 1) / 2, abs=1e-12)


def test_two_state_closed_form():
    r = kemeny_direct(TWO_STATE)
    assert r.kappa == pytest.approx(1 / (A + B), abs=1e-14)
    assert r.method == "direct" and r.n == 2 and float(r) == r.kappa


def test_single_state():
    assert kemeny_direct([[1.0]]).kappa == pytest.approx(0.0, abs=1e-15)
    assert kemeny_eig([[1.0]]).kappa == 0.0


def test_eig_three_cycle():
    w = np.exp(2j * np.pi / 3)
    hand = (1 / (1 - w) + 1 / (1 - w.conjugate())).real
    assert hand == pytest.approx(1.0)
    assert kemeny_eig(directed_cycle(3)).kappa == pytest.approx(hand, abs=1e-12)


def test_general_g_h_invariance():
    p = random_irreducible(60, density=0.1, seed=4)
    pi = stationary(p)
    ref = kemeny_direct(p).kappa
    rng = np.random.default_rng(0)
    for _ in range(5):
        g = rng.random(60) + 0.1
        h = rng.standard_normal(60)
        h /= h @ g
        assert kemeny_direct(p, h=h, g=g, pi=pi).kappa == pytest.approx(ref, rel=1e-9)
    assert kemeny_direct(p, h=pi.pi).kappa == pytest.approx(ref, rel=1e-12)


def test_invalid_h_g():
    p = uniform_chain(4)
    with pytest.raises(InvalidInputError):
        kemeny_direct(p, h=np.ones(4))
    with pytest.raises(InvalidInputError):
        kemeny_direct(p, h=np.array([1.0, -1.0, 0.5, -0.5]), g=np.array([1.0, 0, 0, 0]))
    with pytest.raises(InvalidInputError):
        kemeny_direct(uniform_chain(5), n_dense=4)


def test_eig_rejects_reducible():
    with pytest.raises(ReducibleChainError):
        kemeny_eig(np.eye(3))


def test_refinement_does_not_change_well_conditioned_value():
    p = random_irreducible(150, density=0.05, seed=9)
    a = kemeny_direct(p, refine=True).kappa
    b = kemeny_direct(p, refine=False).kappa
    assert a == pytest.approx(b, rel=1e-11)


@settings(max_examples=25, deadline=None)
@given(n=st.integers(2, 120), seed=st.integers(0, 2**31))
def test_direct_matches_eig(n, seed):
    p = random_irreducible(n, density=0.08, seed=seed)
    d = kemeny_direct(p).kappa
    e = kemeny_eig(p).kappa
    assert abs(d - e) <= 1e-8 * max(1.0, abs(d))


@settings(max_examples=25, deadline=None)
@given(n=st.integers(2, 40), seed=st.integers(0, 2**31))
def test_kappa_lower_bound(n, seed):
    # the non-unit eigenvalues lie in the unit disc, so each term has real part >= 1/2
    p = random_irreducible(n, density=0.2, seed=seed)
    assert kemeny_direct(p).kappa >= (n - 1) / 2 - 1e-9


def test_product_identity_square():
    rng = np.random.default_rng(1)
    for _ in range(5):
        a = random_stochastic(6, seed=rng).toarray()
        b = random_stochastic(6, seed=rng).toarray()
        kab, kba = kemeny_product_identity_check(a, b)
        assert abs(kab - kba) <= 1e-9


def test_product_identity_rectangular():
    rng = np.random.default_rng(2)
    a = rng.random((2, 4))
    a /= a.sum(axis=1, keepdims=True)
    b = rng.random((4, 2))
    b /= b.sum(axis=1, keepdims=True)
    kab, kba = kemeny_product_identity_check(a, b)
    assert kba - kab == pytest.approx(2.0, abs=1e-9)
    assert kemeny_product_identity_check([[1.0]], [[1.0]]) == pytest.approx((0.0, 0.0), abs=1e-15)


def test_product_identity_shape_error():
    with pytest.raises(InvalidInputError):
        kemeny_product_identity_check(np.ones((2, 3)) / 3, np.ones((2, 3)) / 3)
