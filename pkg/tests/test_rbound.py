import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anisopsido.rbound import (EXACT, MONTE_CARLO, ORACLE, BanachSpaceSpec, Budget, absolute_convex_hull_check,
                               contraction_check, kahane_equivalence_check, property_alpha_check,
                               rademacher_functional, rademacher_mean, rbound_algebra_check, rbound_estimate,
                               rbound_of_range, sign_sum)


def brute_mean(x, space, p):
    """Independent oracle: explicit loop over every sign pattern."""
    x = np.asarray(x, dtype=complex)
    tot = 0.0
    for eps in itertools.product((1.0, -1.0), repeat=len(x)):
        tot += space.norm(np.tensordot(eps, x, axes=1)) ** p
    return (tot / 2 ** len(x)) ** (1 / p)


def rand_c(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


SPACES = [BanachSpaceSpec.euclidean(3), BanachSpaceSpec.lp(3, 3.0), BanachSpaceSpec.lp(2, 1.5).bochner(2, 4.0, 0.5)]


@pytest.mark.parametrize("space", SPACES, ids=["l2", "l3", "bochner"])
@pytest.mark.parametrize("p", [1.0, 2.0, 3.5])
def test_sign_sum_matches_brute_force(space, p):
    rng = np.random.default_rng(0)
    for n in range(1, 7):
        x = rand_c(rng, n, space.total_dim)
        assert rademacher_mean(x, space, p) == pytest.approx(brute_mean(x, space, p), rel=1e-12)


def test_space_norms():
    v = np.array([3.0, 4.0j])
    assert BanachSpaceSpec.euclidean(2).norm(v) == pytest.approx(5.0)
    assert BanachSpaceSpec.lp(2, 3.0).norm(v) == pytest.approx((27 + 64) ** (1 / 3))
    with pytest.raises(ValueError):
        BanachSpaceSpec.lp(2, 1.0)
    with pytest.raises(ValueError):
        BanachSpaceSpec.euclidean(2).norm(np.ones(3))


def test_functional_identity_and_zero():
    rng = np.random.default_rng(1)
    x = rand_c(rng, 3, 4)
    X = BanachSpaceSpec.lp(4, 3.0)
    assert rademacher_functional([np.eye(4)] * 3, x, 3.0, X, X) == pytest.approx(1.0)
    assert rademacher_functional([np.zeros((4, 4))] * 3, x) == 0.0


def test_functional_orthogonal_sign_patterns():
    # sum over eps of ||sum eps_j T_j x_j||^2 = 2^N sum ||T_j x_j||^2
    e = np.eye(2)
    val = rademacher_functional([2 * e, 3 * e], np.array([[1.0, 0.0], [0.0, 1.0]]))
    assert val == pytest.approx(math.sqrt(13 / 2), rel=1e-14)


def test_hilbert_oracle():
    est = rbound_estimate([2 * np.eye(2), 3 * np.eye(2)])
    assert est.method == ORACLE and est.value == pytest.approx(3.0)
    assert rbound_estimate([np.eye(3)], BanachSpaceSpec.lp(3, 3.0), BanachSpaceSpec.lp(3, 3.0)).value == pytest.approx(1.0)
    assert rbound_estimate([np.zeros((2, 2))], budget=Budget(mode="sample")).value == 0.0
    with pytest.raises(ValueError):
        rbound_estimate([np.eye(2)], BanachSpaceSpec.lp(2, 3.0), BanachSpaceSpec.lp(2, 3.0), 2.0, Budget(mode="oracle"))


def test_sampling_below_oracle():
    rng = np.random.default_rng(2)
    fam = [rand_c(rng, 4, 4) for _ in range(5)]
    exact = max(np.linalg.norm(t, 2) for t in fam)
    est = rbound_estimate(fam, budget=Budget(mode="sample", seed=3))
    assert est.method in (EXACT, MONTE_CARLO)
    assert 0.95 * exact <= est.value <= exact * (1 + 1e-12)


def test_scalar_disc_between_R_and_2R():
    R = 3.0
    rng = np.random.default_rng(4)
    alphas = list(R * np.exp(2j * np.pi * rng.random(6)) * np.sqrt(rng.random(6))) + [R]
    X = BanachSpaceSpec.lp(3, 3.0)
    est = rbound_estimate([a * np.eye(3) for a in alphas], X, X, 3.0, Budget(n_max=3, samples=32, seed=1))
    assert R * (1 - 1e-12) <= est.value <= 2 * R


def test_rbound_of_range():
    assert rbound_of_range(lambda g: np.eye(2), [0.1, 0.2]).value == pytest.approx(1.0)
    gam = np.linspace(-1, 1, 9)
    X = BanachSpaceSpec.lp(2, 4.0)
    val = rbound_of_range(lambda g: g * np.eye(2), gam, X, X, 4.0, Budget(n_max=3, samples=16)).value
    assert 1.0 - 1e-12 <= val <= 2.0
    with pytest.raises(ValueError):
        rbound_of_range(lambda g: g, [])


def test_enumerated_estimate_is_monotone():
    rng = np.random.default_rng(5)
    fam = [rand_c(rng, 2, 2) for _ in range(4)]
    X = BanachSpaceSpec.lp(2, 3.0)
    b = Budget(n_max=2, samples=1000, seed=0, mode="sample")
    small = rbound_estimate(fam[:2], X, X, 3.0, b)
    big = rbound_estimate(fam, X, X, 3.0, b)
    assert small.method == EXACT and big.method == EXACT
    assert small.value <= big.value * (1 + 1e-9)


def test_budget_validation():
    with pytest.raises(ValueError):
        Budget(n_max=0)
    with pytest.raises(ValueError):
        Budget(n_max=21)
    with pytest.raises(ValueError):
        Budget(mode="guess")
    with pytest.raises(ValueError):
        rbound_estimate([])
    with pytest.raises(ValueError):
        rbound_estimate([np.eye(2), np.eye(3)])


def test_kahane_trivial():
    rep = kahane_equivalence_check(2.0, 2.0, 20)
    assert rep.min_ratio == pytest.approx(1.0) and rep.max_ratio == pytest.approx(1.0)
    rep = kahane_equivalence_check(1.0, 3.0, 20, n_max=1)
    assert rep.min_ratio == pytest.approx(1.0) and rep.max_ratio == pytest.approx(1.0)


def test_kahane_p1_q2():
    rep = kahane_equivalence_check(1.0, 2.0, 1000, BanachSpaceSpec.euclidean(2), n_max=6, seed=0)
    assert rep.max_ratio <= 1.0 + 1e-12
    assert rep.min_ratio >= 2 ** -0.5


def test_contraction_edges():
    rng = np.random.default_rng(6)
    x = rand_c(rng, 4, 3)
    b = rand_c(rng, 4)
    assert contraction_check(b, b, x).ratio == pytest.approx(1.0)
    assert contraction_check(np.zeros(4), b, x).ratio == 0.0
    with pytest.raises(ValueError):
        contraction_check(2 * b, b, x)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 8), st.sampled_from([1.0, 2.0, 3.0]), st.integers(0, 2**32 - 1))
def test_contraction_property(n, p, seed):
    rng = np.random.default_rng(seed)
    beta = rand_c(rng, n)
    alpha = beta * rng.random(n) * np.exp(2j * np.pi * rng.random(n))
    x = rand_c(rng, n, 3)
    assert contraction_check(alpha, beta, x, p, BanachSpaceSpec.lp(3, 3.0)).passed


def test_property_alpha():
    assert property_alpha_check(BanachSpaceSpec.euclidean(2), 1, 10) == pytest.approx(1.0)
    val = property_alpha_check(BanachSpaceSpec.lp(3, 4.0), 3, 50, seed=1)
    assert 1.0 <= val < math.inf
    with pytest.raises(ValueError):
        property_alpha_check(BanachSpaceSpec.euclidean(2), 9, 1)


def test_algebra_identities():
    I = [np.eye(2)]
    Z = [np.zeros((2, 2))]
    rep = rbound_algebra_check(I, Z)
    assert rep.r_sum == pytest.approx(rep.r_T)
    assert rep.r_prod == 0.0
    rep = rbound_algebra_check(I, I)
    assert rep.r_prod == pytest.approx(1.0) and rep.certified


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_algebra_property_hilbert(seed):
    rng = np.random.default_rng(seed)
    T = [rand_c(rng, 3, 3) for _ in range(3)]
    S = [rand_c(rng, 3, 3) for _ in range(2)]
    rep = rbound_algebra_check(T, S)
    assert rep.sum_ok and rep.prod_ok


def test_absolute_convex_hull():
    rng = np.random.default_rng(7)
    T = [rand_c(rng, 2, 2) for _ in range(3)]
    r_hull, r_T = absolute_convex_hull_check(T)
    assert r_hull <= 2 * r_T


def test_estimates_are_deterministic():
    rng = np.random.default_rng(8)
    fam = [rand_c(rng, 3, 3) for _ in range(6)]
    X = BanachSpaceSpec.lp(3, 3.0)
    b = Budget(n_max=3, samples=8, seed=11)
    assert rbound_estimate(fam, X, X, 3.0, b) == rbound_estimate(fam, X, X, 3.0, b)


def test_sign_sum_validates_block():
    with pytest.raises(ValueError):
        sign_sum(np.ones((2, 4)), BanachSpaceSpec.euclidean(3), 2.0)
