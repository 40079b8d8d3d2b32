import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from conftest import random_orthonormal, random_psd, shared_pair
from singular_gbs.errors import DomainError, SignError
from singular_gbs.jacobians import (
    PsdRank,
    RankRect,
    bs_log_jacobian,
    bs_transform,
    congruence_log_jacobian,
    difference_log_jacobian,
    difference_transform,
    g_factor,
    g_factor_ln,
    g_factor_ln_batch,
    numeric_manifold_jacobian,
    numeric_manifold_log_jacobian,
    psd_eigen_log_factor,
)
from singular_gbs.linalg import PsdRankQ


# -- G factor ----------------------------------------------------------------------


@pytest.mark.parametrize(
    "values, n, m, expected, sign",
    [
        ([4.0], 1, 1, math.log(1.25), 1.0),
        ([2.0], 2, 2, math.log(0.375), 1.0),
        ([0.5], 1, 2, math.log(3.0), -1.0),
        ([3.0, 2.0], 2, 2, math.log((4 / 3) * 1.5 * (5 / 6)), 1.0),
        ([], 3, 3, 0.0, 1.0),
    ],
)
def test_g_factor_frozen_values(values, n, m, expected, sign):
    for form in ("reciprocal", "direct"):
        out, sgn = g_factor(values, n, m, form)
        assert out == pytest.approx(expected, abs=1e-14)
        assert sgn == sign


values = st.lists(st.floats(1e-3, 1e3), min_size=1, max_size=4)


@settings(max_examples=200, deadline=None)
@given(values, st.integers(0, 3), st.integers(0, 3))
def test_g_forms_agree(v, dn, dm):
    q = len(v)
    n, m = q + dn, q + dm
    v = np.asarray(v)
    if np.any(np.abs(np.log(v)) < 1e-6):
        return
    pair = np.outer(v, v)[np.triu_indices(q, 1)]
    if np.any(np.abs(np.log(pair)) < 1e-6):
        return
    a, sa = g_factor(v, n, m, "reciprocal")
    b, sb = g_factor(v, n, m, "direct")
    assert sa == sb
    assert a == pytest.approx(b, abs=1e-9 * max(1.0, abs(a)))


def test_g_factor_order_invariant_and_batch(rng):
    v = np.exp(rng.uniform(-2, 2, (20, 3)))
    batch = g_factor_ln_batch(v, 4, 5)
    for row, ref in zip(v, batch):
        assert g_factor_ln(row[::-1], 4, 5) == pytest.approx(ref, abs=1e-12)


def test_g_factor_zero_and_errors():
    assert g_factor([1.0], 2, 2) == (-math.inf, 0.0)
    assert g_factor([2.0, 0.5], 2, 2) == (-math.inf, 0.0)
    # with n + m = 2q the single-value terms drop out, so a unit value is harmless
    assert g_factor([1.0], 1, 1)[0] == pytest.approx(math.log(2.0))
    with pytest.raises(DomainError):
        g_factor([2.0, 3.0, 4.0], 2, 2)
    with pytest.raises(DomainError):
        g_factor([-1.0], 2, 2)
    with pytest.raises(DomainError):
        g_factor([2.0], 2, 2, form="other")
    with pytest.raises(SignError):
        g_factor_ln([0.5], 1, 2, strict=True)


# -- Jacobians against finite differences -----------------------------------------------


def _rank_p(rng, n, m, p, lo=0.3, hi=3.0, basis=None):
    while True:
        d = np.sort(np.exp(rng.uniform(np.log(lo), np.log(hi), p)))[::-1]
        if np.all(np.abs(np.log(d)) > 0.1) and (p == 1 or np.min(-np.diff(np.log(d))) > 0.1):
            break

    Q = random_orthonormal(rng, m, p) if basis is None else basis
    return (random_orthonormal(rng, n, p) * d) @ Q.T


@pytest.mark.parametrize("n, m, p", [(1, 1, 1), (2, 3, 1), (3, 2, 2), (4, 3, 2), (3, 3, 3)])
def test_difference_jacobian_matches_finite_differences(rng, n, m, p):
    W = _rank_p(rng, n, m, p)
    fd = numeric_manifold_log_jacobian(difference_transform, W, RankRect(n, m, p), richardson=True)
    assert difference_log_jacobian(W, n, m, p) == pytest.approx(fd, abs=1e-7)


@pytest.mark.parametrize("n, m, s", [(1, 1, 1), (3, 2, 1), (3, 2, 2), (4, 3, 2), (2, 3, 3), (1, 3, 2)])
def test_bs_jacobian_matches_finite_differences(rng, n, m, s):
    Xi, beta = shared_pair(rng, m, s)
    Delta = PsdRankQ(beta.vectors, np.sqrt(beta.eigenvalues))
    p = min(n, s)
    W = _rank_p(rng, n, m, p, basis=beta.vectors @ random_orthonormal(rng, s, p))
    V = W @ Delta.matrix()
    manifold = RankRect(n, m, p, row_space=beta.vectors)
    fd = numeric_manifold_log_jacobian(lambda X: bs_transform(X, Delta, Xi, composed=True), V, manifold,
                                       richardson=True)
    assert bs_log_jacobian(V, Delta, Xi, n) == pytest.approx(fd, abs=1e-6)


def test_ambient_column_dim_is_wrong_on_singular_support(rng):
    Xi, beta = shared_pair(rng, 3, 2)
    Delta = PsdRankQ(beta.vectors, np.sqrt(beta.eigenvalues))
    V = _rank_p(rng, 3, 3, 2, basis=beta.vectors @ random_orthonormal(rng, 2, 2)) @ Delta.matrix()
    fd = numeric_manifold_log_jacobian(lambda X: bs_transform(X, Delta, Xi, composed=True), V,
                                       RankRect(3, 3, 2, row_space=beta.vectors))
    assert bs_log_jacobian(V, Delta, Xi, column_dim="support") == pytest.approx(fd, abs=1e-6)
    assert abs(bs_log_jacobian(V, Delta, Xi, column_dim="ambient") - fd) > 1e-2


def test_verbatim_and_composed_maps(rng):
    # identical when rank V equals rank Delta
    Xi, beta = shared_pair(rng, 3, 3)
    Delta = PsdRankQ(beta.vectors, np.sqrt(beta.eigenvalues))
    V = rng.standard_normal((4, 3))
    assert_allclose(bs_transform(V, Delta, Xi), bs_transform(V, Delta, Xi, composed=True), atol=1e-12)
    # identical for an isotropic scale of any rank
    iso = PsdRankQ.scaled_identity(3, 1.7)
    V = rng.standard_normal((1, 3))
    assert_allclose(bs_transform(V, iso), bs_transform(V, iso, composed=True), atol=1e-12)
    # differ for a rank-deficient V and a non-isotropic scale
    assert np.linalg.norm(bs_transform(V, Delta) - bs_transform(V, Delta, composed=True)) > 1e-3


def test_psd_eigen_factor_frozen():
    lam = np.array([3.0, 1.0])
    expected = -2 * math.log(2) + 1 * math.log(3.0) + math.log(2.0)
    assert psd_eigen_log_factor(lam, 3) == pytest.approx(expected, abs=1e-15)
    with pytest.raises(DomainError):
        psd_eigen_log_factor([1.0, 3.0], 3)


@pytest.mark.parametrize("m, p", [(2, 1), (2, 2), (3, 1), (3, 2), (3, 3)])
def test_congruence_jacobian_matches_finite_differences(rng, m, p):
    T = random_psd(rng, m, p, 0.5, 3.0)
    C = rng.standard_normal((m, m)) + 2 * np.eye(m)
    fd = numeric_manifold_log_jacobian(lambda X: C.T @ X @ C, T.matrix(), PsdRank(m, p), richardson=True)
    assert congruence_log_jacobian(T, C) == pytest.approx(fd, abs=1e-7)
    if p == m:
        assert congruence_log_jacobian(T, C) == pytest.approx((m + 1) * np.linalg.slogdet(C)[1], abs=1e-12)


def test_identity_map_has_unit_jacobian(rng):
    X = _rank_p(rng, 3, 3, 2)
    assert numeric_manifold_jacobian(lambda A: A, X, RankRect(3, 3, 2)) == pytest.approx(1.0, abs=1e-8)


def test_fd_step_and_manifold_checks(rng):
    X = _rank_p(rng, 3, 3, 2)
    with pytest.raises(DomainError):
        numeric_manifold_log_jacobian(lambda A: A, X, RankRect(3, 3, 1))
    with pytest.raises(DomainError):
        numeric_manifold_log_jacobian(lambda A: A, X, RankRect(3, 3, 2), step=1.0)


def test_threads_give_same_answer(rng):
    W = _rank_p(rng, 3, 2, 2)
    a = numeric_manifold_log_jacobian(difference_transform, W, RankRect(3, 2, 2))
    b = numeric_manifold_log_jacobian(difference_transform, W, RankRect(3, 2, 2), threads=3)
    assert a == b
