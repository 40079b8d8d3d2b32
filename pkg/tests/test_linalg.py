import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose
from scipy.special import multigammaln

from conftest import random_psd
from singular_gbs.errors import DegenerateSpectrum, DomainError
from singular_gbs.linalg import (
    PsdRankQ,
    moore_penrose,
    mv_gamma_ln,
    orthogonal_complement,
    psd_power,
    stiefel_log_volume,
    thin_svd,
)

shapes = st.tuples(st.integers(1, 5), st.integers(1, 5), st.integers(0, 2**32 - 1))


@settings(max_examples=60, deadline=None)
@given(shapes)
def test_moore_penrose_conditions(shape):
    n, m, seed = shape
    gen = np.random.default_rng(seed)
    k = int(gen.integers(1, min(n, m) + 1))
    A = gen.standard_normal((n, k)) @ gen.standard_normal((k, m))
    P = moore_penrose(A)
    assert_allclose(A @ P @ A, A, atol=1e-9 * np.abs(A).max())
    assert_allclose(P @ A @ P, P, atol=1e-9 * np.abs(P).max())
    assert_allclose(A @ P, (A @ P).T, atol=1e-9)
    assert_allclose(P @ A, (P @ A).T, atol=1e-9)


def test_moore_penrose_matches_numpy(rng):
    A = rng.standard_normal((4, 2)) @ rng.standard_normal((2, 5))
    assert_allclose(moore_penrose(A), np.linalg.pinv(A, rcond=1e-9), atol=1e-12)


def test_thin_svd_rank_and_signs(rng):
    A = rng.standard_normal((5, 2)) @ rng.standard_normal((2, 4))
    svd = thin_svd(A)
    assert svd.rank == 2
    assert_allclose(svd.matrix(), A, atol=1e-12)
    for col in svd.right.T:
        first = col[np.flatnonzero(np.abs(col) > 1e-12)[0]]
        assert first > 0


def test_thin_svd_rejects_repeated_values():
    with pytest.raises(DegenerateSpectrum):
        thin_svd(np.eye(3))
    assert thin_svd(np.eye(3), require_distinct=False).rank == 3


def test_thin_svd_zero_matrix():
    assert thin_svd(np.zeros((3, 2))).rank == 0


def test_psd_from_matrix_keeps_support(rng):
    T = random_psd(rng, 4, 2)
    back = PsdRankQ.from_matrix(T.matrix())
    assert back.rank == 2
    assert_allclose(back.eigenvalues, T.eigenvalues, rtol=1e-12)
    assert_allclose(back.projector(), T.projector(), atol=1e-12)
    assert_allclose(back.pinv(), np.linalg.pinv(T.matrix()), atol=1e-10)


@pytest.mark.parametrize(
    "A, exc",
    [
        (np.array([[1.0, 2.0], [0.0, 1.0]]), DomainError),
        (np.array([[1.0, 0.0], [0.0, -1.0]]), DomainError),
        (np.zeros((2, 2)), DomainError),
        (np.array([[np.nan, 0.0], [0.0, 1.0]]), DomainError),
    ],
)
def test_psd_from_matrix_rejects(A, exc):
    with pytest.raises(exc):
        PsdRankQ.from_matrix(A)


def test_psd_ties_allowed_but_flagged():
    I = PsdRankQ.scaled_identity(3, 2.0)
    assert not I.distinct
    with pytest.raises(DegenerateSpectrum):
        I.require_distinct()
    assert I.log_pdet == pytest.approx(3 * math.log(2.0))


def test_psd_sorts_eigenvalues():
    T = PsdRankQ(np.eye(3)[:, :2], [1.0, 3.0])
    assert_allclose(T.eigenvalues, [3.0, 1.0])
    assert_allclose(T.vectors[:, 0], [0.0, 1.0, 0.0])


def test_psd_power_roundtrip(rng):
    T = random_psd(rng, 3, 2)
    root = psd_power(T, 0.5).matrix()
    assert_allclose(root @ root, T.matrix(), atol=1e-12)
    assert_allclose(psd_power(T, -1.0).matrix(), T.pinv(), atol=1e-12)


@pytest.mark.parametrize("p, a", [(1, 0.5), (2, 1.0), (3, 2.5), (4, 7.25)])
def test_mv_gamma_matches_scipy(p, a):
    assert mv_gamma_ln(p, a) == pytest.approx(multigammaln(a, p), rel=1e-14)


def test_mv_gamma_domain():
    with pytest.raises(DomainError):
        mv_gamma_ln(3, 0.9)


def test_stiefel_volume_values():
    # conventional volume of V_{1,2} is the circumference 2 pi, of V_{1,3} the area 4 pi
    assert math.exp(stiefel_log_volume(1, 2, conventional=True)) == pytest.approx(2 * math.pi)
    assert math.exp(stiefel_log_volume(1, 3, conventional=True)) == pytest.approx(4 * math.pi)
    assert math.exp(stiefel_log_volume(1, 2)) == pytest.approx(math.pi)
    # O(2) has volume 2 * 2 pi under the conventional normalization
    assert math.exp(stiefel_log_volume(2, 2, conventional=True)) == pytest.approx(4 * math.pi)
    with pytest.raises(DomainError):
        stiefel_log_volume(3, 2)


def test_orthogonal_complement(rng):
    Q = np.linalg.qr(rng.standard_normal((5, 2)))[0]
    C = orthogonal_complement(Q)
    assert C.shape == (5, 3)
    assert_allclose(C.T @ Q, 0, atol=1e-12)
    assert_allclose(C.T @ C, np.eye(3), atol=1e-12)
