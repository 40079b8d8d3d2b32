import numpy as np
import pytest

from singular_gbs.linalg import PsdRankQ

ACCEPTANCE_LINES = []


def random_orthonormal(rng, m, k):
    q, r = np.linalg.qr(rng.standard_normal((m, m)))
    return (q * np.sign(np.diag(r)))[:, :k]


def random_psd(rng, m, k=None, lo=0.5, hi=2.0, basis=None):
    """Rank-k PSD matrix with log-uniform eigenvalues in [lo, hi]."""
    k = m if k is None else k
    Q = random_orthonormal(rng, m, k) if basis is None else basis
    lam = np.sort(np.exp(rng.uniform(np.log(lo), np.log(hi), k)))[::-1]
    return PsdRankQ.from_eigen(Q, lam)


def shared_pair(rng, m, s, lo=0.5, hi=2.0):
    """Shape and scale parameters sharing a random s-dimensional support."""
    P = random_orthonormal(rng, m, s)
    return random_psd(rng, m, s, lo, hi, basis=P), random_psd(rng, m, s, lo, hi, basis=P)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
