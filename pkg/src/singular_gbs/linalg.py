"""Dense linear algebra on small matrices.

Thin singular value decompositions, rank-q positive semidefinite matrices
stored through their nonsingular eigendecomposition, the Moore-Penrose
inverse, fractional powers on the support, the multivariate gamma function
and Stiefel manifold volumes.

Every factorization applies the same sign convention: the first nonzero
entry of each right singular vector (or eigenvector) is positive.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import DegenerateSpectrum, DomainError

RANK_TOL = 1e-9
DEGENERATE_TOL = 1e-8

__all__ = [
    "RANK_TOL",
    "DEGENERATE_TOL",
    "ThinSvd",
    "PsdRankQ",
    "thin_svd",
    "moore_penrose",
    "psd_power",
    "mv_gamma_ln",
    "stiefel_log_volume",
    "orthogonal_complement",
]


def _frozen(a):
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


def _sign_flips(vectors, tol=1e-12):
    """Return +-1 per column so the first nonzero entry becomes positive."""
    signs = np.ones(vectors.shape[1])
    for j in range(vectors.shape[1]):
        col = vectors[:, j]
        nz = np.flatnonzero(np.abs(col) > tol)
        if nz.size and col[nz[0]] < 0:
            signs[j] = -1.0
    return signs


def _check_finite(A):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise DomainError(f"expected a 2-d matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise DomainError("matrix has non-finite entries")
    return A


def _check_distinct(values, what):
    values = np.asarray(values)
    if values.size > 1:
        gaps = -np.diff(values)
        if np.min(gaps) < DEGENERATE_TOL * values[0]:
            raise DegenerateSpectrum(
                f"{what} are not distinct: {values.tolist()}"
            )


@dataclass(frozen=True)
class ThinSvd:
    """Nonsingular part ``left @ diag(values) @ right.T`` of an SVD.

    ``left`` is n x q and ``right`` is m x q, both with orthonormal columns;
    ``values`` are positive and sorted in decreasing order.
    """

    left: np.ndarray
    values: np.ndarray
    right: np.ndarray

    @property
    def rank(self) -> int:
        return self.values.size

    @property
    def shape(self) -> tuple[int, int]:
        return (self.left.shape[0], self.right.shape[0])

    def matrix(self) -> np.ndarray:
        return (self.left * self.values) @ self.right.T


@dataclass(frozen=True)
class PsdRankQ:
    """Rank-q positive semidefinite m x m matrix ``V diag(lam) V.T``.

    ``vectors`` is m x q with orthonormal columns and ``eigenvalues`` are
    positive, nonincreasing.  Ties are permitted (isotropic parameter
    matrices need them); use :attr:`distinct` or :meth:`require_distinct`
    where a point must lie on the distinct-eigenvalue manifold.
    """

    vectors: np.ndarray
    eigenvalues: np.ndarray

    def __post_init__(self):
        vec = _frozen(self.vectors)
        lam = _frozen(np.atleast_1d(self.eigenvalues))
        if vec.ndim != 2 or vec.shape[1] != lam.size:
            raise DomainError("vectors must be m x q with q eigenvalues")
        if lam.size == 0 or np.any(lam <= 0) or not np.all(np.isfinite(lam)):
            raise DomainError("eigenvalues must be finite and strictly positive")
        if np.any(np.diff(lam) > 0):
            order = np.argsort(-lam, kind="stable")
            lam = _frozen(lam[order])
            vec = _frozen(vec[:, order])
        if not np.allclose(vec.T @ vec, np.eye(lam.size), atol=1e-10):
            raise DomainError("eigenvectors are not orthonormal")
        object.__setattr__(self, "vectors", vec)
        object.__setattr__(self, "eigenvalues", lam)

    @classmethod
    def from_matrix(cls, A, rank_tol=RANK_TOL, psd_tol=1e-8, require_distinct=False):
        """Eigendecompose a dense symmetric PSD matrix, keeping its support."""
        A = _check_finite(A)
        if A.shape[0] != A.shape[1]:
            raise DomainError(f"matrix must be square, got {A.shape}")
        scale = max(np.max(np.abs(A)), np.finfo(float).tiny)
        if np.max(np.abs(A - A.T)) > psd_tol * scale:
            raise DomainError("matrix is not symmetric")
        lam, vec = np.linalg.eigh((A + A.T) / 2)
        lam, vec = lam[::-1], vec[:, ::-1]
        if lam[0] <= 0:
            raise DomainError("matrix has no positive eigenvalue")
        if lam[-1] < -psd_tol * lam[0]:
            raise DomainError(f"matrix is not positive semidefinite (min eigenvalue {lam[-1]:.3g})")
        keep = lam > rank_tol * lam[0]
        lam, vec = lam[keep], vec[:, keep]
        vec = vec * _sign_flips(vec)
        if require_distinct:
            _check_distinct(lam, "eigenvalues")
        return cls(vec, lam)

    @classmethod
    def from_eigen(cls, vectors, eigenvalues):
        vectors = np.asarray(vectors, dtype=float)
        if vectors.ndim == 1:
            vectors = vectors[:, None]
        return cls(vectors * _sign_flips(vectors), eigenvalues)

    @classmethod
    def scaled_identity(cls, m, value=1.0):
        return cls(np.eye(m), np.full(m, float(value)))

    @property
    def dim(self) -> int:
        return self.vectors.shape[0]

    @property
    def rank(self) -> int:
        return self.eigenvalues.size

    @property
    def distinct(self) -> bool:
        try:
            _check_distinct(self.eigenvalues, "eigenvalues")
        except DegenerateSpectrum:
            return False
        return True

    def require_distinct(self) -> "PsdRankQ":
        _check_distinct(self.eigenvalues, "eigenvalues")
        return self

    @property
    def log_pdet(self) -> float:
        """Log of the product of the nonzero eigenvalues."""
        return float(np.sum(np.log(self.eigenvalues)))

    def projector(self) -> np.ndarray:
        return self.vectors @ self.vectors.T

    def matrix(self) -> np.ndarray:
        m = (self.vectors * self.eigenvalues) @ self.vectors.T
        return (m + m.T) / 2

    def pinv(self) -> np.ndarray:
        return psd_power(self, -1.0).matrix()


def thin_svd(A, rank_tol=RANK_TOL, require_distinct=True) -> ThinSvd:
    """Nonsingular part of the singular value decomposition of ``A``.

    Only singular triplets with value above ``rank_tol`` times the largest
    value are retained.

    Raises
    ------
    DegenerateSpectrum
        If ``require_distinct`` and two retained values differ by less than
        ``1e-8`` times the largest.
    """
    A = _check_finite(A)
    u, s, vt = np.linalg.svd(A, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        n, m = A.shape
        return ThinSvd(_frozen(np.zeros((n, 0))), _frozen(np.zeros(0)), _frozen(np.zeros((m, 0))))
    keep = s > rank_tol * s[0]
    u, s, v = u[:, keep], s[keep], vt[keep].T
    if require_distinct:
        _check_distinct(s, "singular values")
    flips = _sign_flips(v)
    return ThinSvd(_frozen(u * flips), _frozen(s), _frozen(v * flips))


def moore_penrose(A, rank_tol=RANK_TOL) -> np.ndarray:
    """Moore-Penrose inverse ``Q D^{-1} H'`` built from the thin SVD."""
    svd = thin_svd(A, rank_tol, require_distinct=False)
    return (svd.right / svd.values) @ svd.left.T


def psd_power(A: PsdRankQ, exponent: float) -> PsdRankQ:
    """Raise the nonzero eigenvalues of ``A`` to ``exponent``.

    Exponent 1/2 gives the PSD square root, -1 the Moore-Penrose inverse
    and -2 the pseudo-inverse of the square.
    """
    return PsdRankQ(A.vectors, A.eigenvalues ** float(exponent))


def mv_gamma_ln(p: int, a: float) -> float:
    """Log of the multivariate gamma function ``Gamma_p[a]``."""
    if p < 1 or int(p) != p:
        raise DomainError(f"p must be a positive integer, got {p}")
    if not a > (p - 1) / 2:
        raise DomainError(f"multivariate gamma needs a > (p-1)/2, got a={a}, p={p}")
    i = np.arange(p)
    return float(p * (p - 1) / 4 * np.log(np.pi) + np.sum(gammaln(a - i / 2)))


def stiefel_log_volume(p: int, n: int, conventional: bool = False) -> float:
    """Log of ``pi^{pn/2} / Gamma_p[n/2]``, the Stiefel integral over V_{p,n}.

    With ``conventional=True`` the value gains ``p log 2``, giving the
    volume of the unnormalized invariant measure (2 pi for the unit circle).
    """
    if p > n:
        raise DomainError(f"Stiefel manifold V_(p,n) needs p <= n, got p={p}, n={n}")
    out = p * n / 2 * np.log(np.pi) - mv_gamma_ln(p, n / 2)
    if conventional:
        out += p * np.log(2.0)
    return float(out)


def orthogonal_complement(Q) -> np.ndarray:
    """Orthonormal basis of the complement of the column space of ``Q``."""
    Q = np.asarray(Q, dtype=float)
    u, _, _ = np.linalg.svd(np.eye(Q.shape[0]) - Q @ Q.T)
    return u[:, : Q.shape[0] - Q.shape[1]]
