"""Jacobians of the singular Birnbaum-Saunders matrix transformations.

The common building block is the G factor, a product over the (squared)
singular values or eigenvalues ``v_1 > ... > v_q`` available in two
algebraically equal forms::

    reciprocal: prod (1 - 1/v_i)^(n+m-2q) (1 + 1/v_i) prod_{i<j} (1 - 1/(v_i v_j))
    direct:     prod v_i^-(n+m-q) (v_i - 1)^(n+m-2q) (1 + v_i) prod_{i<j} (v_i v_j - 1)

Both can be negative when some ``v_i < 1``.  A Jacobian is a magnitude, so
the functions here return ``log|G|`` and report the sign separately.

``numeric_manifold_jacobian`` is an independent finite-difference oracle:
it pushes an orthonormal tangent basis through a map by central
differences along a rank-preserving retraction and returns the volume
scaling ``sqrt(det(J^T J))``.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DomainError, RankDrop, SignError
from .linalg import RANK_TOL, PsdRankQ, moore_penrose, psd_power, thin_svd

__all__ = [
    "g_factor",
    "g_factor_ln",
    "g_factor_ln_batch",
    "difference_transform",
    "bs_transform",
    "difference_log_jacobian",
    "bs_log_jacobian",
    "psd_eigen_log_factor",
    "congruence_log_jacobian",
    "RankRect",
    "PsdRank",
    "numeric_manifold_jacobian",
    "numeric_manifold_log_jacobian",
]

FORMS = ("reciprocal", "direct")


def g_factor(values, n: int, m: int, form: str = "reciprocal") -> tuple[float, float]:
    """Return ``(log|G|, sign(G))`` for the G factor of ``values``.

    ``values`` are the squared singular values (or eigenvalues) entering
    the product; they are sorted internally, so the order of the input does
    not matter.  A value equal to one makes ``G`` vanish whenever
    ``n + m > 2q``; the result is then ``(-inf, 0.0)``.
    """
    if form not in FORMS:
        raise DomainError(f"form must be one of {FORMS}, got {form!r}")
    v = np.sort(np.atleast_1d(np.asarray(values, dtype=float)))[::-1]
    q = v.size
    if q == 0:
        return 0.0, 1.0
    if np.any(~np.isfinite(v)) or np.any(v <= 0):
        raise DomainError(f"G factor values must be finite and positive, got {v.tolist()}")
    e = n + m - 2 * q
    if e < 0:
        raise DomainError(f"G factor needs n + m >= 2q, got n={n}, m={m}, q={q}")
    iu = np.triu_indices(q, 1)
    pair = v[iu[0]] * v[iu[1]]

    sign = 1.0
    if e > 0:
        if np.any(v == 1.0):
            return -np.inf, 0.0
        if e % 2 == 1:
            sign *= np.prod(np.sign(v - 1.0))
    if np.any(pair == 1.0):
        return -np.inf, 0.0
    sign *= np.prod(np.sign(pair - 1.0))

    with np.errstate(divide="ignore"):
        if form == "reciprocal":
            inv = 1.0 / v
            out = np.sum(np.log1p(inv))
            if e:
                out += e * np.sum(np.log(np.abs(-np.expm1(-np.log(v)))))
            out += np.sum(np.log(np.abs(-np.expm1(-np.log(pair)))))
        else:
            out = -(n + m - q) * np.sum(np.log(v)) + np.sum(np.log1p(v))
            if e:
                out += e * np.sum(np.log(np.abs(v - 1.0)))
            out += np.sum(np.log(np.abs(pair - 1.0)))
    return float(out), float(sign)


def g_factor_ln(values, n: int, m: int, form: str = "reciprocal", strict: bool = False) -> float:
    """Log of ``|G|``.  With ``strict`` a negative product raises :class:`SignError`."""
    out, sign = g_factor(values, n, m, form)
    if strict and sign < 0:
        raise SignError(f"G factor is negative for values {np.asarray(values).tolist()}")
    return out


def g_factor_ln_batch(values, n: int, m: int) -> np.ndarray:
    """Vectorized ``log|G|`` (reciprocal form) over the leading axes of ``values``.

    ``values`` has shape ``(..., q)``; entries equal to one give ``-inf``.
    """
    v = np.asarray(values, dtype=float)
    q = v.shape[-1]
    e = n + m - 2 * q
    if e < 0:
        raise DomainError(f"G factor needs n + m >= 2q, got n={n}, m={m}, q={q}")
    iu = np.triu_indices(q, 1)
    with np.errstate(divide="ignore"):
        out = np.sum(np.log1p(1 / v), axis=-1)
        if e:
            out = out + e * np.sum(np.log(np.abs(1 - 1 / v)), axis=-1)
        pair = v[..., iu[0]] * v[..., iu[1]]
        out = out + np.sum(np.log(np.abs(1 - 1 / pair)), axis=-1)
    return out


# -- transformations -------------------------------------------------------


def difference_transform(W, rank_tol=RANK_TOL) -> np.ndarray:
    """``U = W - (W^+)'``, shrinking each singular value ``d`` to ``d - 1/d``."""
    W = np.asarray(W, dtype=float)
    return W - moore_penrose(W, rank_tol).T


def bs_transform(V, Delta: PsdRankQ, Xi: PsdRankQ | None = None, composed: bool = False,
                 rank_tol=RANK_TOL) -> np.ndarray:
    """Matrix Birnbaum-Saunders map ``(V Delta^+ - V'^+ Delta) Xi^+``.

    With ``composed=True`` the bracket is evaluated as ``Y - Y'^+`` with
    ``Y = V Delta^+``.  The two agree whenever ``V Delta^+`` has rank equal
    to the rank of ``Delta`` or ``Delta`` is a multiple of the identity on
    its support; otherwise only the composed form factors through
    :func:`difference_transform`.  ``Xi=None`` omits the right factor.
    """
    V = np.asarray(V, dtype=float)
    D = Delta.matrix()
    Dp = psd_power(Delta, -1.0).matrix()
    if composed:
        U = difference_transform(V @ Dp, rank_tol)
    else:
        U = V @ Dp - moore_penrose(V, rank_tol).T @ D
    if Xi is not None:
        U = U @ psd_power(Xi, -1.0).matrix()
    return U


# -- analytic Jacobians ----------------------------------------------------


def difference_log_jacobian(W, n: int | None = None, m: int | None = None, p: int | None = None,
                        form: str = "reciprocal", rank_tol=RANK_TOL) -> float:
    """Log Jacobian of ``W -> W - W'^+`` on the rank-p manifold of n x m matrices.

    The factor depends only on the squared singular values ``d_i^2`` of ``W``.
    """
    W = np.asarray(W, dtype=float)
    n = W.shape[0] if n is None else n
    m = W.shape[1] if m is None else m
    if W.shape != (n, m):
        raise DomainError(f"W has shape {W.shape}, expected {(n, m)}")
    svd = thin_svd(W, rank_tol)
    if p is not None and svd.rank != p:
        raise DomainError(f"W has numerical rank {svd.rank}, expected {p}")
    return g_factor_ln(svd.values**2, n, m, form)


def _column_dim(m, s, column_dim):
    if column_dim == "support":
        return s
    if column_dim == "ambient":
        return m
    raise DomainError(f"column_dim must be 'support' or 'ambient', got {column_dim!r}")


def bs_log_jacobian(V, Delta: PsdRankQ, Xi: PsdRankQ, n: int | None = None,
                          column_dim: str = "support", form: str = "reciprocal",
                          rank_tol=RANK_TOL) -> float:
    """Log Jacobian of ``V -> Z = (V Delta^+ - V'^+ Delta) Xi^+``.

    Returns ``log|G(q, theta^2)| - n sum log ch(Xi) - (n/2) sum log ch(beta)``
    with ``theta_i^2`` the nonzero eigenvalues of ``V'V beta^+`` and
    ``beta = Delta^2``.

    ``V`` ranges over rank-p matrices whose rows lie in the column space of
    ``Delta`` (a ``p(n + s - p)`` dimensional manifold when the scale has
    rank s).  The G factor exponents therefore use ``s`` as the column
    dimension; ``column_dim="ambient"`` substitutes the full width m, which
    is the same thing when ``s = m``.
    """
    V = np.asarray(V, dtype=float)
    n = V.shape[0] if n is None else n
    m = V.shape[1]
    if V.shape[0] != n or Delta.dim != m or Xi.dim != m:
        raise DomainError("V, Delta and Xi have inconsistent shapes")
    s = Delta.rank
    W = V @ psd_power(Delta, -1.0).matrix()
    theta2 = thin_svd(W, rank_tol).values ** 2
    logg = g_factor_ln(theta2, n, _column_dim(m, s, column_dim), form)
    beta_log = 2 * np.sum(np.log(Delta.eigenvalues))
    return float(logg - n * np.sum(np.log(Xi.eigenvalues)) - n / 2 * beta_log)


def psd_eigen_log_factor(lam, m: int) -> float:
    """Log of ``2^-p prod lam_i^(m-p) prod_{i<j} (lam_i - lam_j)``.

    Converts a density in a rank-p PSD matrix into the joint density of its
    eigenvalues and eigenvector frame.
    """
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    p = lam.size
    if p > m:
        raise DomainError(f"rank {p} exceeds dimension {m}")
    if np.any(lam <= 0) or np.any(np.diff(lam) >= 0):
        raise DomainError(f"eigenvalues must be positive and strictly decreasing, got {lam.tolist()}")
    iu = np.triu_indices(p, 1)
    return float(-p * np.log(2.0) + (m - p) * np.sum(np.log(lam)) + np.sum(np.log(lam[iu[0]] - lam[iu[1]])))


def congruence_log_jacobian(T: PsdRankQ, C) -> float:
    """Log Jacobian of ``T -> C' T C`` on rank-p PSD m x m matrices.

    Equals ``p log|det C| + (m - p + 1)/2 log det(Q' C C' Q)`` with ``Q``
    the eigenvectors of ``T``; for ``p = m`` this is ``(m + 1) log|det C|``.
    """
    C = np.asarray(C, dtype=float)
    m, p = T.dim, T.rank
    if C.shape != (m, m):
        raise DomainError(f"C must be {m} x {m}")
    _, logdet_c = np.linalg.slogdet(C)
    CQ = C.T @ T.vectors
    _, logdet_r = np.linalg.slogdet(CQ.T @ CQ)
    return float(p * logdet_c + (m - p + 1) / 2 * logdet_r)


# -- finite-difference oracle ----------------------------------------------


@dataclass(frozen=True)
class RankRect:
    """Rank-p n x m matrices, optionally with rows confined to ``row_space``.

    ``row_space`` is an m x k matrix with orthonormal columns; the manifold
    is then isometric to rank-p n x k matrices.
    """

    n: int
    m: int
    p: int
    row_space: np.ndarray | None = None

    def _frame(self):
        return np.eye(self.m) if self.row_space is None else np.asarray(self.row_space, dtype=float)

    @property
    def dim(self) -> int:
        k = self._frame().shape[1]
        return self.p * (self.n + k - self.p)

    def retract(self, X):
        R = self._frame()
        u, s, vt = np.linalg.svd(np.asarray(X) @ R, full_matrices=False)
        p = self.p
        return (u[:, :p] * s[:p]) @ vt[:p] @ R.T

    def check(self, X, tol=1e-7):
        X = np.asarray(X, dtype=float)
        if X.shape != (self.n, self.m):
            return False
        R = self._frame()
        s = np.linalg.svd(X, compute_uv=False)
        rank = int(np.sum(s > tol * s[0])) if s[0] > 0 else 0
        return rank == self.p and np.linalg.norm(X - X @ R @ R.T) <= tol * np.linalg.norm(X)

    def tangent_basis(self, X):
        R = self._frame()
        k = R.shape[1]
        u, s, vt = np.linalg.svd(np.asarray(X) @ R)
        p = self.p
        H, Hp = u[:, :p], u[:, p:]
        Q, Qp = vt[:p].T, vt[p:].T
        out = []
        for i in range(p):
            for j in range(p):
                out.append(np.outer(H[:, i], Q[:, j]))
        for a in range(self.n - p):
            for j in range(p):
                out.append(np.outer(Hp[:, a], Q[:, j]))
        for i in range(p):
            for b in range(k - p):
                out.append(np.outer(H[:, i], Qp[:, b]))
        return [t @ R.T for t in out]


@dataclass(frozen=True)
class PsdRank:
    """Rank-p PSD m x m matrices with the Frobenius metric.

    The Frobenius volume differs from the ``prod dt_ij`` convention by a
    constant depending only on (m, p), so Jacobians between manifolds of
    the same (m, p) agree under either convention.
    """

    m: int
    p: int

    @property
    def dim(self) -> int:
        return self.m * self.p - self.p * (self.p - 1) // 2

    def retract(self, X):
        X = np.asarray(X, dtype=float)
        lam, vec = np.linalg.eigh((X + X.T) / 2)
        lam, vec = lam[::-1][: self.p], vec[:, ::-1][:, : self.p]
        return (vec * lam) @ vec.T

    def check(self, X, tol=1e-7):
        X = np.asarray(X, dtype=float)
        if X.shape != (self.m, self.m) or np.linalg.norm(X - X.T) > tol * np.linalg.norm(X):
            return False
        lam = np.linalg.eigvalsh(X)[::-1]
        return lam[0] > 0 and int(np.sum(lam > tol * lam[0])) == self.p and lam[-1] > -tol * lam[0]

    def tangent_basis(self, X):
        lam, vec = np.linalg.eigh((np.asarray(X) + np.asarray(X).T) / 2)
        vec = vec[:, ::-1]
        Q, Qp = vec[:, : self.p], vec[:, self.p :]
        r2 = np.sqrt(0.5)
        out = []
        for i in range(self.p):
            out.append(np.outer(Q[:, i], Q[:, i]))
            for j in range(i + 1, self.p):
                out.append(r2 * (np.outer(Q[:, i], Q[:, j]) + np.outer(Q[:, j], Q[:, i])))
        for a in range(self.m - self.p):
            for j in range(self.p):
                out.append(r2 * (np.outer(Qp[:, a], Q[:, j]) + np.outer(Q[:, j], Qp[:, a])))
        return out


def _numeric_rank(A, tol=1e-7):
    s = np.linalg.svd(np.asarray(A, dtype=float), compute_uv=False)
    return int(np.sum(s > tol * s[0])) if s.size and s[0] > 0 else 0


def _central(fn, manifold, X, t, h, base_rank):
    plus = fn(manifold.retract(X + h * t))
    minus = fn(manifold.retract(X - h * t))
    if _numeric_rank(plus) != base_rank or _numeric_rank(minus) != base_rank:
        raise RankDrop(f"map output changed rank under a step of size {h:.3g}")
    return (np.asarray(plus) - np.asarray(minus)).ravel() / (2 * h)


def numeric_manifold_log_jacobian(fn: Callable, X, manifold, step: float | None = None,
                                  richardson: bool = False, threads: int = 1) -> float:
    """Log of :func:`numeric_manifold_jacobian`."""
    X = np.asarray(X, dtype=float)
    if not manifold.check(X):
        raise DomainError("X is not on the stated manifold")
    if step is None:
        step = 1e-5 * (1.0 + np.linalg.norm(X))
    if not 1e-6 <= step / (1.0 + np.linalg.norm(X)) <= 1e-3:
        raise DomainError(f"relative step {step} outside [1e-6, 1e-3] * (1 + |X|)")
    base_rank = _numeric_rank(fn(X))
    basis = manifold.tangent_basis(X)

    def column(t):
        d = _central(fn, manifold, X, t, step, base_rank)
        if richardson:
            d2 = _central(fn, manifold, X, t, step / 2, base_rank)
            d = (4 * d2 - d) / 3
        return d

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            cols = list(pool.map(column, basis))
    else:
        cols = [column(t) for t in basis]
    J = np.column_stack(cols)
    sv = np.linalg.svd(J, compute_uv=False)
    with np.errstate(divide="ignore"):
        return float(np.sum(np.log(sv)))


def numeric_manifold_jacobian(fn: Callable, X, manifold, step: float | None = None,
                              richardson: bool = False, threads: int = 1) -> float:
    """Volume scaling ``sqrt(det(J^T J))`` of ``fn`` at ``X`` on ``manifold``.

    ``J`` holds the central-difference images of an orthonormal tangent
    basis at ``X``; each perturbed point is pulled back onto the manifold
    by rank truncation before ``fn`` sees it.

    Raises
    ------
    RankDrop
        If ``fn`` changes the rank of its output under a perturbation.
    """
    return float(np.exp(numeric_manifold_log_jacobian(fn, X, manifold, step, richardson, threads)))
