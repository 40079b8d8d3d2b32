"""Exact sampling by inverting the matrix Birnbaum-Saunders transformation.

A draw starts from a singular elliptical matrix ``Y`` with row covariance
``Xi^2``.  Writing ``W = V Delta^+`` the transformation reads
``Y = W - W'^+``, which acts on each singular value as ``g = d - 1/d``.

Branch choice
-------------
The map ``d -> d - 1/d`` is a bijection from ``(0, inf)`` onto the real
line, but singular values are nonnegative, so ``W -> W - W'^+`` is
``2^p``-to-one: ``d`` and ``1/d`` (with a flipped singular vector) give
the same ``Y``.  Always keeping ``d > 1`` would force ``T >= beta`` in the
scalar case.  Instead every SVD here is *signed*: both the left and the
right singular vectors are normalized to have their first nonzero entry
positive and the singular value carries the sign.  The inverse
``d = g/2 + sqrt(g^2/4 + 1)`` of the signed value then lands on either
side of one, each with the probability the elliptical law assigns to the
corresponding sign, and the scalar case reproduces the classical
construction ``T = beta (alpha Z/2 + sqrt((alpha Z/2)^2 + 1))^2``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSpectrum, DomainError, RoundTripError, UnsupportedKernel
from .jacobians import bs_transform
from .kernels import GeneratorFunction, Kind
from .linalg import DEGENERATE_TOL, RANK_TOL, PsdRankQ
from .distributions import GbsParams, UnivariateGbsParams

__all__ = [
    "RngSpec",
    "bs_inverse_scalar",
    "signed_svd",
    "invert_bs_transform",
    "sample_singular_elliptical",
    "sample_gbs",
    "sample_gbs_eigenvalues",
    "sample_univ_gbs",
]

ROUND_TRIP_TOL = 1e-6


@dataclass(frozen=True)
class RngSpec:
    """Seed plus substream index; equal specs give identical streams."""

    seed: int = 0
    stream: int = 0

    def __post_init__(self):
        if not (0 <= int(self.seed) < 2**64) or int(self.seed) != self.seed:
            raise DomainError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if int(self.stream) != self.stream or self.stream < 0:
            raise DomainError(f"stream must be a nonnegative integer, got {self.stream}")

    def generator(self) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream),)))

    def substream(self, k: int) -> "RngSpec":
        return RngSpec(self.seed, self.stream + k)


def _rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngSpec):
        return rng.generator()
    return RngSpec(int(rng)).generator()


def bs_inverse_scalar(g):
    """Unique ``d > 0`` with ``d - 1/d = g``; vectorized and strictly increasing.

    >>> float(bs_inverse_scalar(1.5))
    2.0
    """
    g = np.asarray(g, dtype=float)
    if np.any(~np.isfinite(g)):
        raise DomainError("g must be finite")
    h = g / 2
    # for g << 0 the root g/2 + sqrt(...) cancels; use 1/(sqrt(...) - g/2)
    r = np.hypot(h, 1.0)
    out = np.where(h >= 0, h + r, 1.0 / (r - h))
    return out if out.ndim else float(out)


def _first_sign(A):
    """Sign of the first entry with magnitude above 1e-12 of its column's max, per column."""
    mag = np.abs(A)
    idx = np.argmax(mag > 1e-12 * np.max(mag, axis=-2, keepdims=True), axis=-2)
    first = np.take_along_axis(A, idx[..., None, :], axis=-2)[..., 0, :]
    return np.where(first < 0, -1.0, 1.0)


def signed_svd(Y, rank: int | None = None, rank_tol=RANK_TOL):
    """Thin SVD with both singular-vector sets sign-normalized.

    Returns ``(U, g, Q)`` with ``Y = U diag(g) Q'``; the first nonzero
    entry of every column of ``U`` and ``Q`` is positive, so ``g`` may be
    negative.  Works on stacks ``(..., n, m)`` when ``rank`` is given.
    """
    Y = np.asarray(Y, dtype=float)
    u, s, vt = np.linalg.svd(Y, full_matrices=False)
    if rank is None:
        if Y.ndim != 2:
            raise DomainError("rank must be given for stacked input")
        rank = int(np.sum(s > rank_tol * s[0])) if s[0] > 0 else 0
    u, s, q = u[..., :rank], s[..., :rank], np.swapaxes(vt, -1, -2)[..., :rank]
    su, sq = _first_sign(u), _first_sign(q)
    return u * su[..., None, :], s * su * sq, q * sq[..., None, :]


def invert_bs_transform(Y, Delta: PsdRankQ, form: str = "verbatim", rank_tol=RANK_TOL) -> np.ndarray:
    """Solve ``V Delta^+ - V'^+ Delta = Y`` for ``V`` on the signed branch.

    ``form="verbatim"`` checks that residual; ``form="composed"`` checks
    ``W - W'^+ = Y`` with ``W = V Delta^+``.  The two agree whenever the
    rank of ``Y`` equals the rank of ``Delta`` or ``Delta`` is a multiple
    of the identity on its support.

    Raises
    ------
    DegenerateSpectrum
        Zero ``Y`` or repeated singular values.
    RoundTripError
        Relative residual above 1e-6, for instance when the rows of ``Y``
        leave the column space of ``Delta``.
    """
    if form not in ("verbatim", "composed"):
        raise DomainError(f"form must be 'verbatim' or 'composed', got {form!r}")
    Y = np.asarray(Y, dtype=float)
    if Y.ndim != 2 or Y.shape[1] != Delta.dim:
        raise DomainError(f"Y must be n x {Delta.dim}")
    s = np.linalg.svd(Y, compute_uv=False)
    if s[0] == 0:
        raise DegenerateSpectrum("Y is zero")
    U, g, Q = signed_svd(Y, rank_tol=rank_tol)
    mags = np.sort(np.abs(g))[::-1]
    if mags.size > 1 and np.min(-np.diff(mags)) < DEGENERATE_TOL * mags[0]:
        raise DegenerateSpectrum(f"singular values of Y are not distinct: {mags.tolist()}")
    W = (U * bs_inverse_scalar(g)) @ Q.T
    V = W @ Delta.matrix()
    back = bs_transform(V, Delta, composed=(form == "composed"), rank_tol=rank_tol)
    resid = np.linalg.norm(back - Y) / np.linalg.norm(Y)
    if not resid <= ROUND_TRIP_TOL:
        raise RoundTripError(f"forward map misses Y by {resid:.3g} (relative)")
    return V


def sample_singular_elliptical(Xi: PsdRankQ, h: GeneratorFunction, n: int, rng, size: int | None = None):
    """Draw ``Y = X A'`` with ``A A' = Xi^2`` and ``X`` spherical n x s.

    Gaussian ``X`` is standard normal; for Pearson VII a whole matrix shares
    one radial factor ``sqrt(theta / (2 w))`` with ``w ~ Gamma(nu - ns/2)``.
    Returns one n x m matrix, or a stack of ``size`` of them.
    """
    if not h.samplable:
        raise UnsupportedKernel(f"no exact sampler for the {h.kind.value} generator")
    s = Xi.rank
    if h.dims != n * s:
        raise DomainError(f"generator dims {h.dims} != n * rank(Xi) = {n * s}")
    gen = _rng(rng)
    count = 1 if size is None else int(size)
    A = Xi.vectors * Xi.eigenvalues
    X = gen.standard_normal((count, n, s))
    if h.kind is Kind.PEARSON7:
        nu, theta = h.params["nu"], h.params["theta"]
        w = gen.gamma(nu - n * s / 2, 1.0, size=count)
        X = X * np.sqrt(theta / (2 * w))[:, None, None]
    Y = X @ A.T
    return Y[0] if size is None else Y


def _invert_stack(Y, Delta: PsdRankQ, p: int):
    U, g, Q = signed_svd(Y, rank=p)
    W = (U * bs_inverse_scalar(g)[..., None, :]) @ np.swapaxes(Q, -1, -2)
    return W @ Delta.matrix()


def _check_samplable(params: GbsParams):
    if not params.h.samplable:
        raise UnsupportedKernel(f"no exact sampler for the {params.h.kind.value} generator")


def sample_gbs(params: GbsParams, rng, size: int | None = None, return_v: bool = False):
    """Draw ``T = V'V`` from the GBS law.

    Returns a :class:`PsdRankQ` of rank ``p``, or a list of them when
    ``size`` is given.  With ``return_v`` the square-root matrices come
    back as well.
    """
    _check_samplable(params)
    count = 1 if size is None else int(size)
    Y = sample_singular_elliptical(params.Xi, params.h, params.n, rng, count)
    V = _invert_stack(Y, params.Delta, params.p)
    out = []
    for v in V:
        T = v.T @ v
        lam, vec = np.linalg.eigh((T + T.T) / 2)
        out.append(PsdRankQ.from_eigen(vec[:, ::-1][:, : params.p], lam[::-1][: params.p]))
    if size is None:
        return (out[0], V[0]) if return_v else out[0]
    return (out, V) if return_v else out


def sample_gbs_eigenvalues(params: GbsParams, rng, size: int) -> np.ndarray:
    """Nonzero eigenvalues of ``size`` GBS draws, shape ``(size, p)``, decreasing."""
    _check_samplable(params)
    Y = sample_singular_elliptical(params.Xi, params.h, params.n, rng, int(size))
    V = _invert_stack(Y, params.Delta, params.p)
    return np.linalg.svd(V, compute_uv=False)[..., : params.p] ** 2


def sample_univ_gbs(params: UnivariateGbsParams, rng, size: int) -> np.ndarray:
    """Scalar GBS draws ``beta (alpha Z/2 + sqrt((alpha Z/2)^2 + 1))^2``."""
    mp = params.to_matrix_params()
    Y = sample_singular_elliptical(mp.Xi, mp.h, 1, rng, int(size))[:, 0, 0]
    return params.beta * bs_inverse_scalar(Y) ** 2
