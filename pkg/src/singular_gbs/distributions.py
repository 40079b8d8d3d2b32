"""Log-densities of the singular matrix variate generalised Birnbaum-Saunders family.

All densities are with respect to Hausdorff measure on the support of the
law and are evaluated in log space.  Conditional inverses are taken to be
Moore-Penrose inverses.

Column dimension
----------------
When the scale matrix ``beta`` has rank ``s < m`` every random matrix of
the family has its rows (or columns) inside the column space of ``beta``,
an ``s``-dimensional subspace.  By default (``column_dim="support"``) the
exponents that carry the column dimension use ``s``; this makes each
density a proper density on its support and agrees with the literal
formulas whenever ``s = m``.  ``column_dim="ambient"`` reproduces the
literal formulas with ``m`` for every ``s``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, SingularC, SupportError
from .jacobians import congruence_log_jacobian as _congruence_log_jacobian
from .jacobians import g_factor, g_factor_ln_batch, psd_eigen_log_factor, bs_log_jacobian
from .kernels import GeneratorFunction, Kind, make_generator
from .linalg import RANK_TOL, PsdRankQ, moore_penrose, mv_gamma_ln, psd_power, stiefel_log_volume

__all__ = [
    "EllipticalParams",
    "GbsParams",
    "UnivariateGbsParams",
    "DensityTerms",
    "log_density_singular_elliptical",
    "log_density_sqrt_gbs",
    "sqrt_gbs_trace",
    "gbs_terms",
    "gbs_trace",
    "log_density_gbs",
    "log_density_gbs_nonsingular",
    "log_density_gbs_nonsingular_stack",
    "log_density_gbs_nonsingular_eigen",
    "log_density_bs_gaussian",
    "log_density_gbs_isotropic",
    "log_density_pinv_transform",
    "log_density_congruence",
    "pdf_univ_gbs",
    "logpdf_univ_gbs",
    "pdf_univ_sqrt_gbs",
    "logpdf_univ_sqrt_gbs",
    "eigenvalue_joint_log_density",
    "isotropic_eigen_logpdf",
]

SUPPORT_TOL = 1e-7
LOG_PI = np.log(np.pi)
LOG_2 = np.log(2.0)


def _as_psd(A, *, rank_tol=RANK_TOL, require_distinct=False) -> PsdRankQ:
    if isinstance(A, PsdRankQ):
        return A.require_distinct() if require_distinct else A
    return PsdRankQ.from_matrix(A, rank_tol=rank_tol, require_distinct=require_distinct)


def _nonneg(u, scale=1.0):
    # quadratic forms can come out at -1e-16 from cancellation
    if -1e-10 * max(1.0, scale) < u < 0:
        return 0.0
    return u


def _same_support(A: PsdRankQ, B: PsdRankQ, tol=1e-8) -> bool:
    return A.rank == B.rank and np.linalg.norm(A.projector() - B.projector()) <= tol


# -- singular elliptical law -------------------------------------------------------


@dataclass(frozen=True)
class EllipticalParams:
    """Singular matrix elliptical law for an n x m matrix.

    ``Sigma`` (m x m, rank r) acts on rows, ``Theta`` (n x n, rank s) on
    columns; the generator must be built for ``r * s`` dimensions.
    """

    mu: np.ndarray
    Sigma: PsdRankQ
    Theta: PsdRankQ
    h: GeneratorFunction

    def __post_init__(self):
        mu = np.array(self.mu, dtype=float)
        mu.flags.writeable = False
        object.__setattr__(self, "mu", mu)
        n, m = mu.shape
        if self.Sigma.dim != m or self.Theta.dim != n:
            raise DomainError("Sigma must be m x m and Theta n x n for an n x m mean")
        if self.h.dims != self.Sigma.rank * self.Theta.rank:
            raise DomainError(
                f"generator dims {self.h.dims} != rank(Sigma) * rank(Theta) = "
                f"{self.Sigma.rank * self.Theta.rank}"
            )

    @property
    def n(self) -> int:
        return self.mu.shape[0]

    @property
    def m(self) -> int:
        return self.mu.shape[1]


def log_density_singular_elliptical(Y, params: EllipticalParams) -> float:
    """Log-density of the singular matrix elliptical law at ``Y``.

    Raises
    ------
    SupportError
        If ``Y - mu`` leaves the column space of ``Theta`` or the row space
        of ``Sigma``.
    """
    Y = np.asarray(Y, dtype=float)
    if Y.shape != params.mu.shape:
        raise DomainError(f"Y has shape {Y.shape}, expected {params.mu.shape}")
    X = Y - params.mu
    resid = np.linalg.norm(X - params.Theta.projector() @ X @ params.Sigma.projector())
    if resid > SUPPORT_TOL * max(1.0, np.linalg.norm(X)):
        raise SupportError(f"Y - mu is off the support (residual {resid:.3g})")
    r, s = params.Sigma.rank, params.Theta.rank
    u = np.trace(params.Sigma.pinv() @ X.T @ params.Theta.pinv() @ X)
    log_pref = -(s / 2) * params.Sigma.log_pdet - (r / 2) * params.Theta.log_pdet
    return float(log_pref + params.h.log_h(_nonneg(u)))


# -- parameters ------------------------------------------------------------


@dataclass(frozen=True)
class GbsParams:
    """Parameters of the singular matrix variate GBS law.

    ``Xi`` is the shape parameter (its square ``Xi^2`` is the shape matrix)
    and ``beta = Delta^2`` the scale matrix, both m x m of rank s with the
    same column space.  ``p = min(n, s)`` is the rank of the random matrix
    and ``h`` must be built for ``n * s`` dimensions.
    """

    n: int
    Xi: PsdRankQ
    beta: PsdRankQ
    h: GeneratorFunction
    column_dim: str = "support"
    Delta: PsdRankQ = field(init=False)

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise DomainError(f"n must be a positive integer, got {self.n}")
        if self.Xi.dim != self.beta.dim:
            raise DomainError("Xi and beta must have the same dimension")
        if self.Xi.rank != self.beta.rank:
            raise DomainError(f"Xi has rank {self.Xi.rank} but beta has rank {self.beta.rank}")
        if not _same_support(self.Xi, self.beta):
            raise DomainError("Xi and beta must share their column space")
        if self.h.dims != self.n * self.s:
            raise DomainError(f"generator dims {self.h.dims} != n * s = {self.n * self.s}")
        if self.column_dim not in ("support", "ambient"):
            raise DomainError(f"column_dim must be 'support' or 'ambient', got {self.column_dim!r}")
        object.__setattr__(self, "Delta", psd_power(self.beta, 0.5))

    @classmethod
    def build(cls, n, Xi, beta, kernel="gaussian", kernel_params=None, column_dim="support"):
        """Build from dense matrices, PSD objects or positive scalars."""
        Xi = _param_psd(Xi)
        beta = _param_psd(beta)
        h = make_generator(kernel, kernel_params, dims=n * Xi.rank)
        return cls(n, Xi, beta, h, column_dim)

    @property
    def m(self) -> int:
        return self.Xi.dim

    @property
    def s(self) -> int:
        return self.Xi.rank

    @property
    def p(self) -> int:
        return min(self.n, self.s)

    @property
    def m_eff(self) -> int:
        """Column dimension used in the exponents (see module docstring)."""
        return self.s if self.column_dim == "support" else self.m

    @property
    def Xi2(self) -> PsdRankQ:
        return psd_power(self.Xi, 2.0)

    def isotropic_values(self):
        """Return ``(xi, b)`` if ``Xi = xi I_m`` and ``beta = b I_m``, else ``None``."""
        if self.s != self.m:
            return None
        xi, b = self.Xi.eigenvalues, self.beta.eigenvalues
        if np.ptp(xi) <= 1e-12 * xi[0] and np.ptp(b) <= 1e-12 * b[0]:
            return float(xi[0]), float(b[0])
        return None


def _param_psd(A) -> PsdRankQ:
    if isinstance(A, PsdRankQ):
        return A
    A = np.asarray(A, dtype=float)
    if A.ndim == 0:
        return PsdRankQ(np.eye(1), [float(A)])
    return PsdRankQ.from_matrix(A)


@dataclass(frozen=True)
class UnivariateGbsParams:
    """Shape ``alpha``, scale/median ``beta`` and a one-dimensional generator."""

    alpha: float
    beta: float
    h: GeneratorFunction = field(default_factory=lambda: make_generator("gaussian"))

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise DomainError(f"alpha and beta must be positive, got {self.alpha}, {self.beta}")
        if self.h.dims != 1:
            raise DomainError("univariate generator must have dims = 1")

    def to_matrix_params(self) -> GbsParams:
        return GbsParams(1, PsdRankQ(np.eye(1), [self.alpha]), PsdRankQ(np.eye(1), [self.beta]), self.h)


# -- shared pieces -----------------------------------------------------------


@dataclass(frozen=True)
class DensityTerms:
    """Additive pieces of a log-density, kept for reporting."""

    log_const: float
    log_g: float
    g_sign: float
    q: int
    log_eigen: float
    h_arg: float
    log_h: float

    @property
    def total(self) -> float:
        return self.log_const + self.log_g + self.log_eigen + self.log_h

    @property
    def flags(self) -> list[str]:
        out = []
        if self.g_sign < 0:
            out.append("g_negative")
        if self.g_sign == 0:
            out.append("g_zero")
        return out


def _check_in_support(T: PsdRankQ, params: GbsParams, what="T"):
    if T.dim != params.m:
        raise DomainError(f"{what} is {T.dim} x {T.dim}, expected {params.m} x {params.m}")
    if T.rank != params.p:
        raise SupportError(f"{what} has rank {T.rank}, the law lives on rank {params.p}")
    resid = np.linalg.norm(T.vectors - params.beta.projector() @ T.vectors)
    if resid > SUPPORT_TOL:
        raise SupportError(f"{what} is not inside the column space of beta (residual {resid:.3g})")


def _ratio_eigs(A: np.ndarray, p: int, rank_tol=RANK_TOL) -> np.ndarray:
    """Nonzero eigenvalues of a symmetric PSD matrix, with rank-accident guard."""
    lam = np.linalg.eigvalsh((A + A.T) / 2)[::-1]
    if lam[0] <= 0:
        return lam[:0]
    q = int(np.sum(lam > rank_tol * lam[0]))
    if q < p:
        tighter = int(np.sum(lam > rank_tol / 10 * lam[0]))
        if tighter > q:
            warnings.warn(
                f"rank of beta^+ T recovered from {q} to {tighter} at a tighter tolerance",
                RuntimeWarning,
                stacklevel=3,
            )
            q = tighter
    return lam[:q]


def _log_scale_const(params: GbsParams, p: int) -> float:
    n = params.n
    return (
        n * p / 2 * LOG_PI
        - p * LOG_2
        - mv_gamma_ln(p, n / 2)
        - n * np.sum(np.log(params.Xi.eigenvalues))
        - n / 2 * 2 * np.sum(np.log(params.Delta.eigenvalues))
    )


def gbs_trace(T, params: GbsParams, trace: str = "expanded") -> float:
    """Argument of ``h`` for the GBS density at ``T``.

    ``trace="expanded"`` gives
    ``tr Xi^+2 (Delta^+ T Delta^+ + Delta T^+ Delta - 2 Delta T^+ T Delta^+)``.
    ``trace="composed"`` gives ``tr Xi^+2 (A + A^+ - 2 A^+ A)`` with
    ``A = Delta^+ T Delta^+``, the squared norm of ``(W - W'^+) Xi^+`` for
    ``W = V Delta^+``.  The two agree when ``p = s`` or the scale matrix is
    a multiple of the identity on its support.
    """
    if trace not in ("expanded", "composed"):
        raise DomainError(f"trace must be 'expanded' or 'composed', got {trace!r}")
    Tm = T.matrix() if isinstance(T, PsdRankQ) else np.asarray(T, dtype=float)
    Dp = psd_power(params.Delta, -1.0).matrix()
    Xi2p = psd_power(params.Xi, -2.0).matrix()
    if trace == "composed":
        A = Dp @ Tm @ Dp
        Ap = moore_penrose(A)
        pos = Xi2p @ (A + Ap)
        inner = A + Ap - 2 * Ap @ A
    else:
        Tp = T.pinv() if isinstance(T, PsdRankQ) else moore_penrose(Tm)
        D = params.Delta.matrix()
        pos = Xi2p @ (Dp @ Tm @ Dp + D @ Tp @ D)
        inner = Dp @ Tm @ Dp + D @ Tp @ D - 2 * D @ Tp @ Tm @ Dp
    return _nonneg(float(np.trace(Xi2p @ inner)), float(np.trace(pos)))


def gbs_terms(T, params: GbsParams, form="reciprocal", trace: str = "expanded") -> DensityTerms:
    """Additive pieces of the rank-p GBS log-density at ``T``."""
    T = _as_psd(T, require_distinct=True)
    _check_in_support(T, params)
    p, n, me = params.p, params.n, params.m_eff
    Dp = psd_power(params.Delta, -1.0).matrix()
    delta = _ratio_eigs(Dp @ T.matrix() @ Dp, p)
    log_g, sign = g_factor(delta, n, me, form)
    u = gbs_trace(T, params, trace)
    return DensityTerms(
        log_const=float(_log_scale_const(params, p)),
        log_g=log_g,
        g_sign=sign,
        q=int(delta.size),
        log_eigen=(n - me - 1) / 2 * T.log_pdet,
        h_arg=u,
        log_h=float(params.h.log_h(u)),
    )


def log_density_gbs(T, params: GbsParams, form="reciprocal", trace: str = "expanded") -> float:
    """Log-density of a rank-p GBS matrix ``T`` with respect to Hausdorff measure.

    ``T`` may be a :class:`PsdRankQ` or a dense symmetric matrix.  Returns
    ``-inf`` where an eigenvalue of ``beta^+ T`` equals one.  See
    :func:`gbs_trace` for ``trace``; ``"composed"`` is the law produced by
    :func:`singular_gbs.sampling.sample_gbs` when ``p < s`` and the scale
    matrix is not isotropic.
    """
    return gbs_terms(T, params, form, trace).total


# -- square-root law ---------------------------------------------------------


def sqrt_gbs_trace(V, params: GbsParams, trace: str = "expanded") -> float:
    """``tr Xi^+2 (Delta^+ V'V Delta^+ + Delta (V'V)^+ Delta - 2 Delta V^+ V Delta^+)``.

    With ``trace="composed"`` this is ``|(W - W'^+) Xi^+|^2`` for
    ``W = V Delta^+`` instead.
    """
    V = np.asarray(V, dtype=float)
    if trace == "composed":
        W = V @ psd_power(params.Delta, -1.0).matrix()
        Z = (W - moore_penrose(W).T) @ psd_power(params.Xi, -1.0).matrix()
        return float(np.sum(Z * Z))
    if trace != "expanded":
        raise DomainError(f"trace must be 'expanded' or 'composed', got {trace!r}")
    T = V.T @ V
    Vp = moore_penrose(V)
    D = params.Delta.matrix()
    Dp = psd_power(params.Delta, -1.0).matrix()
    Xi2p = psd_power(params.Xi, -2.0).matrix()
    inner = Dp @ T @ Dp + D @ moore_penrose(T) @ D - 2 * D @ Vp @ V @ Dp
    return _nonneg(float(np.trace(Xi2p @ inner)))


def log_density_sqrt_gbs(V, params: GbsParams, form="reciprocal", trace: str = "expanded") -> float:
    """Log-density of the square-root GBS matrix ``V`` (n x m, rank p).

    The density has total mass ``2^p``: every ``Z`` has ``2^p`` preimages
    ``V`` (see :mod:`singular_gbs.sampling`).
    """
    V = np.asarray(V, dtype=float)
    if V.shape != (params.n, params.m):
        raise DomainError(f"V has shape {V.shape}, expected {(params.n, params.m)}")
    resid = np.linalg.norm(V - V @ params.beta.projector())
    if resid > SUPPORT_TOL * max(1.0, np.linalg.norm(V)):
        raise SupportError(f"rows of V leave the column space of beta (residual {resid:.3g})")
    s = np.linalg.svd(V, compute_uv=False)
    if int(np.sum(s > RANK_TOL * s[0])) != params.p:
        raise SupportError(f"V must have rank {params.p}")
    log_j = bs_log_jacobian(V, params.Delta, params.Xi, params.n, params.column_dim, form)
    return float(log_j + params.h.log_h(sqrt_gbs_trace(V, params, trace)))


# -- special cases ------------------------------------------------------------


def log_density_gbs_nonsingular(T, params: GbsParams, form="reciprocal") -> float:
    """Full-rank case ``q = p = s = m`` with ordinary inverses and Lebesgue measure."""
    n, m = params.n, params.m
    if params.s != m:
        raise DomainError(f"nonsingular case needs rank(beta) = m, got s={params.s}, m={m}")
    if n < m:
        raise DomainError(f"nonsingular case needs n >= m, got n={n}, m={m}")
    T = _as_psd(T, require_distinct=True)
    if T.dim != m or T.rank != m:
        raise SupportError(f"T must be a full-rank {m} x {m} matrix")
    Tm = T.matrix()
    D = params.Delta.matrix()
    Dinv = np.linalg.inv(D)
    Xi2inv = np.linalg.inv(params.Xi2.matrix())
    delta = np.linalg.eigvalsh(Dinv @ Tm @ Dinv)[::-1]
    log_g, _ = g_factor(delta, n, m, form)
    u = np.trace(Xi2inv @ (Dinv @ Tm @ Dinv + D @ np.linalg.inv(Tm) @ D)) - 2 * np.trace(Xi2inv)
    log_const = (
        n * m / 2 * LOG_PI
        - m * LOG_2
        - mv_gamma_ln(m, n / 2)
        - n * params.Xi.log_pdet
        - n / 2 * params.beta.log_pdet
    )
    return float(log_const + log_g + (n - m - 1) / 2 * T.log_pdet + params.h.log_h(_nonneg(u)))


def log_density_gbs_nonsingular_stack(T, params: GbsParams) -> np.ndarray:
    """Vectorized :func:`log_density_gbs_nonsingular` over a stack ``(..., m, m)``.

    No support or distinctness checks; non-positive-definite entries give
    ``nan``.  Meant for quadrature loops.
    """
    T = np.asarray(T, dtype=float)
    lam, R = np.linalg.eigh((T + np.swapaxes(T, -1, -2)) / 2)
    pd = lam[..., 0] > 0
    out = log_density_gbs_nonsingular_eigen(R, np.where(pd[..., None], lam, 1.0), params)
    return np.where(pd, out, np.nan)


def log_density_gbs_nonsingular_eigen(R, lam, params: GbsParams) -> np.ndarray:
    """Full-rank log-density at ``T = R diag(lam) R'``, vectorized over leading axes.

    Working from the spectrum keeps badly conditioned ``T`` usable: the
    inverse is formed from ``1 / lam`` and the smallest eigenvalue of
    ``beta^-1 T`` from the determinant.
    """
    n, m = params.n, params.m
    if params.s != m or n < m:
        raise DomainError("nonsingular case needs rank(beta) = m <= n")
    R = np.asarray(R, dtype=float)
    lam = np.asarray(lam, dtype=float)
    D = params.Delta.matrix()
    Dinv = np.linalg.inv(D)
    Xi2inv = np.linalg.inv(params.Xi2.matrix())
    Rt = np.swapaxes(R, -1, -2)
    T = (R * lam[..., None, :]) @ Rt
    Tinv = (R / lam[..., None, :]) @ Rt
    logdet = np.sum(np.log(lam), axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        delta = np.linalg.eigvalsh(Dinv @ T @ Dinv)[..., ::-1]
        if m > 1:
            rest = np.sum(np.log(delta[..., :-1]), axis=-1)
            delta = np.concatenate([delta[..., :-1], np.exp(logdet - params.beta.log_pdet - rest)[..., None]], -1)
        log_g = g_factor_ln_batch(delta, n, m)
    A = Dinv @ Xi2inv @ Dinv
    B = D @ Xi2inv @ D
    u = np.einsum("ij,...ji->...", A, T) + np.einsum("ij,...ji->...", B, Tinv) - 2 * np.trace(Xi2inv)
    log_const = (
        n * m / 2 * LOG_PI
        - m * LOG_2
        - mv_gamma_ln(m, n / 2)
        - n * params.Xi.log_pdet
        - n / 2 * params.beta.log_pdet
    )
    return log_const + log_g + (n - m - 1) / 2 * logdet + params.h.log_h(np.maximum(u, 0.0), strict=False)


def log_density_bs_gaussian(T, params: GbsParams, form="reciprocal") -> float:
    """Gaussian-generator closed form with its own constant.

    The generator stored in ``params`` is ignored; the normal kernel is
    built into the formula.
    """
    T = _as_psd(T, require_distinct=True)
    _check_in_support(T, params)
    n, p, s, me = params.n, params.p, params.s, params.m_eff
    Dp = psd_power(params.Delta, -1.0).matrix()
    delta = _ratio_eigs(Dp @ T.matrix() @ Dp, p)
    log_g, _ = g_factor(delta, n, me, form)
    log_const = (
        n * (p - s) / 2 * LOG_PI
        - (p + n * s / 2) * LOG_2
        - mv_gamma_ln(p, n / 2)
        - n * params.Xi.log_pdet
        - n / 2 * params.beta.log_pdet
    )
    u = gbs_trace(T, params)
    return float(log_const + log_g + (n - me - 1) / 2 * T.log_pdet - u / 2)


def _g_rho(rho, b, n, m, form):
    """G factor written in the eigenvalues of ``T`` for the scale ``b I_m``."""
    rho = np.sort(np.asarray(rho, dtype=float))[::-1]
    p = rho.size
    e = n + m - 2 * p
    iu = np.triu_indices(p, 1)
    pair = rho[iu[0]] * rho[iu[1]]
    with np.errstate(divide="ignore"):
        if form == "reciprocal":
            out = e * np.sum(np.log(np.abs(1 - b / rho))) + np.sum(np.log1p(b / rho))
            out += np.sum(np.log(np.abs(1 - b**2 / pair)))
        else:
            out = p * (n + m - p) * np.log(b) - (n + m - p) * np.sum(np.log(rho))
            out += e * np.sum(np.log(np.abs(rho / b - 1))) + np.sum(np.log1p(rho / b))
            out += np.sum(np.log(np.abs(pair / b**2 - 1)))
    return float(out)


def log_density_gbs_isotropic(T, params: GbsParams, form="reciprocal") -> float:
    """Closed form for the scale ``beta = b I_m`` in terms of the eigenvalues of ``T``."""
    b_vals = params.beta.eigenvalues
    if params.s != params.m or np.ptp(b_vals) > 1e-12 * b_vals[0]:
        raise DomainError("scale matrix must be a positive multiple of the identity")
    b = float(b_vals[0])
    T = _as_psd(T, require_distinct=True)
    _check_in_support(T, params)
    n, m, p, me = params.n, params.m, params.p, params.m_eff
    rho = T.eigenvalues
    Tm, Tp = T.matrix(), T.pinv()
    Xi2p = psd_power(params.Xi, -2.0).matrix()
    u = np.trace(Xi2p @ (Tm / b + b * Tp - 2 * Tp @ Tm))
    log_const = (
        n * p / 2 * LOG_PI
        - p * LOG_2
        - mv_gamma_ln(p, n / 2)
        - m * n / 2 * np.log(b)
        - n * params.Xi.log_pdet
    )
    log_g = _g_rho(rho, b, n, me, form)
    return float(log_const + log_g + (n - me - 1) / 2 * T.log_pdet + params.h.log_h(_nonneg(u)))


def log_density_pinv_transform(S, params: GbsParams, form="reciprocal") -> float:
    """Log-density of ``S = T^+`` for a GBS matrix ``T``."""
    S = _as_psd(S, require_distinct=True)
    _check_in_support(S, params, what="S")
    n, p, me = params.n, params.p, params.m_eff
    Sp = S.pinv()
    Sm = S.matrix()
    D = params.Delta.matrix()
    Dp = psd_power(params.Delta, -1.0).matrix()
    Xi2p = psd_power(params.Xi, -2.0).matrix()
    psi = _ratio_eigs(Dp @ Sp @ Dp, p)
    log_g, _ = g_factor(psi, n, me, form)
    u = np.trace(Xi2p @ (Dp @ Sp @ Dp + D @ Sm @ D - 2 * D @ Sm @ Sp @ Dp))
    log_omega = (-(n + 3 * me + 1) / 2 + p) * S.log_pdet
    return float(_log_scale_const(params, p) + log_g + log_omega + params.h.log_h(_nonneg(u)))


def log_density_congruence(Y, C, params: GbsParams, variant: str = "closed_form", form="reciprocal") -> float:
    """Log-density of ``Y = C' T C`` for an invertible m x m matrix ``C``.

    Requires ``p = n``.  Variants:

    ``"closed_form"``
        The closed form in Y: G-factor eigenvalues from
        ``(C beta C')^+ Y``, ``|det C|^-n`` and the eigenvalues of ``Y`` in
        place of those of ``T``.
    ``"consistent"``
        Same, with the G-factor eigenvalues taken from ``(C' beta C)^+ Y``,
        which are the eigenvalues of ``beta^+ T``.  Exact when ``p = m``.
    ``"exact"``
        Change of variables through :func:`congruence_log_jacobian`; valid
        for every ``p`` but needs ``s = m``.

    All three coincide for ``p = m`` and symmetric ``C``.

    Raises
    ------
    SingularC
        If ``|det C| < 1e-12 |C|^m``.
    """
    C = np.asarray(C, dtype=float)
    n, m, me = params.n, params.m, params.m_eff
    if C.shape != (m, m):
        raise DomainError(f"C must be {m} x {m}")
    det = np.linalg.det(C)
    if abs(det) < 1e-12 * np.linalg.norm(C) ** m:
        raise SingularC(f"|det C| = {abs(det):.3g} is numerically zero")
    if params.p != n:
        raise DomainError(f"congruence density needs p = n, got p={params.p}, n={n}")
    if variant not in ("closed_form", "consistent", "exact"):
        raise DomainError(f"variant must be 'closed_form', 'consistent' or 'exact', got {variant!r}")
    Y = _as_psd(Y, require_distinct=True)
    if Y.dim != m or Y.rank != n:
        raise SupportError(f"Y must be {m} x {m} of rank {n}")
    if variant == "exact":
        if params.s != m:
            raise DomainError("the exact congruence density needs a full-rank scale matrix")
        Cinv = np.linalg.inv(C)
        T = PsdRankQ.from_matrix(Cinv.T @ Y.matrix() @ Cinv)
        return float(log_density_gbs(T, params, form) - _congruence_log_jacobian(T, C))
    Ym, Yp = Y.matrix(), Y.pinv()
    beta = params.beta.matrix()
    M = C @ beta @ C.T if variant == "closed_form" else C.T @ beta @ C
    eta_vals = np.linalg.eigvals(moore_penrose(M) @ Ym).real
    eta_vals = np.sort(eta_vals[eta_vals > RANK_TOL * np.max(np.abs(eta_vals))])[::-1]
    log_g, _ = g_factor(eta_vals, n, me, form)
    DC = params.Delta.matrix() @ C
    DCp = moore_penrose(DC)
    Xi2p = psd_power(params.Xi, -2.0).matrix()
    u = np.trace(Xi2p @ (DCp.T @ Ym @ DCp + DC @ Yp @ DC.T - 2 * DC @ Yp @ Ym @ DCp))
    log_const = (
        n * n / 2 * LOG_PI
        - n * LOG_2
        - mv_gamma_ln(n, n / 2)
        - n * params.Xi.log_pdet
        - n / 2 * params.beta.log_pdet
        - n * np.log(abs(det))
    )
    return float(log_const + log_g + (n - me - 1) / 2 * Y.log_pdet + params.h.log_h(_nonneg(u)))


# -- univariate ----------------------------------------------------------------


def logpdf_univ_gbs(t, params: UnivariateGbsParams, strict=True):
    """Log of the univariate GBS density, vectorized over ``t > 0``."""
    t = np.asarray(t, dtype=float)
    if np.any(~(t > 0)):
        raise DomainError("t must be positive")
    a, b = params.alpha, params.beta
    with np.errstate(over="ignore"):
        u = np.maximum((t / b + b / t - 2) / a**2, 0.0)
    out = -1.5 * np.log(t) + np.log(t + b) - np.log(2 * a * np.sqrt(b)) + params.h.log_h(u, strict=strict)
    return out if np.ndim(out) else float(out)


def pdf_univ_gbs(t, params: UnivariateGbsParams, strict=True):
    return np.exp(logpdf_univ_gbs(t, params, strict))


def logpdf_univ_sqrt_gbs(v, params: UnivariateGbsParams, strict=True):
    """Log-density of ``V = sqrt(T)``, vectorized over ``v > 0``."""
    v = np.asarray(v, dtype=float)
    if np.any(~(v > 0)):
        raise DomainError("v must be positive")
    a, b = params.alpha, params.beta
    with np.errstate(over="ignore"):
        u = np.maximum((v**2 / b + b / v**2 - 2) / a**2, 0.0)
    out = np.log1p(b / v**2) - np.log(a * np.sqrt(b)) + params.h.log_h(u, strict=strict)
    return out if np.ndim(out) else float(out)


def pdf_univ_sqrt_gbs(v, params: UnivariateGbsParams, strict=True):
    return np.exp(logpdf_univ_sqrt_gbs(v, params, strict))


# -- eigenvalues -----------------------------------------------------------------


def _require_isotropic(params: GbsParams):
    iso = params.isotropic_values()
    if iso is None:
        raise DomainError("eigenvalue density needs Xi = xi I_m and beta = b I_m")
    return iso


def eigenvalue_joint_log_density(lam, params: GbsParams, conventional: bool = False) -> float:
    """Joint log-density of the ``p`` nonzero eigenvalues of a GBS matrix.

    Valid for isotropic parameters, where the density of ``T`` depends on
    ``T`` only through its spectrum.  ``lam`` must be strictly decreasing.
    The eigenvector frame is integrated out with the Stiefel constant
    ``pi^{pm/2} / Gamma_p[m/2]``; ``conventional=True`` uses the volume of
    the unnormalized invariant measure, which is ``2^p`` times larger.
    """
    _require_isotropic(params)
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    m, p = params.m, params.p
    if lam.size != p:
        raise DomainError(f"expected {p} eigenvalues, got {lam.size}")
    if np.any(lam <= 0) or np.any(np.diff(lam) >= 0):
        raise DomainError("eigenvalues must be positive and strictly decreasing")
    T = PsdRankQ(np.eye(m)[:, :p], lam)
    return float(
        log_density_gbs(T, params)
        + psd_eigen_log_factor(lam, params.m_eff)
        + stiefel_log_volume(p, params.m_eff, conventional)
    )


def isotropic_eigen_logpdf(lam, params: GbsParams, conventional: bool = False) -> np.ndarray:
    """Vectorized :func:`eigenvalue_joint_log_density` over rows of ``lam``.

    ``lam`` has shape ``(..., p)`` with each row strictly decreasing.
    Rows that violate the ordering, and points outside a bounded generator
    support, map to ``-inf``.
    """
    xi, b = _require_isotropic(params)
    lam = np.asarray(lam, dtype=float)
    n, p, me = params.n, params.p, params.m_eff
    if lam.shape[-1] != p:
        raise DomainError(f"last axis must have length {p}")
    iu = np.triu_indices(p, 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        delta = lam / b
        e = n + me - 2 * p
        log_g = np.sum(np.log1p(1 / delta), axis=-1)
        if e:
            log_g = log_g + e * np.sum(np.log(np.abs(1 - 1 / delta)), axis=-1)
        pair = delta[..., iu[0]] * delta[..., iu[1]]
        log_g = log_g + np.sum(np.log(np.abs(1 - 1 / pair)), axis=-1)
        u = np.sum(delta + 1 / delta - 2, axis=-1) / xi**2
        log_t = (
            n * p / 2 * LOG_PI
            - p * LOG_2
            - mv_gamma_ln(p, n / 2)
            - n * params.s * np.log(xi)
            - n * params.s / 2 * np.log(b)
            + log_g
            + (n - me - 1) / 2 * np.sum(np.log(lam), axis=-1)
            + params.h.log_h(np.maximum(u, 0.0), strict=False)
        )
        gaps = lam[..., iu[0]] - lam[..., iu[1]]
        log_frame = -p * LOG_2 + (me - p) * np.sum(np.log(lam), axis=-1) + np.sum(np.log(gaps), axis=-1)
        out = log_t + log_frame + stiefel_log_volume(p, me, conventional)
        bad = np.any(lam <= 0, axis=-1) | np.any(gaps <= 0, axis=-1)
    return np.where(bad, -np.inf, out)
