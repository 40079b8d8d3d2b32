"""Singular matrix variate generalised Birnbaum-Saunders distributions.

Densities with respect to Hausdorff measure, exact samplers, analytic
and finite-difference Jacobians, and numerical audits of the
normalizing constants.
"""

from .distributions import (
    EllipticalParams,
    GbsParams,
    UnivariateGbsParams,
    eigenvalue_joint_log_density,
    log_density_bs_gaussian,
    log_density_congruence,
    log_density_gbs,
    log_density_gbs_isotropic,
    log_density_gbs_nonsingular,
    log_density_pinv_transform,
    log_density_singular_elliptical,
    log_density_sqrt_gbs,
    logpdf_univ_gbs,
    logpdf_univ_sqrt_gbs,
    pdf_univ_gbs,
    pdf_univ_sqrt_gbs,
)
from .errors import *  # noqa: F401,F403
from .jacobians import (
    PsdRank,
    RankRect,
    bs_log_jacobian,
    bs_transform,
    difference_log_jacobian,
    difference_transform,
    g_factor,
    g_factor_ln,
    numeric_manifold_jacobian,
    numeric_manifold_log_jacobian,
)
from .kernels import GeneratorFunction, Kind, make_generator
from .linalg import PsdRankQ, ThinSvd, moore_penrose, mv_gamma_ln, psd_power, stiefel_log_volume, thin_svd
from .sampling import RngSpec, bs_inverse_scalar, invert_bs_transform, sample_gbs, sample_singular_elliptical
from .validation import (
    AuditReport,
    audit_nonsingular_m2,
    audit_singular_eigen,
    audit_univariate,
    jacobian_campaign,
)

__version__ = "0.1.0"
