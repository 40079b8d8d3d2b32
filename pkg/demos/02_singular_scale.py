"""A rank-deficient scale matrix.

With ``beta`` of rank 2 in three dimensions every draw lives in the
column space of ``beta``.  The density is taken on that support; points
off it are rejected instead of silently getting density zero.
"""

import numpy as np

from singular_gbs import GbsParams, PsdRankQ, RngSpec, log_density_gbs, sample_gbs
from singular_gbs.errors import SupportError

P = np.linalg.qr(np.array([[1.0, 0.2], [0.3, 1.0], [0.5, -0.4]]))[0]
Xi = PsdRankQ.from_eigen(P, [0.9, 0.6])
beta = PsdRankQ.from_eigen(P, [2.0, 0.8])
params = GbsParams.build(1, Xi, beta, "pearson7")
print(f"n={params.n} m={params.m} rank(beta)={params.s} rank(T)={params.p}")

T, V = sample_gbs(params, RngSpec(3), return_v=True)
print("draw eigenvalues:", T.eigenvalues)
print("distance from the support:", np.linalg.norm(T.vectors - beta.projector() @ T.vectors))

# Two readings of the quadratic form differ when rank(T) < rank(beta) and
# beta is not isotropic; "composed" is the law the sampler produces.
for trace in ("expanded", "composed"):
    print(f"log-density ({trace:8s}):", log_density_gbs(T, params, trace=trace))

try:
    log_density_gbs(np.diag([1.0, 0.0, 0.0]), params)
except SupportError as exc:
    print("off-support point rejected:", exc)
