"""Analytic Jacobians against finite differences on matrix manifolds."""

import numpy as np

from singular_gbs import RngSpec, jacobian_campaign
from singular_gbs.jacobians import RankRect, difference_transform, difference_log_jacobian, numeric_manifold_log_jacobian

rng = np.random.default_rng(0)
H = np.linalg.qr(rng.standard_normal((3, 3)))[0][:, :2]
Q = np.linalg.qr(rng.standard_normal((2, 2)))[0]
# singular values with d_i d_j = 1 or d_i = 1 are zeros of the Jacobian; stay clear of them
W = (H * [2.5, 0.7]) @ Q.T

analytic = difference_log_jacobian(W)
numeric = numeric_manifold_log_jacobian(difference_transform, W, RankRect(3, 2, 2), richardson=True)
print(f"W -> W - W'^+ : analytic {analytic:.10f}  finite differences {numeric:.10f}")

report = jacobian_campaign([(3, 2, 1, 1), (3, 2, 2, 2), (4, 3, 2, 2)], trials=25, rng=RngSpec(3))
for row in report.details["rows"]:
    print(f"{row['map']:10s} (n, m, p, s) = {tuple(row['shape'])}: p95 relative error {row['p95']:.2e}")
