"""Scalar Birnbaum-Saunders law: density, sampler and a numerical audit.

Run with ``python demos/01_univariate.py``.
"""

import numpy as np

from singular_gbs import GbsParams, RngSpec, UnivariateGbsParams, log_density_gbs, pdf_univ_gbs
from singular_gbs.kernels import make_generator
from singular_gbs.sampling import sample_univ_gbs
from singular_gbs.validation import audit_univariate

params = UnivariateGbsParams(alpha=0.5, beta=1.0)

# The matrix density with 1 x 1 parameters is the scalar density.
t = np.array([0.5, 1.0, 2.0])
matrix = np.exp([log_density_gbs(np.array([[x]]), params.to_matrix_params()) for x in t])
print("scalar density :", pdf_univ_gbs(t, params))
print("1 x 1 matrix   :", matrix)

# beta is the median for every symmetric generator.
for kind in ("gaussian", "pearson7"):
    p = UnivariateGbsParams(1.0, 2.0, make_generator(kind))
    draws = sample_univ_gbs(p, RngSpec(0), 50_000)
    print(f"{kind:9s} sample median {np.median(draws):.4f}")

# Mass, median and a KS test against the quadrature CDF in one report.
report = audit_univariate(params, draws=100_000, rng=RngSpec(1))
print(report.to_json())
