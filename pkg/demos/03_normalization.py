"""Do the densities integrate to one?

The full-rank 2 x 2 density is integrated over all positive definite
matrices; the eigenvalue density of a rank-2 matrix in three dimensions
is integrated with two conventions for the volume of the eigenvector
frames.  Takes about half a minute.
"""

import numpy as np

from singular_gbs import GbsParams, RngSpec
from singular_gbs.validation import audit_nonsingular_m2, audit_singular_eigen

full = GbsParams.build(2, 0.5 * np.eye(2), np.eye(2))
rep = audit_nonsingular_m2(full, threads=4)
print(f"2 x 2 full rank: mass {rep.metrics['mass']:.10f} ({rep.notes[0]})")

singular = GbsParams.build(2, 0.5 * np.eye(3), np.eye(3))
rep = audit_singular_eigen(singular, draws=40_000, rng=RngSpec(8))
for note in rep.notes:
    print(" ", note)
print(f"  chi-square p-value of the sampler against the density: {rep.metrics['chi2_pvalue']:.3f}")
