"""Classical Gurvits estimation versus optical sampling of a permanent."""

import numpy as np

from photonic_qcbm.permbench import random_matrix, theorem_comparison

rng = np.random.default_rng(2)
a = random_matrix(3, rng)
report = theorem_comparison(a, [1_000, 10_000, 100_000, 1_000_000], rng, repeats=10)
print(f"|Per(A)|^2 = {report.exact_squared:.5f}, embedded probability {report.embedded_probability:.5f}")
print("budget     estimator  cost_units  rms_error")
for row in report.rows:
    print(f"{row['budget']:9d}  {row['estimator']:9s}  {row['cost_units']:10d}  {row['rms_error']:.2e}")
print("log-log slopes:", {k: round(report.slope(k), 3) for k in ("squared", "sampler")})
print(report.caveat)
