"""Lossy click sampling on a random interferometer.

Draws shots at several transmissions and shows how the surviving photon
number spreads the detections over click strata.
"""

import numpy as np

from photonic_qcbm import LossModel, ideal_distribution, lossy_sample
from photonic_qcbm.config import default_input_state
from photonic_qcbm.experiments import haar_unitary

m, n, shots = 6, 3, 200_000
rng = np.random.default_rng(7)
u = haar_unitary(m, rng)
ideal = ideal_distribution(u, default_input_state(m, n))

print(f"m={m} n={n} shots={shots}")
print("eta   " + "  ".join(f"{k}-click" for k in range(n + 1)))
for eta in (0.0, 0.3, 0.5, 0.7):
    counts = lossy_sample(ideal, LossModel(eta), shots, rng)
    frac = counts.stratum_totals()[: n + 1] / shots
    print(f"{eta:.1f}   " + "  ".join(f"{f:7.4f}" for f in frac))
