"""Train a small circuit to a two-peak Gaussian mixture with SPSA."""

import numpy as np

from photonic_qcbm.config import default_input_state
from photonic_qcbm.mesh import MeshParams
from photonic_qcbm.training import (
    LossFunction,
    Pipeline,
    SpsaConfig,
    build_bin_map,
    gaussian_mixture_target,
    spsa_train,
)

m, n = 6, 2
state = default_input_state(m, n)
target = gaussian_mixture_target(bins=10)
bin_map = build_bin_map(m, n, target.bin_count)
initial = MeshParams.random(m, 1, rng=np.random.default_rng(3))

for method, eta in (("lossless", 0.0), ("postselect", 0.6)):
    loss = LossFunction(Pipeline(state, eta, 20_000, method), target, bin_map, "kl")
    spsa = SpsaConfig(max_iters=150, seed=11, record_every=25)
    history = spsa_train(initial, spsa, loss, method=method, monitor=loss.exact())
    curve = ", ".join(f"{v:.3f}" for v in history.exact_losses())
    print(f"{method:10s} exact KL every 25 steps: {curve}")
