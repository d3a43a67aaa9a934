"""Turn a price series into a binned log-return target distribution."""

import tempfile
from pathlib import Path

import numpy as np

from photonic_qcbm.training import choose_metric, csv_returns_target

rng = np.random.default_rng(5)
prices = 100 * np.exp(np.cumsum(0.01 * rng.standard_t(4, size=1500)))
with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "prices.csv"
    path.write_text("date,price\n" + "".join(f"d{i},{float(p)!r}\n" for i, p in enumerate(prices)))
    target = csv_returns_target(path, bins=20)

print(target.provenance)
print("metric:", choose_metric(target))
lo, hi = target.provenance["range"]
edges = np.linspace(lo, hi, target.bin_count + 1)
for left, p in zip(edges, target.bin_probs):
    print(f"{left:+.4f} {'#' * int(round(p * 200))}")
