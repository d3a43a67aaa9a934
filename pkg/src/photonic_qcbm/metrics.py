"""Divergences between discrete distributions."""

from __future__ import annotations

import numpy as np

from .errors import InputError

#: Additive smoothing applied to model probabilities inside the KL divergence.
KL_SMOOTHING = 1e-12


def _pair(p, q) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(p, dtype=float).ravel()
    q = np.asarray(q, dtype=float).ravel()
    if p.shape != q.shape:
        raise InputError(f"length mismatch: {len(p)} vs {len(q)}")
    return p, q


def kl_divergence(p, q, smoothing: float = KL_SMOOTHING) -> float:
    """``sum_x p(x) log(p(x) / (q(x) + smoothing))`` over bins where ``p > 0``.

    ``p`` is the target and ``q`` the model. Natural logarithm.
    """
    p, q = _pair(p, q)
    support = p > 0
    with np.errstate(divide="ignore"):
        terms = p[support] * np.log(p[support] / (q[support] + smoothing))
    return float(terms.sum())


def tvd(p, q) -> float:
    """Total variation distance ``0.5 * sum_x |p(x) - q(x)|``."""
    p, q = _pair(p, q)
    return float(0.5 * np.abs(p - q).sum())
