"""Estimators of the ideal ``n``-click distribution from lossy counts.

Three estimators share one output type:

* ``ideal_reference`` -- the exact lossless distribution restricted to
  collision-free outcomes; the target every other estimator is scored on.
* ``postselect`` -- frequencies of the ``n``-click stratum only.
* ``recycle`` + ``mitigate`` -- rebuild ``n``-click probabilities from the
  ``(n-1)``-click stratum and then subtract the interference term.

Recycling. With ``q(t)`` the frequency of the ``(n-1)``-click pattern ``t``,
every ``n``-click pattern ``s`` receives ``R(s) = sum_{i in s} q(s - e_i)``
and ``p_R = R / sum R``. Under single-photon loss of collision-free outcomes
this is ``p_R = p1 * p_id + (1 - p1) * I`` with
``C(s) = (1/n) sum_{i in s} sum_{j not in s} p_id(s - e_i + e_j)``,
``p1 = 1 / (1 + sum C)`` and ``I = C / sum C``.

Mitigation. The post-processing used here is a fixed-point interference
subtraction, ``p <- max(0, Z * p_R - C[p])`` renormalised, with
``Z = 1 + sum C[p]``, started from ``p_R``. It is this package's own
concrete choice of post-processing; the true ideal distribution is a fixed
point of it, but it is not guaranteed to converge and cannot restore the part
of ``p_id`` that recycling annihilates (see ``recycling_null_dimension``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DegenerateInputError, InputError, InsufficientDataError
from .fock import DistributionTable
from .metrics import KL_SMOOTHING, kl_divergence, tvd
from .noise import LossyCounts, click_codes, click_space, encode

METHODS = ("lossless", "postselect", "recycled_raw", "recycled_mitigated")
#: Collision-free mass below this is treated as round-off, not signal.
MIN_REFERENCE_MASS = 1e-12


@dataclass(frozen=True)
class EstimatorOutput:
    """A normalised table over all ``C(m, n)`` ``n``-click patterns."""

    table: DistributionTable
    method: str
    shots_used: int
    converged: bool | None = None
    iterations: int | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise InputError(f"unknown estimator method {self.method!r}")
        if self.table.kind != "click" or not self.table.normalized:
            raise InputError("estimator tables are normalised click tables")

    @property
    def probs(self) -> np.ndarray:
        return self.table.probs

    @property
    def n(self) -> int:
        return int(self.table.space[0].sum())


@dataclass(frozen=True)
class RecycledDecomposition:
    """Recycled table, plus ``p1`` and the interference term when an oracle was supplied."""

    recycled: DistributionTable
    n: int
    shots_used: int
    p1: float | None = None
    interference: DistributionTable | None = None

    def as_estimate(self) -> EstimatorOutput:
        return EstimatorOutput(self.recycled, "recycled_raw", self.shots_used)


# ---------------------------------------------------------------------------
# index tables


@lru_cache(maxsize=32)
def _recycle_index(m: int, n: int) -> np.ndarray:
    """Entry ``[s, r]``: row in the ``(n-1)``-click space of ``s`` minus its ``r``-th click."""
    space = click_space(m, n)
    lower = click_codes(m, n - 1)
    codes = encode(space)
    out = np.empty((len(space), n), dtype=np.int64)
    weights = 1 << np.arange(m - 1, -1, -1, dtype=np.int64)
    for row, s in enumerate(space):
        ones = np.flatnonzero(s)
        out[row] = np.searchsorted(lower, codes[row] - weights[ones])
    out.setflags(write=False)
    return out


@lru_cache(maxsize=32)
def _neighbour_index(m: int, n: int) -> np.ndarray:
    """Entry ``[s, r]``: row of ``s - e_i + e_j`` over all ``i in s``, ``j not in s``."""
    space = click_space(m, n)
    codes = encode(space)
    weights = 1 << np.arange(m - 1, -1, -1, dtype=np.int64)
    out = np.empty((len(space), n * (m - n)), dtype=np.int64)
    for row, s in enumerate(space):
        ones, zeros = np.flatnonzero(s), np.flatnonzero(s == 0)
        moved = codes[row] - weights[ones][:, None] + weights[zeros][None, :]
        out[row] = np.searchsorted(codes, moved.ravel())
    out.setflags(write=False)
    return out


def interference_weights(p: np.ndarray, m: int, n: int) -> np.ndarray:
    """``C(s) = (1/n) sum_{i in s, j not in s} p(s - e_i + e_j)``."""
    if n == m:
        return np.zeros_like(p)
    return p[_neighbour_index(m, n)].sum(axis=1) / n


def recycling_null_dimension(m: int, n: int) -> int:
    """Dimension of the part of an ``n``-click distribution invisible to recycling.

    Recycling maps ``C(m, n)`` probabilities through the ``C(m, n-1)``
    lower stratum, so at least ``C(m, n) - C(m, n-1)`` directions are lost
    whenever that difference is positive.
    """
    return max(0, math.comb(m, n) - math.comb(m, n - 1))


# ---------------------------------------------------------------------------
# estimators


def _click_table(m: int, n: int, probs: np.ndarray) -> DistributionTable:
    return DistributionTable(click_space(m, n), probs, kind="click")


def collision_free_probs(ideal: DistributionTable) -> np.ndarray:
    """Unnormalised ideal mass of every ``n``-click pattern, collision outcomes dropped."""
    if ideal.kind != "fock":
        raise InputError("expected a distribution over Fock states")
    m = ideal.m
    n = int(ideal.space[0].sum())
    keep = np.all(ideal.space <= 1, axis=1)
    out = np.zeros(math.comb(m, n))
    out[np.searchsorted(click_codes(m, n), encode(ideal.space[keep]))] = ideal.probs[keep]
    return out


def ideal_reference(ideal: DistributionTable) -> EstimatorOutput:
    """Lossless distribution conditioned on collision-free outcomes."""
    probs = collision_free_probs(ideal)
    total = probs.sum()
    if total <= MIN_REFERENCE_MASS:
        raise DegenerateInputError("ideal distribution has no collision-free mass")
    n = int(ideal.space[0].sum())
    return EstimatorOutput(_click_table(ideal.m, n, probs / total), "lossless", 0)


def postselect(counts: LossyCounts, n: int) -> EstimatorOutput:
    """Frequencies of the ``n``-click stratum, renormalised over that stratum."""
    vec = counts.stratum_vector(n)
    total = int(vec.sum())
    if total == 0:
        raise InsufficientDataError(f"no {n}-click events among {counts.total_shots} shots")
    return EstimatorOutput(_click_table(counts.m, n, vec / total), "postselect", total)


def _lower_stratum(source, n: int) -> tuple[int, np.ndarray, int]:
    if isinstance(source, LossyCounts):
        vec = source.stratum_vector(n - 1).astype(float)
        return source.m, vec, int(vec.sum())
    if isinstance(source, DistributionTable) and source.kind == "click":
        m = source.m
        lower = click_codes(m, n - 1)
        codes = encode(source.space)
        sel = source.space.sum(axis=1) == n - 1
        vec = np.zeros(len(lower))
        vec[np.searchsorted(lower, codes[sel])] = source.probs[sel]
        return m, vec, 0
    raise InputError("recycle needs LossyCounts or a click-pattern DistributionTable")


def recycle(source, n: int, oracle: DistributionTable | None = None) -> RecycledDecomposition:
    """Recycled ``n``-click table built from the ``(n-1)``-click stratum.

    ``source`` is either sampled :class:`LossyCounts` or an exact click-pattern
    table (infinite-sample frequencies). When ``oracle`` (the ideal Fock
    distribution) is given, ``p1`` and the interference term are filled in
    by :func:`single_loss_oracle`.
    """
    if n < 1:
        raise InputError("recycling needs n >= 1")
    m, q, shots = _lower_stratum(source, n)
    if q.sum() <= 0:
        raise InsufficientDataError(f"no {n - 1}-click events to recycle")
    r = q[_recycle_index(m, n)].sum(axis=1)
    recycled = _click_table(m, n, r / r.sum())
    if oracle is None:
        return RecycledDecomposition(recycled, n, shots)
    p1, interference = single_loss_oracle(oracle)
    return RecycledDecomposition(recycled, n, shots, p1, interference)


def single_loss_oracle(ideal: DistributionTable) -> tuple[float, DistributionTable]:
    """``(p1, I)`` by enumerating every single-loss event of every collision-free outcome.

    Each event (outcome ``u``, lost photon ``k``, re-added click ``i``) lands on
    ``s = u - e_k + e_i``; it counts toward the ideal part when ``s == u`` and
    toward the interference term otherwise.
    """
    m = ideal.m
    n = int(ideal.space[0].sum())
    space_codes = click_codes(m, n)
    weights = [1 << (m - 1 - i) for i in range(m)]
    ideal_mass = 0.0
    interference = np.zeros(len(space_codes))
    for occ, p in zip(ideal.space.tolist(), ideal.probs):
        if p == 0.0 or max(occ) > 1:
            continue
        code = sum(w for w, v in zip(weights, occ) if v)
        for k in range(m):
            if not occ[k]:
                continue
            lost = code - weights[k]
            for i in range(m):
                if lost & weights[i]:
                    continue
                if i == k:
                    ideal_mass += p
                else:
                    interference[np.searchsorted(space_codes, lost + weights[i])] += p
    total = ideal_mass + interference.sum()
    if total <= 0:
        raise DegenerateInputError("ideal distribution has no collision-free mass")
    p1 = ideal_mass / total
    if interference.sum() > 0:
        interference = interference / interference.sum()
        table = _click_table(m, n, interference)
    else:
        table = DistributionTable(click_space(m, n), interference, kind="click", normalized=False)
    return float(p1), table


def mitigation_step(p: np.ndarray, recycled: np.ndarray, m: int, n: int) -> np.ndarray:
    """One interference-subtraction update, clipped and renormalised."""
    c = interference_weights(p, m, n)
    z = 1.0 + c.sum()
    nxt = np.maximum(0.0, z * recycled - c)
    total = nxt.sum()
    if total <= 0:
        # everything clipped; keep the recycled table rather than divide by zero
        return recycled.copy()
    return nxt / total


def mitigate(decomp: RecycledDecomposition, max_iters: int = 5, tol: float = 1e-6) -> EstimatorOutput:
    """Fixed-point interference subtraction started from the recycled table.

    Stops after ``max_iters`` updates or once the largest change drops below
    ``tol``. Non-convergence is reported through ``converged=False``.
    """
    if max_iters < 1:
        raise InputError("max_iters must be >= 1")
    table = decomp.recycled
    m, n = table.m, decomp.n
    recycled = table.probs
    p = recycled.copy()
    converged = False
    iterations = 0
    for iterations in range(1, max_iters + 1):
        nxt = mitigation_step(p, recycled, m, n)
        change = np.max(np.abs(nxt - p))
        p = nxt
        if change < tol:
            converged = True
            break
    return EstimatorOutput(
        _click_table(m, n, p), "recycled_mitigated", decomp.shots_used, converged, iterations
    )


def estimate(counts: LossyCounts, n: int, method: str, **mitigation_options) -> EstimatorOutput:
    """Dispatch on an estimator name for sampled data."""
    if method == "postselect":
        return postselect(counts, n)
    if method == "recycled_raw":
        return recycle(counts, n).as_estimate()
    if method == "recycled_mitigated":
        return mitigate(recycle(counts, n), **mitigation_options)
    raise InputError(f"method {method!r} does not estimate from counts")


def estimator_errors(est: EstimatorOutput, reference: EstimatorOutput, smoothing: float = KL_SMOOTHING) -> dict:
    """TVD, KL(reference || estimate) and per-pattern absolute errors."""
    if not est.table.same_space(reference.table):
        raise InputError("estimator and reference live on different pattern spaces")
    abs_err = np.abs(est.probs - reference.probs)
    return {
        "tvd": tvd(reference.probs, est.probs),
        "kl": kl_divergence(reference.probs, est.probs, smoothing),
        "max_abs": float(abs_err.max()),
        "abs_errors": abs_err,
    }
