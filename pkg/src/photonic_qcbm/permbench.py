"""Additive-error permanent estimation: Gurvits sampling versus a boson sampler.

Gurvits' estimator averages Glynn samples ``prod(x) * prod_i (A x)_i`` over
random sign vectors ``x``; its error is ``eps * ||A||**n`` after
``O(1/eps**2)`` samples, each costing ``O(n**2)``. Squaring the estimate gives
``|Per A|**2`` to within ``eps * (2 + eps) * ||A||**(2n)``.

The sampler route embeds ``A / ||A||`` as the top-left block of a ``2n``-mode
unitary. Injecting one photon into each of the first ``n`` modes, the
probability of seeing one photon in each of the first ``n`` output modes is
``|Per A|**2 / ||A||**(2n)``, so the empirical frequency of that pattern
rescaled by ``||A||**(2n)`` estimates ``|Per A|**2`` to ``eps * ||A||**(2n)``.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InputError, NumericalError, ResourceError
from .fock import (
    MAX_FOCK_STATES,
    as_generator,
    fock_dimension,
    ideal_distribution,
    permanent,
    sample_categorical,
)

#: Glynn samples evaluated per vectorised chunk.
_GLYNN_CHUNK = 65_536


@dataclass(frozen=True)
class PermEstimate:
    """An estimate with its additive-error bound.

    ``kind`` is ``"gurvits"`` (estimates Per A), ``"squared"`` or ``"sampler"``
    (both estimate ``|Per A|**2``).
    """

    value: complex
    samples_used: int
    epsilon: float
    bound: float
    kind: str
    norm: float
    delta: float | None = None

    def error(self, exact: complex) -> float:
        """Additive error against the exact quantity this estimate targets."""
        if self.kind == "gurvits":
            return float(abs(self.value - exact))
        return float(abs(abs(self.value) - abs(exact)))

    def within_bound(self, exact: complex) -> bool:
        return self.error(exact) <= self.bound


def spectral_norm(a, rtol: float = 1e-10, max_iter: int = 10_000, rng=None) -> float:
    """Largest singular value by power iteration on ``A^dag A``.

    Converged once the eigen-residual ``||M v - lam v||`` drops below
    ``rtol * lam``. A fresh random start is drawn whenever progress stalls
    for ``max_iter // 5`` iterations.

    Raises:
        NumericalError: no convergence within ``max_iter`` iterations.
    """
    a = np.asarray(a, dtype=complex)
    if a.size == 0:
        raise InputError("spectral norm of an empty matrix")
    gram = a.conj().T @ a
    scale = np.max(np.abs(gram))
    if scale == 0:
        return 0.0
    gram = gram / scale
    gen = as_generator(0 if rng is None else rng)
    dim = gram.shape[0]
    restart_every = max(1, max_iter // 5)

    def fresh():
        v = gen.normal(size=dim) + 1j * gen.normal(size=dim)
        return v / np.linalg.norm(v)

    v = fresh()
    best = np.inf
    since_best = 0
    for _ in range(max_iter):
        w = gram @ v
        lam = float(np.real(np.vdot(v, w)))
        residual = float(np.linalg.norm(w - lam * v))
        if lam > 0 and residual <= rtol * lam:
            return math.sqrt(lam * scale)
        if residual < best * (1 - 1e-3):
            best, since_best = residual, 0
        else:
            since_best += 1
        norm_w = np.linalg.norm(w)
        if norm_w == 0 or since_best >= restart_every:
            v, best, since_best = fresh(), np.inf, 0
            continue
        v = w / norm_w
    raise NumericalError(f"power iteration did not converge in {max_iter} iterations")


def glynn_sample(a, x) -> complex:
    """``prod_j x_j * prod_i sum_j a_ij x_j``; its mean over uniform signs is Per(a)."""
    a = np.asarray(a, dtype=complex)
    x = np.asarray(x, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or x.shape != (a.shape[1],):
        raise InputError("glynn_sample needs an n x n matrix and a length-n sign vector")
    return complex(np.prod(x) * np.prod(a @ x))


def glynn_samples(a: np.ndarray, signs: np.ndarray) -> np.ndarray:
    """Vectorised :func:`glynn_sample` over the rows of ``signs``."""
    return np.prod(signs, axis=1) * np.prod(signs @ a.T, axis=1)


def exhaustive_glynn(a) -> complex:
    """Mean of the Glynn sample over all ``2**n`` sign vectors (equals Per(a))."""
    a = np.asarray(a, dtype=complex)
    n = a.shape[0]
    if n == 0:
        return 1.0 + 0j
    bits = (np.arange(1 << n)[:, None] >> np.arange(n)[None, :]) & 1
    return complex(glynn_samples(a, 1.0 - 2.0 * bits).mean())


def hoeffding_samples(epsilon: float, delta: float) -> int:
    """``ceil(2 / eps**2 * ln(4 / delta))`` -- real and imaginary parts share ``delta``."""
    if not 0 < epsilon < 1 or not 0 < delta < 1:
        raise InputError("epsilon and delta must lie in (0, 1)")
    return math.ceil(2.0 / epsilon**2 * math.log(4.0 / delta))


def _glynn_mean(a: np.ndarray, samples: int, gen: np.random.Generator) -> complex:
    n = a.shape[0]
    total = 0.0 + 0.0j
    done = 0
    while done < samples:
        size = min(_GLYNN_CHUNK, samples - done)
        signs = gen.choice((-1.0, 1.0), size=(size, n))
        total += glynn_samples(a, signs).sum()
        done += size
    return complex(total / samples)


def gurvits_estimate(a, epsilon: float, delta: float, rng=None, samples: int | None = None) -> PermEstimate:
    """Gurvits' randomized estimate of Per(a) with bound ``eps * ||a||**n``.

    ``samples`` overrides the Hoeffding sample count (``epsilon`` then only
    sets the reported bound).
    """
    a = np.asarray(a, dtype=complex)
    n = a.shape[0]
    t = hoeffding_samples(epsilon, delta) if samples is None else int(samples)
    if t < 1:
        raise InputError("need at least one sample")
    norm = spectral_norm(a)
    if norm == 0:
        return PermEstimate(0j, 0, epsilon, 0.0, "gurvits", 0.0, delta)
    value = _glynn_mean(a, t, as_generator(rng))
    return PermEstimate(value, t, epsilon, epsilon * norm**n, "gurvits", norm, delta)


def squared_bound(epsilon: float, norm: float, n: int) -> float:
    return epsilon * (2 + epsilon) * norm ** (2 * n)


def squared_estimate(a, epsilon: float, delta: float, rng=None, samples: int | None = None) -> PermEstimate:
    """``|G|**2`` for a Gurvits estimate ``G``, bound ``eps * (2 + eps) * ||a||**(2n)``."""
    base = gurvits_estimate(a, epsilon, delta, rng, samples)
    n = np.asarray(a).shape[0]
    return PermEstimate(
        complex(abs(base.value) ** 2), base.samples_used, epsilon, squared_bound(epsilon, base.norm, n), "squared", base.norm, delta
    )


def unitary_dilation(a) -> np.ndarray:
    """``2n x 2n`` unitary whose top-left block is ``a / ||a||``.

    ``[[S, (I - S S^dag)^(1/2)], [(I - S^dag S)^(1/2), -S^dag]]`` with
    ``S = a / ||a||``. Both square roots are built from one SVD of ``S`` so
    that the blocks share singular vectors; singular values are clamped to
    ``[0, 1]``.
    """
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InputError(f"dilation needs a square matrix, got shape {a.shape}")
    norm = spectral_norm(a)
    if norm == 0:
        raise InputError("cannot dilate the zero matrix")
    s = a / norm
    try:
        w, sigma, vh = np.linalg.svd(s)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD failed: {exc}") from exc
    sigma = np.clip(sigma, 0.0, 1.0)
    d = np.sqrt(1.0 - sigma**2)
    v = vh.conj().T
    top = np.hstack([s, (w * d) @ w.conj().T])
    bottom = np.hstack([(v * d) @ vh, -s.conj().T])
    return np.vstack([top, bottom])


def embedded_probability(a) -> float:
    """Exact probability of the pattern ``1^n 0^n`` through the dilation of ``a``."""
    n = np.asarray(a).shape[0]
    dist = ideal_distribution(unitary_dilation(a), (1,) * n + (0,) * n)
    return dist.prob((1,) * n + (0,) * n)


def sampler_estimate(a, shots: int, rng=None, delta: float = 0.05) -> PermEstimate:
    """Estimate ``|Per a|**2`` from ``shots`` simulated runs of the dilated interferometer.

    The reported precision is ``eps = sqrt(ln(2/delta) / (2 * shots))``.
    """
    a = np.asarray(a, dtype=complex)
    n = a.shape[0]
    if shots < 1 or not 0 < delta < 1:
        raise InputError("need shots >= 1 and delta in (0, 1)")
    if fock_dimension(2 * n, n) > MAX_FOCK_STATES:
        raise ResourceError(f"{2 * n}-mode, {n}-photon Fock space exceeds the cap")
    eps = math.sqrt(math.log(2.0 / delta) / (2.0 * shots))
    norm = spectral_norm(a)
    if norm == 0:
        return PermEstimate(0j, shots, eps, 0.0, "sampler", 0.0, delta)
    dist = ideal_distribution(unitary_dilation(a), (1,) * n + (0,) * n)
    counts = sample_categorical(dist, shots, rng)
    hits = counts[dist.index((1,) * n + (0,) * n)]
    scale = norm ** (2 * n)
    return PermEstimate(complex(scale * hits / shots), shots, eps, eps * scale, "sampler", norm, delta)


def random_matrix(n: int, rng=None, scale: float | None = None) -> np.ndarray:
    """Complex Gaussian matrix, entries of variance ``1/n`` unless ``scale`` is given."""
    gen = as_generator(rng)
    s = 1.0 / math.sqrt(2 * n) if scale is None else scale
    return s * (gen.normal(size=(n, n)) + 1j * gen.normal(size=(n, n)))


@dataclass
class ComparisonReport:
    rows: list[dict] = field(default_factory=list)
    exact_squared: float = 0.0
    embedded_probability: float = 0.0
    decay: list[dict] = field(default_factory=list)
    caveat: str = (
        "The embedded probability |Per(A)|^2 / ||A||^(2n) shrinks roughly exponentially "
        "with n, so both estimators need exponentially many samples for a fixed relative error."
    )

    def slope(self, estimator: str) -> float:
        """Least-squares slope of log(rms error) against log(budget)."""
        pts = [(r["budget"], r["rms_error"]) for r in self.rows if r["estimator"] == estimator]
        x = np.log([p[0] for p in pts])
        y = np.log([p[1] for p in pts])
        return float(np.polyfit(x, y, 1)[0])

    def write_csv(self, path: str | Path) -> None:
        fields = ["budget", "estimator", "samples", "cost_units", "rms_error", "max_error", "bound", "seconds"]
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=fields)
            writer.writeheader()
            for row in self.rows:
                writer.writerow({k: row[k] for k in fields})


def embedding_decay(sizes, trials: int = 50, rng=None) -> list[dict]:
    """Mean embedded probability over random Gaussian matrices for each size."""
    gen = as_generator(rng)
    out = []
    for n in sizes:
        probs = []
        for _ in range(trials):
            a = random_matrix(n, gen)
            probs.append(abs(permanent(a)) ** 2 / spectral_norm(a) ** (2 * n))
        out.append({"n": int(n), "mean_probability": float(np.mean(probs))})
    return out


def theorem_comparison(
    a,
    budgets,
    rng=None,
    repeats: int = 20,
    epsilon: float = 0.1,
    delta: float = 0.05,
    decay_sizes=(1, 2, 3, 4, 5),
) -> ComparisonReport:
    """Error versus budget for the squared Gurvits and the sampler estimators.

    At budget ``t`` the sampler uses ``t`` shots and Gurvits ``t`` Glynn
    samples; Gurvits is charged ``n**2`` cost units per sample. Each point
    runs ``repeats`` independent estimates and reports RMS and worst errors.
    """
    a = np.asarray(a, dtype=complex)
    n = a.shape[0]
    gen = as_generator(rng)
    exact_sq = abs(permanent(a)) ** 2
    norm = spectral_norm(a)
    report = ComparisonReport(exact_squared=exact_sq, embedded_probability=exact_sq / norm ** (2 * n))
    for budget in budgets:
        budget = int(budget)
        for name in ("squared", "sampler"):
            errors = []
            start = time.perf_counter()
            for _ in range(repeats):
                if name == "squared":
                    est = squared_estimate(a, epsilon, delta, gen, samples=budget)
                    eps_t = math.sqrt(2.0 / budget * math.log(4.0 / delta))
                    bound = squared_bound(eps_t, norm, n)
                else:
                    est = sampler_estimate(a, budget, gen, delta)
                    bound = est.bound
                errors.append(est.error(exact_sq))
            seconds = (time.perf_counter() - start) / repeats
            report.rows.append({
                "budget": budget,
                "estimator": name,
                "samples": budget,
                "cost_units": budget * (n * n if name == "squared" else 1),
                "rms_error": float(np.sqrt(np.mean(np.square(errors)))),
                "max_error": float(np.max(errors)),
                "bound": float(bound),
                "seconds": seconds,
            })
    if decay_sizes:
        report.decay = embedding_decay(decay_sizes, rng=gen)
    return report
