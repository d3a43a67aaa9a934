"""Born-machine training: targets, binning, loss pipeline and SPSA.

The model distribution is the estimator output over ``n``-click patterns,
pushed through a fixed bin map onto the data histogram. Patterns are split
in canonical (lexicographic) rank order into ``B`` contiguous, near-equal
blocks.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import InputError, InsufficientDataError, QCBMError
from .fock import FockState, ideal_distribution
from .mesh import MeshParams, compose
from .metrics import KL_SMOOTHING, kl_divergence, tvd
from .mitigation import EstimatorOutput, estimate, ideal_reference
from .noise import LossModel, lossy_sample

ESTIMATORS = ("lossless", "postselect", "recycled_raw", "recycled_mitigated")
METRICS = ("kl", "tvd")


class ParseError(InputError):
    """A dataset row could not be parsed; ``line`` is 1-based."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


# ---------------------------------------------------------------------------
# binning


@dataclass(frozen=True, eq=False)
class BinMap:
    m: int
    n: int
    bin_count: int
    assignment: np.ndarray

    @property
    def pattern_count(self) -> int:
        return len(self.assignment)

    def block_sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.bin_count)


def build_bin_map(m: int, n: int, bins: int) -> BinMap:
    """Split the ``C(m, n)`` ranked patterns into ``bins`` contiguous blocks.

    Bin ``b`` receives ranks ``[floor(b*S/B), floor((b+1)*S/B))``.
    """
    size = math.comb(m, n)
    if bins < 1 or bins > size:
        raise InputError(f"{bins} bins requested for {size} patterns")
    edges = (np.arange(bins + 1) * size) // bins
    assignment = np.searchsorted(edges, np.arange(size), side="right") - 1
    assignment.setflags(write=False)
    return BinMap(m, n, bins, assignment)


def model_bin_distribution(est: EstimatorOutput | np.ndarray, bin_map: BinMap) -> np.ndarray:
    probs = est.probs if isinstance(est, EstimatorOutput) else np.asarray(est, dtype=float)
    if len(probs) != bin_map.pattern_count:
        raise InputError(f"{len(probs)} pattern probabilities for a {bin_map.pattern_count}-pattern map")
    return np.bincount(bin_map.assignment, weights=probs, minlength=bin_map.bin_count)


# ---------------------------------------------------------------------------
# targets


@dataclass(frozen=True, eq=False)
class TargetDistribution:
    bin_probs: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        p = np.array(self.bin_probs, dtype=float, copy=True)
        if p.ndim != 1 or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise InputError("target must be a non-negative vector summing to 1")
        p.setflags(write=False)
        object.__setattr__(self, "bin_probs", p)

    @property
    def bin_count(self) -> int:
        return len(self.bin_probs)

    def sparsity(self) -> float:
        """Fraction of empty bins."""
        return float(np.mean(self.bin_probs == 0))


def _normal_pdf(x, mu, sigma):
    return np.exp(-0.5 * ((x - mu) / sigma) ** 2) / (sigma * math.sqrt(2 * math.pi))


def gaussian_mixture_target(
    mu1: float = -2.0,
    mu2: float = 2.0,
    sigma1: float = 0.5,
    sigma2: float = 0.5,
    weight: float = 0.5,
    x_min: float = -4.0,
    x_max: float = 4.0,
    bins: int = 50,
    sub_points: int = 64,
) -> TargetDistribution:
    """Histogram of ``weight*N(mu1, sigma1) + (1-weight)*N(mu2, sigma2)`` on ``[x_min, x_max]``.

    Each bin integrates the density by the midpoint rule on ``sub_points``
    points; the histogram is renormalised over the range.
    """
    if not x_min < x_max:
        raise InputError(f"degenerate range [{x_min}, {x_max}]")
    if sigma1 <= 0 or sigma2 <= 0 or not 0 <= weight <= 1 or bins < 1:
        raise InputError("need positive sigmas, weight in [0, 1] and bins >= 1")
    width = (x_max - x_min) / bins
    offsets = (np.arange(sub_points) + 0.5) / sub_points
    x = x_min + width * (np.arange(bins)[:, None] + offsets[None, :])
    density = weight * _normal_pdf(x, mu1, sigma1) + (1 - weight) * _normal_pdf(x, mu2, sigma2)
    probs = density.mean(axis=1) * width
    provenance = {
        "kind": "gaussian_mixture",
        "mu1": mu1, "mu2": mu2, "sigma1": sigma1, "sigma2": sigma2,
        "weight": weight, "x_min": x_min, "x_max": x_max, "bins": bins,
    }
    return TargetDistribution(probs / probs.sum(), provenance)


def read_returns(path: str | Path) -> np.ndarray:
    """Log returns from a CSV with a ``price`` column or a ``log_return`` column."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise InputError(f"{path} is empty") from None
        if "log_return" in header:
            col, kind = header.index("log_return"), "log_return"
        elif "price" in header:
            col, kind = header.index("price"), "price"
        else:
            raise ParseError("header needs a 'price' or 'log_return' column", 1)
        values = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(row)}", lineno)
            try:
                v = float(row[col])
            except ValueError:
                raise ParseError(f"not a number: {row[col]!r}", lineno) from None
            if not math.isfinite(v) or (kind == "price" and v <= 0):
                raise ParseError(f"invalid {kind} {row[col]!r}", lineno)
            values.append(v)
    values = np.asarray(values)
    if kind == "price":
        if len(values) < 2:
            raise InputError("need at least two prices to form a return")
        return np.diff(np.log(values))
    if len(values) < 1:
        raise InputError("no returns in dataset")
    return values


def csv_returns_target(
    path: str | Path, bins: int, clip_quantiles: tuple[float, float] = (0.005, 0.995)
) -> TargetDistribution:
    """Histogram of daily log returns, clipped to the given quantiles.

    A degenerate range (all returns equal) is widened to one unit around the
    value, which puts all mass in the central bin.
    """
    lo_q, hi_q = clip_quantiles
    if not 0 <= lo_q < hi_q <= 1 or bins < 1:
        raise InputError("need 0 <= lo < hi <= 1 and bins >= 1")
    returns = read_returns(path)
    lo, hi = np.quantile(returns, [lo_q, hi_q])
    if hi <= lo:
        lo, hi = lo - 0.5, lo + 0.5
    clipped = np.clip(returns, lo, hi)
    hist, _ = np.histogram(clipped, bins=bins, range=(lo, hi))
    provenance = {
        "kind": "csv_dataset", "path": str(path), "bins": bins,
        "clip_quantiles": [lo_q, hi_q], "range": [float(lo), float(hi)], "rows": int(len(returns)),
    }
    return TargetDistribution(hist / hist.sum(), provenance)


def choose_metric(target: TargetDistribution, sparse_fraction: float = 0.1) -> str:
    """TVD for sparse dataset histograms, KL otherwise."""
    if target.provenance.get("kind") == "csv_dataset" and target.sparsity() >= sparse_fraction:
        return "tvd"
    return "kl"


# ---------------------------------------------------------------------------
# loss pipeline


@dataclass(frozen=True)
class Pipeline:
    """How model probabilities are obtained for one loss evaluation."""

    input_state: FockState
    eta: float = 0.0
    shots: int = 0
    method: str = "lossless"
    mitigation_iters: int = 5
    mitigation_tol: float = 1e-6

    def __post_init__(self):
        if not isinstance(self.input_state, FockState):
            object.__setattr__(self, "input_state", FockState(tuple(self.input_state)))
        if self.method not in ESTIMATORS:
            raise InputError(f"unknown estimator {self.method!r}")
        if self.method != "lossless" and self.shots < 1:
            raise InputError("sampled estimators need shots >= 1")
        LossModel(self.eta)

    @property
    def n(self) -> int:
        return self.input_state.photon_count()

    @property
    def shots_per_evaluation(self) -> int:
        return 0 if self.method == "lossless" else self.shots


def model_estimate(params: MeshParams, pipeline: Pipeline, rng=None) -> EstimatorOutput:
    """Estimator output for the circuit ``params`` under ``pipeline``.

    The lossless method uses exact probabilities and draws no samples.
    """
    ideal = ideal_distribution(compose(params), pipeline.input_state)
    if pipeline.method == "lossless":
        return ideal_reference(ideal)
    counts = lossy_sample(ideal, LossModel(pipeline.eta), pipeline.shots, rng)
    options = {}
    if pipeline.method == "recycled_mitigated":
        options = {"max_iters": pipeline.mitigation_iters, "tol": pipeline.mitigation_tol}
    return estimate(counts, pipeline.n, pipeline.method, **options)


def score(model_bins: np.ndarray, target: TargetDistribution, metric: str, smoothing: float = KL_SMOOTHING) -> float:
    if metric == "kl":
        return kl_divergence(target.bin_probs, model_bins, smoothing)
    if metric == "tvd":
        return tvd(target.bin_probs, model_bins)
    raise InputError(f"unknown metric {metric!r}")


def evaluate_loss(
    params: MeshParams,
    pipeline: Pipeline,
    target: TargetDistribution,
    bin_map: BinMap,
    metric: str = "kl",
    rng=None,
) -> float:
    """Loss of the binned model distribution against ``target``."""
    if bin_map.bin_count != target.bin_count:
        raise InputError("bin map and target disagree on the number of bins")
    if bin_map.m != params.m or bin_map.n != pipeline.n:
        raise InputError("bin map shape does not match the circuit")
    est = model_estimate(params, pipeline, rng)
    return score(model_bin_distribution(est, bin_map), target, metric)


@dataclass
class LossFunction:
    """Loss closure handed to :func:`spsa_train`."""

    pipeline: Pipeline
    target: TargetDistribution
    bin_map: BinMap
    metric: str = "kl"

    def __call__(self, params: MeshParams, rng=None) -> float:
        return evaluate_loss(params, self.pipeline, self.target, self.bin_map, self.metric, rng)

    @property
    def shots_per_evaluation(self) -> int:
        return self.pipeline.shots_per_evaluation

    def exact(self) -> "LossFunction":
        """Same target and metric with exact lossless probabilities."""
        lossless = Pipeline(self.pipeline.input_state)
        return LossFunction(lossless, self.target, self.bin_map, self.metric)


# ---------------------------------------------------------------------------
# SPSA


@dataclass(frozen=True)
class SpsaConfig:
    """Gain schedule ``a_k = a / (A + k)**alpha``, ``c_k = c / k**gamma``.

    ``a=None`` calibrates ``a`` so that the first update moves every free
    phase by about ``target_step`` radians (all coordinates of an SPSA step
    share one magnitude), averaged over ``calibration_samples`` gradient
    estimates; ``big_a=None`` uses ``0.1 * max_iters``.
    """

    a: float | None = None
    c: float = 0.1
    alpha: float = 0.602
    gamma: float = 0.101
    big_a: float | None = None
    max_iters: int = 300
    seed: int = 0
    record_every: int = 1
    target_step: float = 0.1
    calibration_samples: int = 10

    def __post_init__(self):
        if self.a is not None and self.a < 0:
            raise InputError("a must be >= 0")
        if self.c <= 0 or not 0 < self.alpha <= 1 or not 0 < self.gamma <= 1:
            raise InputError("need c > 0 and alpha, gamma in (0, 1]")
        if self.max_iters < 0 or self.record_every < 1:
            raise InputError("need max_iters >= 0 and record_every >= 1")

    @property
    def stability(self) -> float:
        return 0.1 * self.max_iters if self.big_a is None else self.big_a


@dataclass(frozen=True)
class HistoryRecord:
    iteration: int
    loss_value: float
    method: str
    shots_spent: int
    params_snapshot_ref: int
    exact_loss: float | None = None


@dataclass
class TrainingHistory:
    method: str
    records: list[HistoryRecord] = field(default_factory=list)
    snapshots: list[np.ndarray] = field(default_factory=list)
    gain_a: float = 0.0
    status: str = "ok"

    def losses(self) -> np.ndarray:
        return np.array([r.loss_value for r in self.records])

    def exact_losses(self) -> np.ndarray:
        return np.array([np.nan if r.exact_loss is None else r.exact_loss for r in self.records])

    def iterations(self) -> np.ndarray:
        return np.array([r.iteration for r in self.records])

    @property
    def final(self) -> HistoryRecord:
        return self.records[-1]

    def final_params(self, template):
        return template.with_phases(self.snapshots[self.records[-1].params_snapshot_ref])


def _spsa_gradient(loss, params, mask, ck, pert_rng, eval_rng) -> tuple[np.ndarray, float, float]:
    delta = np.zeros(len(params.phases))
    delta[mask] = pert_rng.choice((-1.0, 1.0), size=int(mask.sum()))
    plus = loss(params.with_phases(params.phases + ck * delta), eval_rng)
    minus = loss(params.with_phases(params.phases - ck * delta), eval_rng)
    # delta is +-1 on free entries, so delta**-1 == delta
    return (plus - minus) / (2 * ck) * delta, plus, minus


def spsa_train(
    initial: MeshParams,
    cfg: SpsaConfig,
    loss: Callable,
    method: str | None = None,
    monitor: Callable[[MeshParams], float] | None = None,
) -> TrainingHistory:
    """Minimise ``loss(params, rng)`` with simultaneous-perturbation gradients.

    Every loss call draws fresh samples from a dedicated evaluation stream;
    perturbation directions come from a separate stream, both derived from
    ``cfg.seed``. The unperturbed loss is recorded at iteration 0 and every
    ``cfg.record_every`` iterations after, together with ``monitor(params)``
    when a monitor is supplied.
    """
    method = method or getattr(getattr(loss, "pipeline", None), "method", "custom")
    shots_each = int(getattr(loss, "shots_per_evaluation", 0))
    pert_seq, eval_seq = np.random.SeedSequence(cfg.seed).spawn(2)
    pert_rng = np.random.default_rng(pert_seq)
    eval_rng = np.random.default_rng(eval_seq)
    mask = initial.free_mask()
    params = initial
    history = TrainingHistory(method)
    spent = 0

    def evaluate(p: MeshParams, iteration: int) -> float:
        nonlocal spent
        spent += shots_each
        try:
            return float(loss(p, eval_rng))
        except InsufficientDataError as exc:
            exc.iteration = iteration
            raise

    def record(iteration: int, value: float) -> None:
        history.snapshots.append(np.array(params.phases))
        exact = None if monitor is None else float(monitor(params))
        history.records.append(
            HistoryRecord(iteration, value, method, spent, len(history.snapshots) - 1, exact)
        )

    big_a = cfg.stability
    a = cfg.a
    if a is None:
        c1 = cfg.c
        mags = []
        for _ in range(cfg.calibration_samples):
            spent += 2 * shots_each
            g, _, _ = _spsa_gradient(loss, params, mask, c1, pert_rng, eval_rng)
            mags.append(np.mean(np.abs(g[mask])))
        mean_mag = float(np.mean(mags)) if mags else 0.0
        a = cfg.target_step * (big_a + 1) ** cfg.alpha / mean_mag if mean_mag > 0 else 0.0
    history.gain_a = float(a)

    value = evaluate(params, 0)
    record(0, value)
    if not math.isfinite(value):
        history.status = "aborted: non-finite loss at iteration 0"
        return history

    for k in range(1, cfg.max_iters + 1):
        ak = a / (big_a + k) ** cfg.alpha
        ck = cfg.c / k**cfg.gamma
        spent += 2 * shots_each
        try:
            g, plus, minus = _spsa_gradient(loss, params, mask, ck, pert_rng, eval_rng)
        except InsufficientDataError as exc:
            exc.iteration = k
            raise
        if not (math.isfinite(plus) and math.isfinite(minus)):
            record(k, float("nan"))
            history.status = f"aborted: non-finite loss at iteration {k}"
            return history
        params = params.with_phases(params.phases - ak * g)
        if k % cfg.record_every == 0 or k == cfg.max_iters:
            value = evaluate(params, k)
            record(k, value)
            if not math.isfinite(value):
                history.status = f"aborted: non-finite loss at iteration {k}"
                return history
    return history


@dataclass(frozen=True, eq=False)
class FlatParams:
    """Unconstrained parameter vector with the interface :func:`spsa_train` expects."""

    phases: np.ndarray

    def __post_init__(self):
        p = np.array(self.phases, dtype=float, copy=True).ravel()
        p.setflags(write=False)
        object.__setattr__(self, "phases", p)

    def with_phases(self, phases) -> "FlatParams":
        return FlatParams(phases)

    def free_mask(self) -> np.ndarray:
        return np.ones(len(self.phases), dtype=bool)


def quadratic_test_loss(center) -> Callable:
    """Convex bowl ``|x - center|**2`` over a flat vector; used to sanity-check SPSA."""
    center = np.asarray(center, dtype=float)

    def loss(params, rng=None):
        x = params.phases if hasattr(params, "phases") else np.asarray(params)
        return float(np.sum((x - center) ** 2))

    return loss


__all__ = [
    "BinMap", "TargetDistribution", "Pipeline", "LossFunction", "SpsaConfig", "HistoryRecord",
    "TrainingHistory", "ParseError", "FlatParams", "build_bin_map", "model_bin_distribution", "gaussian_mixture_target",
    "csv_returns_target", "read_returns", "choose_metric", "model_estimate", "evaluate_loss", "score",
    "spsa_train", "quadratic_test_loss", "QCBMError",
]
