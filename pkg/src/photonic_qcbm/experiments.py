"""Reusable experiment drivers: estimator benchmarks and three-way training."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.stats import unitary_group

from .config import default_input_state
from .fock import FockState, ideal_distribution
from .mesh import MeshParams
from .metrics import tvd
from .mitigation import ideal_reference, mitigate, postselect, recycle
from .noise import LossModel, lossy_sample
from .training import BinMap, LossFunction, Pipeline, SpsaConfig, TargetDistribution, TrainingHistory, spsa_train


def haar_unitary(m: int, rng) -> np.ndarray:
    return unitary_group.rvs(m, random_state=rng)


def seed_stream(seed: int, *keys: int) -> np.random.Generator:
    """Generator keyed by ``(seed, *keys)``; independent of call order."""
    return np.random.default_rng(np.random.SeedSequence([seed, *keys]))


def mitigation_trial(
    m: int,
    n: int,
    eta: float,
    shots: int,
    seed: int,
    input_state: FockState | None = None,
    max_iters: int = 5,
    tol: float = 1e-6,
) -> dict:
    """TVD to the ideal reference of post-selected, recycled and mitigated estimates."""
    state = input_state or default_input_state(m, n)
    u = haar_unitary(m, seed_stream(seed, 0))
    ideal = ideal_distribution(u, state)
    ref = ideal_reference(ideal)
    counts = lossy_sample(ideal, LossModel(eta), shots, seed_stream(seed, 1))
    post = postselect(counts, n)
    decomp = recycle(counts, n)
    mit = mitigate(decomp, max_iters, tol)
    return {
        "seed": seed,
        "eta": eta,
        "shots": shots,
        "postselect_events": post.shots_used,
        "recycled_events": decomp.shots_used,
        "tvd_postselect": tvd(ref.probs, post.probs),
        "tvd_recycled_raw": tvd(ref.probs, decomp.recycled.probs),
        "tvd_mitigated": tvd(ref.probs, mit.probs),
        "mitigation_converged": mit.converged,
    }


def _trial_star(args):
    return mitigation_trial(*args)


def mitigation_benchmark(m, n, etas, shots, seeds, jobs: int = 1, **options) -> dict:
    """Run :func:`mitigation_trial` over ``etas x range(seeds)``; results are order-stable."""
    state = options.pop("input_state", None)
    tasks = [
        (m, n, eta, shots, s, state, options.get("max_iters", 5), options.get("tol", 1e-6))
        for eta in etas
        for s in range(seeds)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            rows = list(pool.map(_trial_star, tasks))
    else:
        rows = [_trial_star(t) for t in tasks]
    summary = {}
    for eta in etas:
        sel = [r for r in rows if r["eta"] == eta]
        post = np.array([r["tvd_postselect"] for r in sel])
        mit = np.array([r["tvd_mitigated"] for r in sel])
        summary[str(eta)] = {
            "median_tvd_postselect": float(np.median(post)),
            "median_tvd_mitigated": float(np.median(mit)),
            "median_tvd_recycled_raw": float(np.median([r["tvd_recycled_raw"] for r in sel])),
            "mitigated_win_fraction": float(np.mean(mit < post)),
            "median_improvement": float(np.median((post - mit) / post)),
        }
    return {"rows": rows, "summary": summary}


@dataclass
class TrainingRun:
    instance: int
    method: str
    history: TrainingHistory
    initial: MeshParams


def train_methods(
    initial: MeshParams,
    input_state: FockState,
    methods,
    eta: float,
    shots: int,
    target: TargetDistribution,
    bin_map: BinMap,
    metric: str,
    spsa: SpsaConfig,
    mitigation_iters: int = 5,
    mitigation_tol: float = 1e-6,
) -> dict[str, TrainingHistory]:
    """Train every method from the same initial phases and the same SPSA seed."""
    out = {}
    for method in methods:
        pipeline = Pipeline(
            input_state,
            0.0 if method == "lossless" else eta,
            shots,
            method,
            mitigation_iters,
            mitigation_tol,
        )
        loss = LossFunction(pipeline, target, bin_map, metric)
        out[method] = spsa_train(initial, spsa, loss, method=method, monitor=loss.exact())
    return out


def _train_star(args):
    return train_methods(*args)


def train_ensemble(initials, jobs: int = 1, **kwargs) -> list[dict[str, TrainingHistory]]:
    """:func:`train_methods` for each initial parameter set, optionally in worker processes.

    ``kwargs['spsa']`` may be a list with one config per instance.
    """
    spsa = kwargs.pop("spsa")
    configs = spsa if isinstance(spsa, list) else [spsa] * len(initials)
    order = ["input_state", "methods", "eta", "shots", "target", "bin_map", "metric"]
    tasks = []
    for init, cfg in zip(initials, configs):
        args = [init] + [kwargs[k] for k in order] + [cfg]
        args += [kwargs.get("mitigation_iters", 5), kwargs.get("mitigation_tol", 1e-6)]
        tasks.append(tuple(args))
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            return list(pool.map(_train_star, tasks))
    return [_train_star(t) for t in tasks]
