"""Command line entry point.

    photonic-qcbm <mode> [--config PATH] [--seed N] [--out DIR]

``mode`` is one of simulate, train, mitigate-bench, permanent-bench. The
permanent benchmark also takes flags for the matrix source, precision and
budget grid. Set ``PHOTONIC_QCBM_LOG`` (e.g. ``DEBUG``) for log verbosity.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import MODES, RunConfig, parse_config
from .errors import QCBMError
from .experiments import mitigation_benchmark, seed_stream, train_ensemble
from .fock import ideal_distribution
from .io import write_counts, write_curve, write_estimator, write_history, write_json
from .mesh import MeshParams, compose
from .mitigation import estimate, ideal_reference
from .noise import LossModel, lossy_sample
from .permbench import gurvits_estimate, random_matrix, sampler_estimate, squared_estimate, theorem_comparison
from .training import (
    SpsaConfig,
    build_bin_map,
    choose_metric,
    csv_returns_target,
    gaussian_mixture_target,
    model_estimate,
    Pipeline,
)

log = logging.getLogger("photonic_qcbm")


def _versions() -> dict:
    import scipy

    return {"photonic_qcbm": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def _initial_params(cfg: RunConfig, instance: int) -> MeshParams:
    c = cfg.circuit
    flags = {"single_phase_mode": c.single_phase_mode, "tied_blocks": c.tied_blocks}
    if c.phases is not None:
        return MeshParams(c.m, c.k, np.asarray(c.phases), **flags)
    if c.init == "zeros":
        return MeshParams.zeros(c.m, c.k, **flags)
    return MeshParams.random(c.m, c.k, rng=seed_stream(cfg.seed, 100, instance), **flags)


def _target(cfg: RunConfig):
    t = cfg.target
    if t.kind == "csv":
        return csv_returns_target(t.path, t.bins, tuple(t.clip_quantiles))
    return gaussian_mixture_target(t.mu1, t.mu2, t.sigma1, t.sigma2, t.weight, t.x_min, t.x_max, t.bins)


def _run_simulate(cfg: RunConfig, out: Path) -> dict:
    params = _initial_params(cfg, 0)
    state = cfg.input_state()
    ideal = ideal_distribution(compose(params), state)
    counts = lossy_sample(
        ideal, LossModel(cfg.noise.eta), cfg.sampling.shots_per_evaluation,
        seed_stream(cfg.seed, 1), chunks=cfg.sampling.chunks,
    )
    counts = dataclasses.replace(counts, seed=cfg.seed)
    write_counts(out / "counts.csv", counts)
    n = state.photon_count()
    written, skipped = [], {}
    estimators = {"lossless": ideal_reference(ideal)}
    for method in ("postselect", "recycled_raw", "recycled_mitigated"):
        try:
            estimators[method] = estimate(
                counts, n, method,
                **({"max_iters": cfg.mitigation.max_iters, "tol": cfg.mitigation.tol}
                   if method == "recycled_mitigated" else {}),
            )
        except QCBMError as exc:
            skipped[method] = str(exc)
    for method, est in estimators.items():
        write_estimator(out / "estimators" / f"{method}.csv", est)
        written.append(method)
    return {
        "stratum_totals": counts.stratum_totals().tolist(),
        "photon_numbers": counts.photon_numbers.tolist(),
        "estimators_written": written,
        "estimators_skipped": skipped,
        "phases": params.to_json(),
    }


def _run_train(cfg: RunConfig, out: Path) -> dict:
    target = _target(cfg)
    metric = choose_metric(target) if cfg.metric == "auto" else cfg.metric
    state = cfg.input_state()
    n = state.photon_count()
    bin_map = build_bin_map(cfg.circuit.m, n, target.bin_count)
    instances = cfg.train.instances
    initials = [_initial_params(cfg, i) for i in range(instances)]
    s = cfg.spsa
    spsa = [
        SpsaConfig(s.a, s.c, s.alpha, s.gamma, s.big_a, s.max_iters,
                   int(np.random.SeedSequence([cfg.seed, 200, i]).generate_state(1)[0]), s.record_every,
                   s.first_step)
        for i in range(instances)
    ]
    results = train_ensemble(
        initials, jobs=cfg.train.jobs, input_state=state, methods=list(cfg.train.methods),
        eta=cfg.noise.eta, shots=cfg.sampling.shots_per_evaluation, target=target, bin_map=bin_map,
        metric=metric, spsa=spsa, mitigation_iters=cfg.mitigation.max_iters, mitigation_tol=cfg.mitigation.tol,
    )
    finals: dict[str, list] = {}
    for i, histories in enumerate(results):
        suffix = "" if instances == 1 else f".{i}"
        for method, history in histories.items():
            write_history(out / f"history.{method}{suffix}.jsonl", history)
            write_curve(out / f"curve.{method}{suffix}.csv", history)
            final = history.final_params(initials[i])
            pipeline = Pipeline(state, 0.0 if method == "lossless" else cfg.noise.eta,
                                cfg.sampling.shots_per_evaluation, method,
                                cfg.mitigation.max_iters, cfg.mitigation.tol)
            est = model_estimate(final, pipeline, seed_stream(cfg.seed, 300, i))
            write_estimator(out / "estimators" / f"{method}{suffix}.csv", est)
            finals.setdefault(method, []).append({
                "instance": i,
                "final_loss": history.final.loss_value,
                "final_exact_loss": history.final.exact_loss,
                "initial_exact_loss": history.records[0].exact_loss,
                "shots_spent": history.final.shots_spent,
                "status": history.status,
                "spsa_seed": spsa[i].seed,
            })
    return {"metric": metric, "target": target.provenance, "final": finals}


def _run_bench(cfg: RunConfig, out: Path) -> dict:
    b = cfg.bench
    result = mitigation_benchmark(
        cfg.circuit.m, cfg.circuit.n, b.etas, b.shots, b.seeds, jobs=b.jobs,
        input_state=cfg.input_state(), max_iters=cfg.mitigation.max_iters, tol=cfg.mitigation.tol,
    )
    rows = result["rows"]
    fields = list(rows[0])
    lines = [",".join(fields)] + [",".join(repr(r[f]) if isinstance(r[f], float) else str(r[f]) for f in fields)
                                  for r in rows]
    (out / "bench.csv").write_text("\n".join(lines) + "\n")
    return {"bench": result["summary"]}


def _load_matrix(path: str) -> np.ndarray:
    p = Path(path)
    if p.suffix == ".npy":
        return np.load(p)
    return np.loadtxt(p, dtype=complex, delimiter=",", ndmin=2)


def _run_permanent(cfg: RunConfig, out: Path) -> dict:
    p = cfg.permanent
    a = _load_matrix(p.matrix_path) if p.matrix_path else random_matrix(p.size, seed_stream(p.matrix_seed, 400))
    rng = seed_stream(cfg.seed, 500)
    report = theorem_comparison(a, p.budgets, rng, repeats=p.repeats, epsilon=p.epsilon, delta=p.delta)
    csv_path = Path(p.csv) if p.csv else out / "permanent_bench.csv"
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    report.write_csv(csv_path)
    g = gurvits_estimate(a, p.epsilon, p.delta, rng)
    sq = squared_estimate(a, p.epsilon, p.delta, rng)
    shots = max(p.budgets)
    sm = sampler_estimate(a, shots, rng, p.delta)
    return {
        "n": int(a.shape[0]),
        "exact_abs_permanent_squared": report.exact_squared,
        "embedded_probability": report.embedded_probability,
        "gurvits": {"value": g.value, "samples": g.samples_used, "bound": g.bound},
        "squared": {"value": sq.value, "samples": sq.samples_used, "bound": sq.bound},
        "sampler": {"value": sm.value, "shots": sm.samples_used, "bound": sm.bound, "epsilon": sm.epsilon},
        "slopes": {"squared": report.slope("squared"), "sampler": report.slope("sampler")},
        "decay": report.decay,
        "caveat": report.caveat,
        "csv": str(csv_path),
    }


_RUNNERS = {
    "simulate": _run_simulate,
    "train": _run_train,
    "mitigate-bench": _run_bench,
    "permanent-bench": _run_permanent,
}


def run(cfg: RunConfig, out: str | Path | None = None) -> int:
    """Execute ``cfg`` and write its artifacts; returns a process exit status."""
    out = Path(out if out is not None else cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    started = time.time()
    log.info("running %s into %s", cfg.mode, out)
    try:
        details = _RUNNERS[cfg.mode](cfg, out)
        status = 0
    except QCBMError as exc:
        log.error("%s failed in %s: %s", cfg.mode, type(exc).__module__, exc)
        details = {"error": str(exc), "error_type": type(exc).__name__}
        status = 1
    summary = {
        "mode": cfg.mode,
        "seed": cfg.seed,
        "config": cfg.resolved(),
        "versions": _versions(),
        "timing": {"started": started, "seconds": time.time() - started},
        "status": status,
        **details,
    }
    write_json(out / "summary.json", summary)
    return status


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="photonic-qcbm", description=__doc__.splitlines()[0])
    ap.add_argument("mode", choices=MODES)
    ap.add_argument("--config", help="JSON run configuration")
    ap.add_argument("--seed", type=int, help="override the configured seed")
    ap.add_argument("--out", help="output directory")
    bench = ap.add_argument_group("permanent-bench")
    bench.add_argument("--matrix", help=".npy or comma-separated complex text file")
    bench.add_argument("--size", type=int, help="size of a random matrix")
    bench.add_argument("--matrix-seed", type=int)
    bench.add_argument("--epsilon", type=float)
    bench.add_argument("--delta", type=float)
    bench.add_argument("--budgets", help="comma-separated budget grid")
    bench.add_argument("--csv", help="output CSV path")
    return ap


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("PHOTONIC_QCBM_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    args = _parser().parse_args(argv)
    try:
        doc = json.loads(Path(args.config).read_text()) if args.config else {}
        doc["mode"] = args.mode
        if args.seed is not None:
            doc["seed"] = args.seed
        perm = doc.setdefault("permanent", {}) if args.mode == "permanent-bench" else {}
        for flag, key in (("matrix", "matrix_path"), ("size", "size"), ("matrix_seed", "matrix_seed"),
                          ("epsilon", "epsilon"), ("delta", "delta"), ("csv", "csv")):
            if getattr(args, flag) is not None:
                perm[key] = getattr(args, flag)
        if args.budgets:
            perm["budgets"] = [int(v) for v in args.budgets.split(",")]
        if args.mode == "permanent-bench" and not perm:
            doc.pop("permanent")
        cfg = parse_config(json.dumps(doc))
    except (QCBMError, OSError, json.JSONDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return run(cfg, args.out)


if __name__ == "__main__":
    sys.exit(main())
