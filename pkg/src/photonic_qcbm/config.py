"""Run configuration: a single strict JSON document with a default for every field."""

from __future__ import annotations

import json
import math
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .errors import ConfigError, InputError
from .fock import FockState

MODES = ("simulate", "train", "mitigate-bench", "permanent-bench")


def default_input_state(m: int, n: int) -> FockState:
    """Photons in modes 0, 2, 4, ...; needs ``2n <= m + 1``."""
    if n < 0 or m < 1:
        raise InputError(f"invalid shape m={m}, n={n}")
    if 2 * n > m + 1:
        raise InputError(
            f"cannot alternate {n} photons over {m} modes; give circuit.input_occupations explicitly"
        )
    occ = [0] * m
    for i in range(n):
        occ[2 * i] = 1
    return FockState(tuple(occ))


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", strict=True, frozen=True)


class CircuitConfig(_Section):
    m: int = Field(8, ge=2)
    n: int = Field(3, ge=1)
    k: int = Field(1, ge=1)
    input_occupations: Optional[list[int]] = None
    single_phase_mode: bool = False
    tied_blocks: bool = False
    init: Literal["random", "zeros"] = "random"
    phases: Optional[list[float]] = None


class NoiseConfig(_Section):
    eta: float = Field(0.0, ge=0.0, le=1.0)


class SamplingConfig(_Section):
    shots_per_evaluation: int = Field(50_000, ge=1)
    chunks: int = Field(1, ge=1)


class MitigationConfig(_Section):
    max_iters: int = Field(5, ge=1)
    tol: float = Field(1e-6, gt=0.0)


class TargetConfig(_Section):
    kind: Literal["gaussian_mixture", "csv"] = "gaussian_mixture"
    bins: int = Field(30, ge=1)
    mu1: float = -2.0
    mu2: float = 2.0
    sigma1: float = Field(0.5, gt=0.0)
    sigma2: float = Field(0.5, gt=0.0)
    weight: float = Field(0.5, ge=0.0, le=1.0)
    x_min: float = -4.0
    x_max: float = 4.0
    path: Optional[str] = None
    clip_quantiles: tuple[float, float] = (0.005, 0.995)


class SpsaSection(_Section):
    a: Optional[float] = Field(None, ge=0.0)
    c: float = Field(0.1, gt=0.0)
    alpha: float = Field(0.602, gt=0.0, le=1.0)
    gamma: float = Field(0.101, gt=0.0, le=1.0)
    big_a: Optional[float] = Field(None, ge=0.0)
    max_iters: int = Field(300, ge=0)
    record_every: int = Field(10, ge=1)
    first_step: float = Field(0.1, gt=0.0)


class TrainSection(_Section):
    methods: list[Literal["lossless", "postselect", "recycled_raw", "recycled_mitigated"]] = [
        "lossless",
        "postselect",
        "recycled_mitigated",
    ]
    instances: int = Field(1, ge=1)
    jobs: int = Field(1, ge=1)


class BenchSection(_Section):
    seeds: int = Field(20, ge=1)
    etas: list[float] = [0.5, 0.7]
    shots: int = Field(100_000, ge=1)
    jobs: int = Field(1, ge=1)


class PermanentSection(_Section):
    matrix_path: Optional[str] = None
    size: int = Field(3, ge=1)
    matrix_seed: int = 0
    epsilon: float = Field(0.1, gt=0.0, lt=1.0)
    delta: float = Field(0.05, gt=0.0, lt=1.0)
    budgets: list[int] = [100, 1_000, 10_000, 100_000]
    repeats: int = Field(20, ge=1)
    csv: Optional[str] = None


class OutputSection(_Section):
    dir: str = "runs"


class RunConfig(_Section):
    mode: Literal["simulate", "train", "mitigate-bench", "permanent-bench"] = "train"
    circuit: CircuitConfig = CircuitConfig()
    noise: NoiseConfig = NoiseConfig()
    sampling: SamplingConfig = SamplingConfig()
    estimator: Literal["lossless", "postselect", "recycled_raw", "recycled_mitigated"] = "recycled_mitigated"
    mitigation: MitigationConfig = MitigationConfig()
    target: TargetConfig = TargetConfig()
    metric: Literal["auto", "kl", "tvd"] = "auto"
    spsa: SpsaSection = SpsaSection()
    train: TrainSection = TrainSection()
    bench: BenchSection = BenchSection()
    permanent: PermanentSection = PermanentSection()
    seed: int = Field(0, ge=0)
    output: OutputSection = OutputSection()

    def input_state(self) -> FockState:
        c = self.circuit
        if c.input_occupations is not None:
            return FockState(tuple(c.input_occupations))
        return default_input_state(c.m, c.n)

    def resolved(self) -> dict:
        """Plain dict with every default filled in."""
        doc = self.model_dump(mode="json")
        if doc["circuit"]["input_occupations"] is None:
            try:
                doc["circuit"]["input_occupations"] = list(self.input_state().occupations)
            except InputError:
                pass
        return doc


def _invariant_problems(cfg: RunConfig) -> list[tuple[str, str]]:
    problems = []
    c = cfg.circuit
    if c.input_occupations is not None:
        occ = c.input_occupations
        if len(occ) != c.m:
            problems.append(("circuit.input_occupations", f"has {len(occ)} entries, expected m={c.m}"))
        if any(v < 0 for v in occ):
            problems.append(("circuit.input_occupations", "occupations must be non-negative"))
        elif sum(occ) != c.n:
            problems.append(("circuit.input_occupations", f"photon sum {sum(occ)} differs from n={c.n}"))
    elif 2 * c.n > c.m + 1:
        problems.append(
            ("circuit.input_occupations", f"no alternating default for n={c.n}, m={c.m}; give it explicitly")
        )
    if c.n > c.m:
        problems.append(("circuit.n", f"n={c.n} exceeds m={c.m}; no {c.n}-click patterns exist"))
    if c.phases is not None and len(c.phases) != c.k * c.m * (c.m - 1):
        problems.append(("circuit.phases", f"expected {c.k * c.m * (c.m - 1)} phases, got {len(c.phases)}"))
    t = cfg.target
    if t.kind == "csv" and not t.path:
        problems.append(("target.path", "required when target.kind is 'csv'"))
    if t.kind == "gaussian_mixture" and not t.x_min < t.x_max:
        problems.append(("target.x_max", "must exceed target.x_min"))
    lo, hi = t.clip_quantiles
    if not 0.0 <= lo < hi <= 1.0:
        problems.append(("target.clip_quantiles", "need 0 <= lo < hi <= 1"))
    if cfg.mode == "train" and c.n <= c.m and t.bins > math.comb(c.m, c.n):
        problems.append(("target.bins", f"{t.bins} bins exceed the {math.comb(c.m, c.n)} {c.n}-click patterns"))
    for i, eta in enumerate(cfg.bench.etas):
        if not 0.0 <= eta <= 1.0:
            problems.append((f"bench.etas.{i}", "must lie in [0, 1]"))
    for i, b in enumerate(cfg.permanent.budgets):
        if b < 1:
            problems.append((f"permanent.budgets.{i}", "must be >= 1"))
    return problems


def parse_config(text: str | bytes) -> RunConfig:
    """Validate a JSON document into a :class:`RunConfig`.

    Raises:
        ConfigError: listing every unknown key, type mismatch and invariant
            violation with its dotted path.
    """
    try:
        json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([("$", f"invalid JSON: {exc}")]) from None
    try:
        cfg = RunConfig.model_validate_json(text)
    except ValidationError as exc:
        problems = [(".".join(str(p) for p in err["loc"]) or "$", err["msg"]) for err in exc.errors()]
        raise ConfigError(problems) from None
    problems = _invariant_problems(cfg)
    if problems:
        raise ConfigError(problems)
    return cfg


def load_config(path) -> RunConfig:
    with open(path) as fh:
        return parse_config(fh.read())
