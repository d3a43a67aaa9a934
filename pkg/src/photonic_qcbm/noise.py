"""Uniform photon loss and threshold detection.

Loss is applied at the output: every photon of an ideal outcome survives
independently with probability ``1 - eta`` and each detector then reports
click / no click. Uniform loss commutes with a linear interferometer, so this
is equivalent to loss spread through the circuit.

Click patterns are also handled as integer codes with mode 0 as the most
significant bit, which makes ascending codes coincide with ascending
lexicographic order of the binary vectors.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterator, Mapping

import numpy as np

from .errors import InputError, ResourceError
from .fock import DistributionTable, FockState, as_generator, fock_space, is_lex_sorted

#: Size gate of :func:`exact_lossy_distribution`.
EXACT_LOSSY_MAX_M = 10
EXACT_LOSSY_MAX_N = 4
#: Shots simulated per vectorised batch inside :func:`lossy_sample`.
_SHOT_BATCH = 250_000


@dataclass(frozen=True)
class ClickPattern:
    """Binary threshold-detector outcome, one entry per mode."""

    clicks: tuple[int, ...]

    def __post_init__(self):
        clicks = tuple(int(v) for v in self.clicks)
        if any(v not in (0, 1) for v in clicks):
            raise InputError(f"click pattern entries must be 0 or 1, got {clicks}")
        object.__setattr__(self, "clicks", clicks)

    @classmethod
    def from_bitstring(cls, bits: str) -> "ClickPattern":
        return cls(tuple(int(c) for c in bits.strip()))

    @property
    def m(self) -> int:
        return len(self.clicks)

    def click_count(self) -> int:
        return sum(self.clicks)

    def code(self) -> int:
        return int(encode(np.asarray(self.clicks)[None, :])[0])

    def __iter__(self) -> Iterator[int]:
        return iter(self.clicks)

    def __len__(self) -> int:
        return len(self.clicks)

    def __str__(self) -> str:
        return "".join(map(str, self.clicks))


@dataclass(frozen=True)
class LossModel:
    """Per-photon loss probability ``eta``."""

    eta: float

    def __post_init__(self):
        if not 0.0 <= float(self.eta) <= 1.0:
            raise InputError(f"eta must lie in [0, 1], got {self.eta}")
        object.__setattr__(self, "eta", float(self.eta))

    @property
    def transmission(self) -> float:
        return 1.0 - self.eta


# ---------------------------------------------------------------------------
# pattern codes


def _weights(m: int) -> np.ndarray:
    return 1 << np.arange(m - 1, -1, -1, dtype=np.int64)


def encode(clicks: np.ndarray) -> np.ndarray:
    """Integer codes of binary rows (mode 0 is the most significant bit)."""
    clicks = np.asarray(clicks, dtype=np.int64)
    return clicks @ _weights(clicks.shape[1])


def decode(codes, m: int) -> np.ndarray:
    codes = np.asarray(codes, dtype=np.int64)
    return ((codes[:, None] >> np.arange(m - 1, -1, -1)) & 1).astype(np.int64)


@lru_cache(maxsize=64)
def click_space(m: int, k: int | None = None) -> np.ndarray:
    """Click patterns over ``m`` modes in lexicographic order.

    All ``2**m`` patterns when ``k`` is None, otherwise the ``C(m, k)``
    patterns with exactly ``k`` clicks.
    """
    if m < 1 or m > 30:
        raise InputError(f"unsupported mode count {m}")
    if k is None:
        rows = decode(np.arange(1 << m), m)
    else:
        if not 0 <= k <= m:
            raise InputError(f"click count {k} outside [0, {m}]")
        rows = np.zeros((math.comb(m, k), m), dtype=np.int64)
        for r, idx in enumerate(itertools.combinations(range(m), k)):
            rows[r, list(idx)] = 1
        rows = rows[np.argsort(encode(rows))]
    rows.setflags(write=False)
    return rows


@lru_cache(maxsize=64)
def click_codes(m: int, k: int) -> np.ndarray:
    codes = encode(click_space(m, k))
    codes.setflags(write=False)
    return codes


def threshold_map(state) -> ClickPattern:
    """Click pattern registered by threshold detectors for a Fock state."""
    occ = state.occupations if isinstance(state, FockState) else tuple(state)
    return ClickPattern(tuple(min(int(v), 1) for v in occ))


# ---------------------------------------------------------------------------
# counts


@dataclass(frozen=True, eq=False)
class LossyCounts:
    """Empirical click-pattern tallies of a lossy experiment.

    ``codes`` holds the distinct observed pattern codes in ascending order and
    ``counts`` their tallies. Zero-click shots are kept under code 0 so that
    the counts always add up to ``total_shots``. ``photon_numbers``, when
    present, tallies the surviving photon number of every shot before
    threshold detection.
    """

    m: int
    total_shots: int
    codes: np.ndarray
    counts: np.ndarray
    eta: float | None = None
    seed: int | None = None
    photon_numbers: np.ndarray | None = None
    _clicks: np.ndarray = field(default=None, init=False, repr=False)

    def __post_init__(self):
        codes = np.asarray(self.codes, dtype=np.int64).ravel()
        counts = np.asarray(self.counts, dtype=np.int64).ravel()
        if codes.shape != counts.shape:
            raise InputError("codes and counts differ in length")
        if np.any(counts < 0):
            raise InputError("negative count")
        if np.any(np.diff(codes) <= 0):
            raise InputError("codes must be strictly increasing")
        if len(codes) and (codes[0] < 0 or codes[-1] >= (1 << self.m)):
            raise InputError("pattern code out of range")
        if counts.sum() > self.total_shots:
            raise InputError("counts exceed the number of shots")
        for a in (codes, counts):
            a.setflags(write=False)
        if self.photon_numbers is not None:
            pn = np.array(self.photon_numbers, dtype=np.int64)
            pn.setflags(write=False)
            object.__setattr__(self, "photon_numbers", pn)
        object.__setattr__(self, "codes", codes)
        object.__setattr__(self, "counts", counts)
        clicks = decode(codes, self.m).sum(axis=1) if len(codes) else np.zeros(0, dtype=np.int64)
        object.__setattr__(self, "_clicks", clicks)

    @classmethod
    def from_mapping(cls, m: int, counts: Mapping, total_shots: int | None = None, **meta) -> "LossyCounts":
        """Build from ``{pattern: count}`` with patterns as ClickPattern, tuples or bitstrings."""
        merged: dict[int, int] = {}
        for key, value in counts.items():
            if isinstance(key, str):
                key = ClickPattern.from_bitstring(key)
            pattern = key if isinstance(key, ClickPattern) else ClickPattern(tuple(key))
            if pattern.m != m:
                raise InputError(f"pattern {pattern} does not have {m} modes")
            merged[pattern.code()] = merged.get(pattern.code(), 0) + int(value)
        codes = np.array(sorted(merged), dtype=np.int64)
        values = np.array([merged[c] for c in codes], dtype=np.int64)
        total = int(values.sum()) if total_shots is None else int(total_shots)
        return cls(m, total, codes, values, **meta)

    def click_counts(self) -> np.ndarray:
        """Number of clicks of each entry of ``codes``."""
        return self._clicks

    def as_dict(self) -> dict[ClickPattern, int]:
        rows = decode(self.codes, self.m)
        return {ClickPattern(tuple(r)): int(c) for r, c in zip(rows.tolist(), self.counts)}

    def stratum_total(self, k: int) -> int:
        return int(self.counts[self._clicks == k].sum())

    def stratum_totals(self) -> np.ndarray:
        """Shot totals indexed by click count ``0..m``."""
        return np.bincount(self._clicks, weights=self.counts, minlength=self.m + 1).astype(np.int64)

    def stratum_vector(self, k: int) -> np.ndarray:
        """Counts of every ``k``-click pattern, aligned with ``click_space(m, k)``."""
        space = click_codes(self.m, k)
        out = np.zeros(len(space), dtype=np.int64)
        sel = self._clicks == k
        out[np.searchsorted(space, self.codes[sel])] = self.counts[sel]
        return out


def stratify(counts: LossyCounts, k: int) -> tuple[LossyCounts, int]:
    """Restrict ``counts`` to patterns with exactly ``k`` clicks."""
    if not 0 <= k <= counts.m:
        raise InputError(f"click multiplicity {k} outside [0, {counts.m}]")
    sel = counts.click_counts() == k
    total = int(counts.counts[sel].sum())
    sub = LossyCounts(counts.m, total, counts.codes[sel], counts.counts[sel], counts.eta, counts.seed)
    return sub, total


# ---------------------------------------------------------------------------
# sampling and the exact oracle


def _require_fock_table(ideal: DistributionTable) -> None:
    if ideal.kind != "fock":
        raise InputError("expected a distribution over Fock states")
    if not ideal.normalized:
        raise InputError("ideal distribution must be normalized")


def lossy_sample(
    ideal: DistributionTable,
    loss: LossModel,
    shots: int,
    rng: np.random.Generator | int | None = None,
    chunks: int = 1,
) -> LossyCounts:
    """Simulate ``shots`` lossy threshold-detected runs.

    Each shot draws an ideal outcome, lets every photon survive with
    probability ``1 - eta`` and records the clicks of the survivors; the
    surviving photon numbers are tallied in ``photon_numbers``. With
    ``chunks > 1`` the generator is split into per-chunk child streams.
    """
    _require_fock_table(ideal)
    if shots < 0:
        raise InputError("shots must be non-negative")
    seed = rng if isinstance(rng, (int, np.integer)) else None
    gen = as_generator(rng)
    m = ideal.m
    p = ideal.probs / ideal.probs.sum()
    tally = np.zeros(1 << m, dtype=np.int64) if m <= 20 else None
    found: dict[int, int] = {}

    streams = [gen] if chunks == 1 else gen.spawn(chunks)
    sizes = [shots // chunks + (i < shots % chunks) for i in range(chunks)]
    weights = _weights(m)
    n = int(ideal.space[0].sum())
    survivors = np.zeros(n + 1, dtype=np.int64)
    for stream, size in zip(streams, sizes):
        done = 0
        while done < size:
            batch = min(_SHOT_BATCH, size - done)
            done += batch
            drawn = stream.multinomial(batch, p)
            occ = np.repeat(ideal.space, drawn, axis=0)
            if loss.eta > 0.0:
                occ = stream.binomial(occ, loss.transmission)
            survivors += np.bincount(occ.sum(axis=1), minlength=n + 1)
            codes = (occ > 0).astype(np.int64) @ weights
            if tally is not None:
                tally += np.bincount(codes, minlength=1 << m)
            else:
                for c, k in zip(*np.unique(codes, return_counts=True)):
                    found[int(c)] = found.get(int(c), 0) + int(k)
    if tally is not None:
        codes = np.flatnonzero(tally)
        values = tally[codes]
    else:
        codes = np.array(sorted(found), dtype=np.int64)
        values = np.array([found[c] for c in codes], dtype=np.int64)
    return LossyCounts(
        m, shots, codes, values, eta=loss.eta, seed=None if seed is None else int(seed), photon_numbers=survivors
    )


def _survivor_terms(occ: tuple[int, ...], transmission: float, eta: float):
    """Every survivor vector ``v <= occ`` with its binomial weight."""
    per_mode = []
    for u in occ:
        per_mode.append(
            [(v, math.comb(u, v) * transmission**v * eta ** (u - v)) for v in range(u + 1)]
        )
    for combo in itertools.product(*per_mode):
        v = tuple(c[0] for c in combo)
        w = 1.0
        for c in combo:
            w *= c[1]
        yield v, w


def exact_lossy_distribution(
    ideal: DistributionTable, loss: LossModel, threshold: bool = True
) -> DistributionTable:
    """Exact output distribution under uniform loss.

    With ``threshold=True`` the table covers all ``2**m`` click patterns.
    With ``threshold=False`` it is the photon-number-resolved mixture before
    detection, over Fock states of every photon number ``0..n``.

    Raises:
        ResourceError: ``m > 10`` or ``n > 4``.
    """
    _require_fock_table(ideal)
    m = ideal.m
    n = int(ideal.space[0].sum())
    if m > EXACT_LOSSY_MAX_M or n > EXACT_LOSSY_MAX_N:
        raise ResourceError(
            f"exact lossy oracle limited to m <= {EXACT_LOSSY_MAX_M}, n <= {EXACT_LOSSY_MAX_N}"
        )
    acc: dict[tuple[int, ...], float] = {}
    for occ, p in zip(ideal.space.tolist(), ideal.probs):
        if p == 0.0:
            continue
        for v, w in _survivor_terms(tuple(occ), loss.transmission, loss.eta):
            key = tuple(min(x, 1) for x in v) if threshold else v
            acc[key] = acc.get(key, 0.0) + p * w

    if threshold:
        space = click_space(m)
        probs = np.zeros(len(space))
        for key, val in acc.items():
            probs[int(encode(np.array([key]))[0])] = val
        return DistributionTable(space, probs, kind="click")

    space = np.concatenate([fock_space(m, k) for k in range(n + 1)])
    order = np.lexsort(space.T[::-1])
    space = space[order]
    assert is_lex_sorted(space)
    index = {tuple(row): i for i, row in enumerate(space.tolist())}
    probs = np.zeros(len(space))
    for key, val in acc.items():
        probs[index[key]] = val
    return DistributionTable(space, probs, kind="fock")
