"""Exact linear-optical evolution of Fock states.

Holds the permanent kernels, enumeration of the symmetric Fock basis, and the
ideal (lossless) output distribution of an interferometer fed with a Fock
state. Every pattern space is kept in ascending lexicographic order of its
occupation vectors so that tables, bin maps and files stay aligned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import InputError, ResourceError

#: Largest matrix accepted by :func:`permanent` (Gray-code loop of 2**(n-1) steps).
PERMANENT_MAX_N = 20
#: Largest Fock basis :func:`enumerate_fock` will materialise.
MAX_FOCK_STATES = 2_000_000
#: Tolerance on ``max|U^dag U - I|`` for matrices used as interferometers.
UNITARY_TOL = 1e-8
#: Batched permanents enumerate all sign vectors at once up to this size.
_BATCH_GLYNN_MAX_N = 10
#: Factorials are taken exactly up to this photon number, in log space beyond.
_EXACT_FACTORIAL_MAX_N = 10


def as_generator(rng: np.random.Generator | int | None) -> np.random.Generator:
    """Coerce a seed or generator into a :class:`numpy.random.Generator`."""
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


@dataclass(frozen=True)
class FockState:
    """Photon numbers per optical mode."""

    occupations: tuple[int, ...]

    def __post_init__(self):
        occ = tuple(int(v) for v in self.occupations)
        if len(occ) == 0:
            raise InputError("a Fock state needs at least one mode")
        if any(v < 0 for v in occ):
            raise InputError(f"negative occupation in {occ}")
        object.__setattr__(self, "occupations", occ)

    @property
    def m(self) -> int:
        return len(self.occupations)

    def photon_count(self) -> int:
        return sum(self.occupations)

    def is_collision_free(self) -> bool:
        return all(v <= 1 for v in self.occupations)

    def __iter__(self) -> Iterator[int]:
        return iter(self.occupations)

    def __len__(self) -> int:
        return len(self.occupations)

    def __str__(self) -> str:
        return "|" + ",".join(map(str, self.occupations)) + ">"


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def is_lex_sorted(rows: np.ndarray) -> bool:
    """True when the rows are strictly increasing in lexicographic order."""
    if len(rows) < 2:
        return True
    diff = np.diff(rows.astype(np.int64), axis=0)
    nonzero = diff != 0
    first = nonzero.argmax(axis=1)
    leading = diff[np.arange(len(diff)), first]
    return bool(np.all(nonzero.any(axis=1) & (leading > 0)))


@dataclass(frozen=True, eq=False)
class DistributionTable:
    """Probabilities over a fixed, lexicographically sorted pattern space.

    ``space`` is an ``(S, m)`` integer array whose rows are occupation vectors
    (``kind="fock"``) or binary click vectors (``kind="click"``). ``probs`` is
    aligned with it. Tables built with ``normalized=False`` skip the unit-sum
    check and are never accepted by samplers.
    """

    space: np.ndarray
    probs: np.ndarray
    kind: str = "fock"
    normalized: bool = True
    _index: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        space = np.array(self.space, dtype=np.int64, copy=True)
        probs = np.array(self.probs, dtype=float, copy=True)
        if space.ndim != 2:
            raise InputError("pattern space must be a 2-D array of occupation vectors")
        if probs.shape != (len(space),):
            raise InputError(f"{len(probs)} probabilities for {len(space)} patterns")
        if self.kind not in ("fock", "click"):
            raise InputError(f"unknown table kind {self.kind!r}")
        if np.any(space < 0) or (self.kind == "click" and np.any(space > 1)):
            raise InputError("invalid pattern entries")
        if np.any(probs < 0) or not np.all(np.isfinite(probs)):
            raise InputError("probabilities must be finite and non-negative")
        if self.normalized and abs(probs.sum() - 1.0) > 1e-9:
            raise InputError(f"probabilities sum to {probs.sum():.12g}, not 1")
        if not is_lex_sorted(space):
            raise InputError("pattern space must be sorted and duplicate-free")
        object.__setattr__(self, "space", _readonly(space))
        object.__setattr__(self, "probs", _readonly(probs))

    @property
    def m(self) -> int:
        return self.space.shape[1]

    def __len__(self) -> int:
        return len(self.probs)

    def index(self, pattern: Sequence[int]) -> int:
        """Row of ``pattern`` in the space; ``KeyError`` when absent."""
        if self._index is None:
            object.__setattr__(
                self, "_index", {tuple(row): i for i, row in enumerate(self.space.tolist())}
            )
        return self._index[tuple(int(v) for v in pattern)]

    def prob(self, pattern: Sequence[int]) -> float:
        try:
            return float(self.probs[self.index(pattern)])
        except KeyError:
            return 0.0

    def patterns(self) -> list:
        if self.kind == "fock":
            return [FockState(tuple(row)) for row in self.space.tolist()]
        from .noise import ClickPattern

        return [ClickPattern(tuple(row)) for row in self.space.tolist()]

    def as_dict(self) -> dict[tuple[int, ...], float]:
        return {tuple(row): float(p) for row, p in zip(self.space.tolist(), self.probs)}

    def same_space(self, other: "DistributionTable") -> bool:
        return self.space.shape == other.space.shape and bool(np.all(self.space == other.space))


# ---------------------------------------------------------------------------
# permanents


def permanent(a) -> complex:
    """Permanent of a square matrix by Glynn's formula in Gray-code order.

    Runs in ``O(2**(n-1) * n)``. The empty matrix has permanent 1.

    Raises:
        InputError: ``a`` is not square.
        ResourceError: ``n`` exceeds :data:`PERMANENT_MAX_N`.
    """
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InputError(f"permanent needs a square matrix, got shape {a.shape}")
    n = a.shape[0]
    if n == 0:
        return 1.0 + 0.0j
    if n > PERMANENT_MAX_N:
        raise ResourceError(f"permanent of a {n}x{n} matrix exceeds cap {PERMANENT_MAX_N}")
    if n == 1:
        return complex(a[0, 0])

    # x starts at all +1; only x_0..x_{n-2} are flipped.
    col_sums = a.sum(axis=0)
    total = np.prod(col_sums)
    sign = 1
    gray = 0
    for k in range(1, 1 << (n - 1)):
        j = (k & -k).bit_length() - 1
        gray ^= 1 << j
        if gray >> j & 1:
            col_sums = col_sums - 2 * a[j]
        else:
            col_sums = col_sums + 2 * a[j]
        sign = -sign
        total += sign * np.prod(col_sums)
    return complex(total / (1 << (n - 1)))


@lru_cache(maxsize=None)
def _glynn_signs(n: int) -> tuple[np.ndarray, np.ndarray]:
    k = 1 << (n - 1)
    bits = (np.arange(k)[:, None] >> np.arange(n - 1)[None, :]) & 1
    x = np.ones((k, n))
    x[:, : n - 1] = 1 - 2 * bits
    return _readonly(x), _readonly(np.prod(x, axis=1))


def permanents(batch) -> np.ndarray:
    """Permanents of a stack of square matrices, shape ``(B, n, n)`` -> ``(B,)``."""
    batch = np.asarray(batch, dtype=complex)
    if batch.ndim != 3 or batch.shape[1] != batch.shape[2]:
        raise InputError(f"expected a (B, n, n) stack, got shape {batch.shape}")
    b, n, _ = batch.shape
    if n == 0:
        return np.ones(b, dtype=complex)
    if n > _BATCH_GLYNN_MAX_N:
        return np.array([permanent(mat) for mat in batch], dtype=complex)
    x, sign = _glynn_signs(n)
    out = np.empty(b, dtype=complex)
    # keep the (chunk, 2**(n-1), n) intermediate around a few MB
    chunk = max(1, 2**18 // (len(x) * n))
    for start in range(0, b, chunk):
        sub = batch[start : start + chunk]
        col_sums = np.einsum("ki,bij->bkj", x, sub)
        out[start : start + chunk] = np.prod(col_sums, axis=2) @ sign
    return out / len(x)


# ---------------------------------------------------------------------------
# Fock space


def fock_dimension(m: int, n: int) -> int:
    return math.comb(n + m - 1, n)


def _compositions(m: int, n: int) -> Iterator[tuple[int, ...]]:
    if m == 1:
        yield (n,)
        return
    for first in range(n + 1):
        for rest in _compositions(m - 1, n - first):
            yield (first,) + rest


@lru_cache(maxsize=64)
def fock_space(m: int, n: int) -> np.ndarray:
    """All ``n``-photon occupation vectors over ``m`` modes as a read-only array."""
    if m < 1 or n < 0:
        raise InputError(f"need m >= 1 and n >= 0, got m={m}, n={n}")
    size = fock_dimension(m, n)
    if size > MAX_FOCK_STATES:
        raise ResourceError(f"Fock space C({n + m - 1},{n}) = {size} exceeds cap {MAX_FOCK_STATES}")
    return _readonly(np.array(list(_compositions(m, n)), dtype=np.int64).reshape(size, m))


def enumerate_fock(m: int, n: int) -> list[FockState]:
    """Every way to place ``n`` photons in ``m`` modes, in ascending lexicographic order."""
    return [FockState(tuple(row)) for row in fock_space(m, n).tolist()]


@lru_cache(maxsize=64)
def _mode_lists(m: int, n: int) -> np.ndarray:
    """Row ``s`` lists the mode of each photon of state ``s`` (with multiplicity)."""
    space = fock_space(m, n)
    modes = np.arange(m)
    return _readonly(np.array([np.repeat(modes, occ) for occ in space], dtype=np.int64).reshape(len(space), n))


def _log_factorial_norm(occupations: np.ndarray) -> np.ndarray:
    """``log(prod_i n_i!)`` for each row of ``occupations``."""
    from scipy.special import gammaln

    return gammaln(np.asarray(occupations, dtype=float) + 1).sum(axis=-1)


def _factorial_norm(occupations: np.ndarray, n: int) -> np.ndarray:
    occupations = np.atleast_2d(occupations)
    if n <= _EXACT_FACTORIAL_MAX_N:
        fact = np.array([math.factorial(k) for k in range(n + 1)], dtype=np.int64)
        return np.prod(fact[occupations], axis=1).astype(float)
    return np.exp(_log_factorial_norm(occupations))


def check_unitary(u, tol: float = UNITARY_TOL) -> np.ndarray:
    """Return ``u`` as a complex array, raising when it is not unitary within ``tol``."""
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise InputError(f"interferometer must be square, got shape {u.shape}")
    residual = np.max(np.abs(u.conj().T @ u - np.eye(len(u)))) if len(u) else 0.0
    if residual >= tol:
        raise InputError(f"matrix is not unitary (max |U^dag U - I| = {residual:.3g})")
    return u


def _as_occupations(state, m: int | None = None) -> np.ndarray:
    occ = np.asarray(state.occupations if isinstance(state, FockState) else state, dtype=np.int64)
    if occ.ndim != 1 or np.any(occ < 0):
        raise InputError(f"invalid occupation vector {occ}")
    if m is not None and len(occ) != m:
        raise InputError(f"state has {len(occ)} modes, interferometer has {m}")
    return occ


def output_probability(u, input_state, output_state) -> float:
    """Probability that ``input_state`` exits ``u`` as ``output_state``.

    Equal to ``|Per(U_sub)|**2 / (prod n_out! prod n_in!)`` where ``U_sub``
    repeats row ``j`` of ``u`` ``n_out[j]`` times and column ``i``
    ``n_in[i]`` times.
    """
    u = check_unitary(u)
    m = len(u)
    occ_in = _as_occupations(input_state, m)
    occ_out = _as_occupations(output_state, m)
    n = int(occ_in.sum())
    if n != int(occ_out.sum()):
        raise InputError(f"photon number mismatch: {n} in, {int(occ_out.sum())} out")
    rows = np.repeat(np.arange(m), occ_out)
    cols = np.repeat(np.arange(m), occ_in)
    amp = permanent(u[np.ix_(rows, cols)])
    norm = _factorial_norm(occ_out[None, :], n)[0] * _factorial_norm(occ_in[None, :], n)[0]
    return float(abs(amp) ** 2 / norm)


def ideal_distribution(u, input_state) -> DistributionTable:
    """Lossless output distribution of ``input_state`` through ``u`` over the full Fock basis."""
    u = check_unitary(u)
    m = len(u)
    occ_in = _as_occupations(input_state, m)
    n = int(occ_in.sum())
    space = fock_space(m, n)
    rows = _mode_lists(m, n)
    cols = np.repeat(np.arange(m), occ_in)
    subs = u[rows[:, :, None], cols[None, None, :]]
    amps = permanents(subs)
    norm = _factorial_norm(space, n) * _factorial_norm(occ_in[None, :], n)[0]
    probs = np.abs(amps) ** 2 / norm
    # rounding only; the table must sum to one
    probs = probs / probs.sum()
    return DistributionTable(space, probs, kind="fock")


def sample_categorical(
    dist: DistributionTable,
    count: int,
    rng: np.random.Generator | int | None = None,
    chunks: int = 1,
) -> np.ndarray:
    """Counts of ``count`` i.i.d. draws from ``dist``, aligned with ``dist.space``.

    With ``chunks > 1`` the generator is split into independent child streams,
    one per chunk, so results depend only on the seed and the chunk count.
    """
    if not dist.normalized:
        raise InputError("cannot sample from an unnormalized table")
    if count < 0 or chunks < 1:
        raise InputError("count must be >= 0 and chunks >= 1")
    rng = as_generator(rng)
    p = dist.probs / dist.probs.sum()
    if chunks == 1:
        return rng.multinomial(count, p).astype(np.int64)
    sizes = [count // chunks + (i < count % chunks) for i in range(chunks)]
    out = np.zeros(len(p), dtype=np.int64)
    for child, size in zip(rng.spawn(chunks), sizes):
        out += child.multinomial(size, p)
    return out


def counts_to_table(space: np.ndarray, counts: Iterable[int], kind: str = "fock") -> DistributionTable:
    counts = np.asarray(list(counts), dtype=float)
    total = counts.sum()
    if total <= 0:
        raise InputError("no counts to normalise")
    return DistributionTable(space, counts / total, kind=kind)
