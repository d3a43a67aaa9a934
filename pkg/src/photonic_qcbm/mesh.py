"""Rectangular Mach-Zehnder mesh used as the Born-machine ansatz.

A block is a universal rectangular interferometer of ``m(m-1)/2``
Mach-Zehnder elements, each carrying an external phase ``theta`` and an
internal phase ``theta_prime``. Blocks may be repeated ``k`` times.

Composition order is fixed: elements are applied in layout order (column by
column, top to bottom inside a column), so a block is
``T_L ... T_2 T_1`` with ``T_1`` the first element of :func:`clements_layout`.
Repeated blocks compose the same way, ``U = B_k ... B_1``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import InputError

TWO_PI = 2 * np.pi


@dataclass(frozen=True)
class MzElement:
    top_mode: int
    theta: float
    theta_prime: float

    def __post_init__(self):
        if self.top_mode < 0:
            raise InputError(f"top_mode must be >= 0, got {self.top_mode}")
        object.__setattr__(self, "theta", float(self.theta) % TWO_PI)
        object.__setattr__(self, "theta_prime", float(self.theta_prime) % TWO_PI)


def mz_block(theta: float, theta_prime: float) -> np.ndarray:
    """The 2x2 transfer matrix of one Mach-Zehnder element."""
    c, s = np.cos(theta_prime / 2), np.sin(theta_prime / 2)
    e = np.exp(1j * theta)
    return np.array([[e * c, -s], [e * s, c]])


def t_matrix(m: int, elem: MzElement) -> np.ndarray:
    """Embed one element into an ``m x m`` identity at modes ``(j, j+1)``."""
    j = elem.top_mode
    if not 0 <= j <= m - 2:
        raise InputError(f"top_mode {j} out of range for {m} modes")
    t = np.eye(m, dtype=complex)
    t[j : j + 2, j : j + 2] = mz_block(elem.theta, elem.theta_prime)
    return t


@lru_cache(maxsize=None)
def clements_layout(m: int) -> tuple[tuple[int, int], ...]:
    """``(column, top_mode)`` of every element of one block, in application order.

    Even columns pair modes (0,1), (2,3), ...; odd columns pair (1,2), (3,4), ...
    """
    if m < 2:
        raise InputError(f"a mesh needs at least 2 modes, got {m}")
    return tuple((col, top) for col in range(m) for top in range(col % 2, m - 1, 2))


@dataclass(frozen=True, eq=False)
class MeshParams:
    """Flat phase vector of a ``k``-block mesh.

    Block ``b`` owns ``phases[b*P:(b+1)*P]`` with ``P = m(m-1)``; inside a
    block, element ``e`` of :func:`clements_layout` reads
    ``(theta, theta_prime) = (phases[2e], phases[2e+1])``.

    In ``single_phase_mode`` every ``theta`` is held at 0. With
    ``tied_blocks`` every block reads block 0's slice. Phases are wrapped into
    ``[0, 2*pi)`` on construction.
    """

    m: int
    k: int
    phases: np.ndarray
    single_phase_mode: bool = False
    tied_blocks: bool = False

    def __post_init__(self):
        if self.m < 2 or self.k < 1:
            raise InputError(f"need m >= 2 and k >= 1, got m={self.m}, k={self.k}")
        phases = np.array(self.phases, dtype=float, copy=True).ravel()
        expected = self.k * self.block_size
        if len(phases) != expected:
            raise InputError(f"expected {expected} phases for m={self.m}, k={self.k}, got {len(phases)}")
        if not np.all(np.isfinite(phases)):
            raise InputError("phases must be finite")
        phases = np.mod(phases, TWO_PI)
        if self.single_phase_mode:
            phases[0::2] = 0.0
        if self.tied_blocks:
            phases = np.tile(phases[: self.block_size], self.k)
        phases.setflags(write=False)
        object.__setattr__(self, "phases", phases)

    @property
    def block_size(self) -> int:
        return self.m * (self.m - 1)

    @classmethod
    def zeros(cls, m: int, k: int = 1, **flags) -> "MeshParams":
        return cls(m, k, np.zeros(k * m * (m - 1)), **flags)

    @classmethod
    def random(cls, m: int, k: int = 1, rng=None, **flags) -> "MeshParams":
        """Phases drawn uniformly from ``[0, 2*pi)``."""
        from .fock import as_generator

        rng = as_generator(rng)
        return cls(m, k, rng.uniform(0.0, TWO_PI, k * m * (m - 1)), **flags)

    def with_phases(self, phases) -> "MeshParams":
        return MeshParams(self.m, self.k, phases, self.single_phase_mode, self.tied_blocks)

    def free_mask(self) -> np.ndarray:
        """Entries an optimiser may move; pinned and tied copies are excluded."""
        mask = np.zeros(len(self.phases), dtype=bool)
        blocks = 1 if self.tied_blocks else self.k
        mask[: blocks * self.block_size] = True
        if self.single_phase_mode:
            mask[0::2] = False
        return mask

    def free_count(self) -> int:
        return int(self.free_mask().sum())

    def elements(self, block: int = 0) -> list[MzElement]:
        p = self.phases[block * self.block_size : (block + 1) * self.block_size]
        return [MzElement(top, p[2 * e], p[2 * e + 1]) for e, (_, top) in enumerate(clements_layout(self.m))]

    def to_json(self) -> dict:
        return {
            "m": self.m,
            "k": self.k,
            "single_phase_mode": self.single_phase_mode,
            "tied_blocks": self.tied_blocks,
            "phases": [float(v) for v in self.phases],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "MeshParams":
        return cls(
            int(doc["m"]),
            int(doc["k"]),
            np.asarray(doc["phases"], dtype=float),
            bool(doc.get("single_phase_mode", False)),
            bool(doc.get("tied_blocks", False)),
        )


def _block_unitary(m: int, phases: np.ndarray) -> np.ndarray:
    u = np.eye(m, dtype=complex)
    theta = phases[0::2]
    theta_prime = phases[1::2]
    e = np.exp(1j * theta)
    c = np.cos(theta_prime / 2)
    s = np.sin(theta_prime / 2)
    for idx, (_, j) in enumerate(clements_layout(m)):
        top = u[j].copy()
        bottom = u[j + 1]
        u[j] = e[idx] * c[idx] * top - s[idx] * bottom
        u[j + 1] = e[idx] * s[idx] * top + c[idx] * bottom
    return u


def compose(params: MeshParams) -> np.ndarray:
    """Unitary implemented by the mesh."""
    m, size = params.m, params.block_size
    u = np.eye(m, dtype=complex)
    for b in range(params.k):
        u = _block_unitary(m, params.phases[b * size : (b + 1) * size]) @ u
    return u
