"""Computational-basis enumeration by symmetry sector.

Bitmask convention shared by every module: site ``i`` (1-based) maps to bit
``i - 1``; a set bit means the spin points up (sigma_z = +1).  Sector bases
list their bitmasks in strictly ascending order, so the ordinal of a state
is recoverable by binary search.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidSector, NotInSector, SectorMismatch

# A basis state is a plain bitmask; only the low n_spins bits may be set.
BasisState = int

FULL = "full"
MAGNETIZATION = "magnetization"
PARITY = "parity"

MAX_SPINS = 24  # full-space vectors beyond this exceed desk-scale memory


@dataclass(frozen=True)
class SectorSpec:
    """Label of one invariant block of the Hamiltonian."""

    n_spins: int
    kind: str
    k: int | None = None          # up-spin count, magnetization sectors only
    parity: str | None = None     # "even" | "odd", parity sectors only

    def __post_init__(self):
        if self.n_spins < 2:
            raise InvalidSector(f"need at least 2 spins, got {self.n_spins}")
        if self.n_spins > MAX_SPINS:
            raise InvalidSector(f"n_spins {self.n_spins} exceeds cap {MAX_SPINS}")
        if self.kind == MAGNETIZATION:
            if self.k is None or not 0 <= self.k <= self.n_spins:
                raise InvalidSector(f"k={self.k} out of range for N={self.n_spins}")
        elif self.kind == PARITY:
            if self.parity not in ("even", "odd"):
                raise InvalidSector(f"parity must be 'even' or 'odd', got {self.parity!r}")
        elif self.kind != FULL:
            raise InvalidSector(f"unknown sector kind {self.kind!r}")

    @classmethod
    def full(cls, n_spins: int) -> "SectorSpec":
        return cls(n_spins, FULL)

    @classmethod
    def magnetization(cls, n_spins: int, k: int) -> "SectorSpec":
        return cls(n_spins, MAGNETIZATION, k=k)

    @classmethod
    def parity(cls, n_spins: int, parity: str) -> "SectorSpec":
        return cls(n_spins, PARITY, parity=parity)

    def dimension(self) -> int:
        if self.kind == FULL:
            return 1 << self.n_spins
        if self.kind == PARITY:
            return 1 << (self.n_spins - 1)
        from math import comb

        return comb(self.n_spins, self.k)

    def label(self) -> str:
        if self.kind == FULL:
            return "full"
        if self.kind == PARITY:
            return f"parity-{self.parity}"
        return f"k={self.k}"


@dataclass(frozen=True, eq=False)
class SectorBasis:
    """Ordered bitmask enumeration of one sector, ascending."""

    spec: SectorSpec
    states: np.ndarray = field(repr=False)  # int64, strictly increasing

    @property
    def dimension(self) -> int:
        return len(self.states)

    @property
    def n_spins(self) -> int:
        return self.spec.n_spins


def enumerate_sector(spec: SectorSpec) -> SectorBasis:
    """List all bitmasks of the sector in ascending order."""
    n = spec.n_spins
    all_states = np.arange(1 << n, dtype=np.int64)
    if spec.kind == FULL:
        states = all_states
    else:
        ups = np.bitwise_count(all_states)
        if spec.kind == MAGNETIZATION:
            states = all_states[ups == spec.k]
        else:
            want = 0 if spec.parity == "even" else 1
            states = all_states[(ups & 1) == want]
    states.setflags(write=False)
    return SectorBasis(spec=spec, states=states)


def index_of(basis: SectorBasis, state: BasisState) -> int:
    """Ordinal of ``state`` within the basis; NotInSector if absent."""
    pos = int(np.searchsorted(basis.states, state))
    if pos >= basis.dimension or basis.states[pos] != state:
        raise NotInSector(f"bitmask {state:#b} not in sector {basis.spec.label()}")
    return pos


def indices_of(basis: SectorBasis, states: np.ndarray) -> np.ndarray:
    """Vectorized index_of; every input must belong to the sector."""
    pos = np.searchsorted(basis.states, states)
    pos = np.minimum(pos, basis.dimension - 1)
    if not np.array_equal(basis.states[pos], states):
        raise NotInSector("some bitmasks are absent from the sector")
    return pos


@dataclass(eq=False)
class StateVector:
    """Complex amplitudes over a sector basis."""

    basis: SectorBasis
    amplitudes: np.ndarray  # complex128, len == basis.dimension

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def overlap(self, other: "StateVector") -> complex:
        if self.basis.spec != other.basis.spec:
            raise SectorMismatch("overlap between different sectors")
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def normalized(self) -> "StateVector":
        return StateVector(self.basis, self.amplitudes / self.norm())


def embed(
    basis_small: SectorBasis,
    amplitudes: np.ndarray,
    free_site_states: list[np.ndarray],
    target: SectorBasis,
) -> StateVector:
    """Tensor a small-basis state with single-spin states on the trailing sites.

    ``basis_small`` covers sites 1..M, ``free_site_states`` the sites
    M+1..N in order; each entry is a length-2 complex vector indexed by the
    bit value (0 = down, 1 = up).  The product must lie entirely inside the
    target sector, otherwise SectorMismatch is raised.
    """
    m = basis_small.n_spins
    n = target.n_spins
    if m + len(free_site_states) != n:
        raise SectorMismatch(
            f"{m} subchain sites plus {len(free_site_states)} free sites != N={n}"
        )
    amps = np.asarray(amplitudes, dtype=np.complex128)
    if amps.shape != (basis_small.dimension,):
        raise SectorMismatch("amplitude length does not match the small basis")

    masks = basis_small.states.copy()
    for offset, spin in enumerate(free_site_states):
        spin = np.asarray(spin, dtype=np.complex128)
        bit = 1 << (m + offset)
        down, up = spin[0], spin[1]
        parts = []
        if abs(down) > 0.0:
            parts.append((masks, amps * down))
        if abs(up) > 0.0:
            parts.append((masks | bit, amps * up))
        masks = np.concatenate([p[0] for p in parts])
        amps = np.concatenate([p[1] for p in parts])

    out = np.zeros(target.dimension, dtype=np.complex128)
    keep = np.abs(amps) > 1e-14
    masks, amps = masks[keep], amps[keep]
    pos = np.searchsorted(target.states, masks)
    pos_clipped = np.minimum(pos, target.dimension - 1)
    if not np.array_equal(target.states[pos_clipped], masks):
        raise SectorMismatch("product state has components outside the target sector")
    np.add.at(out, pos_clipped, amps)
    nrm = np.linalg.norm(out)
    if nrm == 0.0:
        raise SectorMismatch("product state vanishes in the target sector")
    return StateVector(target, out / nrm)


def scatter_subchain(
    sub_basis: SectorBasis,
    amplitudes: np.ndarray,
    site_map: list[int],
    n_total: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Re-express subchain bitmasks on the sites of a larger chain.

    ``site_map[j]`` is the 1-based site of the big chain carrying subchain
    site j+1.  Returns (bitmasks over the big chain, amplitudes), without
    any sector lookup.
    """
    masks = np.zeros(sub_basis.dimension, dtype=np.int64)
    for j, site in enumerate(site_map):
        bit_in = (sub_basis.states >> j) & 1
        masks |= bit_in << (site - 1)
    return masks, np.asarray(amplitudes, dtype=np.complex128)
