"""Basis spaces over atomic bitstrings and states on them.

A basis state is encoded as an integer whose bit for atom ``i`` sits at
position ``n_atoms - 1 - i`` (atom 0 is the leftmost character of the
serialized '0'/'1' string, bit value 1 = Rydberg).  Enumeration is ascending
in that integer, which for the full space makes index == code.

The blockade constraint - at most one excited atom among the (up to three)
links around every honeycomb vertex - is pairwise: no two atoms sharing a
vertex may both be excited.  The constrained enumeration is a depth-first
walk over atoms with per-atom conflict masks.
"""

from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, ConfigError
from .geometry import Geometry

FULL = "full"
BLOCKADED = "blockaded"

MAX_FULL_ATOMS = 24
MAX_BASIS_STATES = 4_000_000


def bitstring_to_code(bits: str) -> int:
    return int(bits, 2)


def code_to_bitstring(code: int, n_atoms: int) -> str:
    return format(code, f"0{n_atoms}b")


def bit_of(n_atoms: int, atom_id: int) -> int:
    """Single-bit mask for an atom id under the MSB-first convention."""
    return 1 << (n_atoms - 1 - atom_id)


def conflict_masks(geom: Geometry) -> list[int]:
    """Per-atom mask of all atoms sharing a vertex with it."""
    n = geom.n_atoms
    masks = [0] * n
    for site in geom.vertices():
        ids = geom.atoms_around(site)
        for a in ids:
            for b in ids:
                if a != b:
                    masks[a] |= bit_of(n, b)
    return masks


class BasisSpace:
    """Indexed enumeration of atomic bitstrings over one geometry."""

    def __init__(self, geometry: Geometry, mode: str, states: np.ndarray):
        self.geometry = geometry
        self.mode = mode
        self.states = states  # ascending uint64 codes
        self._index: dict[int, int] | None = None

    @property
    def size(self) -> int:
        return len(self.states)

    @property
    def n_atoms(self) -> int:
        return self.geometry.n_atoms

    def index_of(self, code: int) -> int:
        """Dense index for a basis code; raises KeyError if absent."""
        if self.mode == FULL:
            if 0 <= code < self.size:
                return int(code)
            raise KeyError(code)
        if self._index is None:
            self._index = {int(c): k for k, c in enumerate(self.states)}
        return self._index[int(code)]

    def contains(self, code: int) -> bool:
        if self.mode == FULL:
            return 0 <= code < self.size
        try:
            self.index_of(code)
            return True
        except KeyError:
            return False

    def lookup(self, codes: np.ndarray) -> np.ndarray:
        """Vectorized code -> index; -1 where the code is not in the basis."""
        codes = np.asarray(codes, dtype=np.uint64)
        if self.mode == FULL:
            return codes.astype(np.int64)
        pos = np.searchsorted(self.states, codes)
        pos = np.clip(pos, 0, self.size - 1)
        ok = self.states[pos] == codes
        return np.where(ok, pos, -1).astype(np.int64)

    def bitstring(self, idx: int) -> str:
        return code_to_bitstring(int(self.states[idx]), self.n_atoms)

    def occupations(self) -> np.ndarray:
        """(size, n_atoms) uint8 matrix of per-atom occupation numbers."""
        n = self.n_atoms
        shifts = np.array([n - 1 - i for i in range(n)], dtype=np.uint64)
        return ((self.states[:, None] >> shifts[None, :]) & np.uint64(1)).astype(np.uint8)


def enumerate_basis(geom: Geometry, mode: str, max_states: int = MAX_BASIS_STATES) -> BasisSpace:
    """Full or blockade-constrained basis over the geometry's present atoms."""
    n = geom.n_atoms
    if mode == FULL:
        if n > MAX_FULL_ATOMS:
            raise CapacityError(f"full basis for {n} atoms exceeds the {MAX_FULL_ATOMS}-atom bound")
        if 2**n > max_states:
            raise CapacityError(f"full basis size 2^{n} exceeds max_states={max_states}")
        return BasisSpace(geom, FULL, np.arange(2**n, dtype=np.uint64))
    if mode != BLOCKADED:
        raise ConfigError(f"unknown basis mode {mode!r}")

    masks = conflict_masks(geom)
    states: list[int] = []
    # Depth-first over atoms in id order, 0-branch first: codes come out
    # ascending because atom 0 owns the most significant bit.
    stack = [(0, 0)]
    while stack:
        atom, code = stack.pop()
        while atom < n:
            if code & masks[atom] == 0:
                stack.append((atom + 1, code | bit_of(n, atom)))
            atom += 1
        states.append(code)
        if len(states) > max_states:
            raise CapacityError(f"blockaded basis exceeds max_states={max_states}")
    states.sort()
    return BasisSpace(geom, BLOCKADED, np.array(states, dtype=np.uint64))


def is_blockade_valid(code: int, geom: Geometry) -> bool:
    masks = conflict_masks(geom)
    n = geom.n_atoms
    for atom in range(n):
        if code & bit_of(n, atom) and code & masks[atom]:
            return False
    return True


def vertex_occupancy(bits: str, geom: Geometry) -> dict:
    """Per-vertex count of excited adjacent atoms for one bitstring."""
    if len(bits) != geom.n_atoms:
        raise ConfigError(f"bitstring length {len(bits)} != atom count {geom.n_atoms}")
    occ = {}
    for site in geom.vertices():
        occ[site] = sum(bits[i] == "1" for i in geom.atoms_around(site))
    return occ


NORM_TOL = 1e-10


@dataclass
class QuantumState:
    """Complex amplitude vector over a basis."""

    basis: BasisSpace
    amplitudes: np.ndarray
    normalized: bool = True

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.complex128)
        if self.amplitudes.shape != (self.basis.size,):
            raise ConfigError(
                f"amplitude vector length {self.amplitudes.shape} != basis size {self.basis.size}"
            )
        if self.normalized and abs(self.norm() - 1.0) > NORM_TOL:
            raise ConfigError(f"state norm {self.norm()} deviates from 1 beyond {NORM_TOL}")

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    @classmethod
    def basis_state(cls, basis: BasisSpace, code: int) -> "QuantumState":
        amps = np.zeros(basis.size, dtype=np.complex128)
        amps[basis.index_of(code)] = 1.0
        return cls(basis, amps)

    @classmethod
    def from_bitstring(cls, basis: BasisSpace, bits: str) -> "QuantumState":
        return cls.basis_state(basis, bitstring_to_code(bits))


def project(state: QuantumState, target: BasisSpace) -> QuantumState:
    """Restrict a full-space state to the blockaded subspace (norm may shrink)."""
    if state.basis.geometry is not target.geometry:
        raise ConfigError("projection requires bases over the same geometry")
    if state.basis.mode != FULL or target.mode != BLOCKADED:
        raise ConfigError("project maps a full-space state onto a blockaded basis")
    amps = state.amplitudes[target.states.astype(np.int64)]
    return QuantumState(target, amps, normalized=False)


def embed(state: QuantumState, target: BasisSpace) -> QuantumState:
    """Isometric inclusion of a blockaded state into the full space."""
    if state.basis.geometry is not target.geometry:
        raise ConfigError("embedding requires bases over the same geometry")
    if state.basis.mode != BLOCKADED or target.mode != FULL:
        raise ConfigError("embed maps a blockaded state into a full basis")
    amps = np.zeros(target.size, dtype=np.complex128)
    amps[state.basis.states.astype(np.int64)] = state.amplitudes
    return QuantumState(target, amps, normalized=False)
