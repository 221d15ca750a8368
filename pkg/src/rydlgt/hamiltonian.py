"""Drive schedules and the Rydberg Hamiltonian as a matrix-free operator.

The Hamiltonian (angular-frequency units, rad/us) is

    H(t) = Omega(t)/2 sum_l (e^{i phi} |g><r|_l + h.c.)
         - sum_l (delta(t) - c_l delta0(t)) n_l
         + sum_{l<l'} V_{l,l'} n_l n_l'

with V = C6/r^6 truncated at a configurable cutoff (default 3a).  In the
blockaded basis the off-diagonal term keeps only flips that stay inside the
subspace, i.e. the operator is P H P.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import CapacityError, ConfigError
from .geometry import Geometry, interaction_graph
from .hilbert import BLOCKADED, FULL, BasisSpace, QuantumState
from .units import TWO_PI, blockade_radius, c6_from_blockade_radius

DENSE_LIMIT = 4096


class PiecewiseLinear:
    """Piecewise-linear time course defined by (t, value) breakpoints."""

    def __init__(self, points):
        pts = [(float(t), float(v)) for t, v in points]
        if not pts:
            raise ConfigError("a channel needs at least one breakpoint")
        times = [t for t, _ in pts]
        if any(t2 <= t1 for t1, t2 in zip(times, times[1:])):
            raise ConfigError(f"breakpoint times must be strictly increasing: {times}")
        self.times = np.array(times)
        self.values = np.array([v for _, v in pts])

    @classmethod
    def constant(cls, value: float) -> "PiecewiseLinear":
        return cls([(0.0, value)])

    def __call__(self, t: float) -> float:
        return float(np.interp(t, self.times, self.values))

    def max_abs_slope(self) -> float:
        if len(self.times) < 2:
            return 0.0
        dv = np.diff(self.values)
        dt = np.diff(self.times)
        return float(np.max(np.abs(dv / dt)))

    def max_value(self) -> float:
        return float(np.max(self.values))

    def shifted(self, offset: float) -> "PiecewiseLinear":
        return PiecewiseLinear(list(zip(self.times + offset, self.values)))

    def breakpoints(self) -> list[tuple[float, float]]:
        return list(zip(self.times.tolist(), self.values.tolist()))


@dataclass
class DriveSchedule:
    """Time courses of the four drive channels plus the static local pattern.

    ``pattern`` holds the per-atom grayscale c_l in [0, 1]; ``phi`` is a raw
    phase in rad, every other channel is an angular frequency in rad/us.
    """

    omega: PiecewiseLinear
    delta: PiecewiseLinear
    t_end: float
    phi: PiecewiseLinear = field(default_factory=lambda: PiecewiseLinear.constant(0.0))
    delta0: PiecewiseLinear = field(default_factory=lambda: PiecewiseLinear.constant(0.0))
    pattern: np.ndarray | None = None

    def __post_init__(self):
        if self.t_end <= 0.0:
            raise ConfigError(f"schedule duration must be positive, got {self.t_end}")
        if self.pattern is not None:
            self.pattern = np.asarray(self.pattern, dtype=float)
            if np.any(self.pattern < 0.0) or np.any(self.pattern > 1.0):
                raise ConfigError("pattern coefficients c_l must lie in [0, 1]")

    def sample(self, t: float) -> tuple[float, float, float, float]:
        return (self.omega(t), self.delta(t), self.phi(t), self.delta0(t))

    def to_json_dict(self) -> dict:
        def chan(pl: PiecewiseLinear, scale: float) -> list:
            return [[t, v / scale] for t, v in pl.breakpoints()]

        doc = {
            "t_end_us": self.t_end,
            "omega": chan(self.omega, TWO_PI),
            "delta": chan(self.delta, TWO_PI),
            "phi": chan(self.phi, 1.0),
            "delta_local": chan(self.delta0, TWO_PI),
        }
        if self.pattern is not None:
            doc["pattern"] = self.pattern.tolist()
        return doc

    @classmethod
    def from_json_dict(cls, doc: dict) -> "DriveSchedule":
        def chan(rows, scale):
            return PiecewiseLinear([(t, v * scale) for t, v in rows])

        return cls(
            omega=chan(doc["omega"], TWO_PI),
            delta=chan(doc["delta"], TWO_PI),
            t_end=float(doc["t_end_us"]),
            phi=chan(doc.get("phi", [[0.0, 0.0]]), 1.0),
            delta0=chan(doc.get("delta_local", [[0.0, 0.0]]), TWO_PI),
            pattern=None if "pattern" not in doc else np.asarray(doc["pattern"], dtype=float),
        )


@dataclass(frozen=True)
class HamiltonianParams:
    """One instant of the drive: (Omega, delta, phi, delta0)."""

    omega: float
    delta: float
    phi: float = 0.0
    delta0: float = 0.0


class RydbergHamiltonian:
    """Matrix-free H over one basis, with precomputed diagonal pieces.

    The couplings map and the local pattern are fixed at construction;
    drive values are passed per application so one instance serves a whole
    time-dependent evolution.
    """

    def __init__(self, basis: BasisSpace, couplings: dict[tuple[int, int], float],
                 pattern: np.ndarray | None = None):
        self.basis = basis
        self.couplings = dict(couplings)
        n = basis.n_atoms
        if pattern is None:
            pattern = np.zeros(n)
        pattern = np.asarray(pattern, dtype=float)
        if pattern.shape != (n,):
            raise ConfigError(f"pattern length {pattern.shape} != atom count {n}")
        self.pattern = pattern

        occ = basis.occupations()  # (dim, n) uint8
        occ_f = occ.astype(np.float64)
        self.n_total = occ_f.sum(axis=1)
        self.n_pattern = occ_f @ pattern
        pair_energy = np.zeros(basis.size)
        for (i, j), v in self.couplings.items():
            pair_energy += v * (occ[:, i] & occ[:, j])
        self.pair_energy = pair_energy
        self._occ = occ

        # Flip targets: index of the basis state with atom l toggled; flips
        # that leave the (blockaded) space point at the sentinel row `dim`,
        # which gathers a padded zero.  The full space uses XOR arithmetic.
        if basis.mode == BLOCKADED:
            shifts = np.array([n - 1 - i for i in range(n)], dtype=np.uint64)
            flipped = basis.states[:, None] ^ (np.uint64(1) << shifts[None, :])
            targets = basis.lookup(flipped.ravel()).reshape(basis.size, n)
            targets[targets < 0] = basis.size
            self.flip_targets = targets.astype(np.int64)
        else:
            self.flip_targets = None
        self._codes = None  # lazy arange for full-mode XOR flips

    @property
    def dim(self) -> int:
        return self.basis.size

    def with_pattern(self, pattern: np.ndarray) -> "RydbergHamiltonian":
        """Variant with a different local pattern, sharing all heavy tables."""
        pattern = np.asarray(pattern, dtype=float)
        if pattern.shape != (self.basis.n_atoms,):
            raise ConfigError(f"pattern length {pattern.shape} != atom count {self.basis.n_atoms}")
        other = object.__new__(RydbergHamiltonian)
        other.__dict__.update(self.__dict__)
        other.pattern = pattern
        other.n_pattern = self._occ.astype(np.float64) @ pattern
        return other

    def diagonal(self, params: HamiltonianParams) -> np.ndarray:
        return self.pair_energy - params.delta * self.n_total + params.delta0 * self.n_pattern

    def apply(self, vec: np.ndarray, params: HamiltonianParams) -> np.ndarray:
        """H @ vec for one drive sample; vec may be real or complex."""
        if vec.shape != (self.dim,):
            raise ConfigError(f"vector length {vec.shape} != basis size {self.dim}")
        out = self.diagonal(params) * vec
        half = 0.5 * params.omega
        if half == 0.0:
            return out
        if params.phi == 0.0:
            up = down = half
        else:
            # <g|H|r> = Omega/2 e^{i phi}; the conjugate goes the other way.
            up = half * np.exp(1j * params.phi)
            down = np.conj(up)
            out = out.astype(np.complex128)
        n = self.basis.n_atoms
        if self.flip_targets is None:
            if self._codes is None:
                self._codes = np.arange(self.dim, dtype=np.uint64)
            codes = self._codes
            for atom in range(n):
                bit = np.uint64(1) << np.uint64(n - 1 - atom)
                partner = (codes ^ bit).astype(np.int64)
                if up == down:
                    out += up * vec[partner]
                else:
                    excited = (codes & bit).astype(bool)
                    out += np.where(excited, down, up) * vec[partner]
        else:
            padded = np.concatenate([vec, np.zeros(1, dtype=vec.dtype)])
            for atom in range(n):
                gathered = padded[self.flip_targets[:, atom]]
                if up == down:
                    out += up * gathered
                else:
                    excited = self._occ[:, atom].astype(bool)
                    out += np.where(excited, down, up) * gathered
        return out

    def matvec(self, params: HamiltonianParams):
        """Closure H@v at fixed drive values (for eigensolvers/propagators)."""
        return lambda v: self.apply(v, params)

    def apply_state(self, state: QuantumState, params: HamiltonianParams) -> QuantumState:
        if state.basis is not self.basis:
            raise ConfigError("state and Hamiltonian live on different bases")
        return QuantumState(self.basis, self.apply(state.amplitudes.copy(), params),
                            normalized=False)

    def dense(self, params: HamiltonianParams, limit: int = DENSE_LIMIT) -> np.ndarray:
        """Explicit Hermitian matrix; oracle for tests and exact spectra."""
        if self.dim > limit:
            raise CapacityError(f"dense matrix of size {self.dim} exceeds limit {limit}")
        h = np.zeros((self.dim, self.dim), dtype=np.complex128)
        rows = np.arange(self.dim)
        h[rows, rows] = self.diagonal(params)
        half = 0.5 * params.omega
        if half == 0.0:
            return h
        up = half * np.exp(1j * params.phi)
        down = np.conj(up)
        n = self.basis.n_atoms
        for atom in range(n):
            excited = self._occ[:, atom].astype(bool)
            coeff = np.where(excited, down, up)
            if self.flip_targets is None:
                bit = np.uint64(1) << np.uint64(n - 1 - atom)
                partner = (self.basis.states ^ bit).astype(np.int64)
                h[rows, partner] += coeff
            else:
                tgt = self.flip_targets[:, atom]
                ok = tgt < self.dim
                h[rows[ok], tgt[ok]] += coeff[ok]
        return h

    def classical_energy(self, code_or_bits, params: HamiltonianParams) -> float:
        """Diagonal expectation on a computational product state.

        The Omega term averages to zero; only interactions and detunings
        contribute.  Accepts a '0'/'1' string or an integer code.
        """
        if isinstance(code_or_bits, str):
            bits = code_or_bits
        else:
            bits = format(int(code_or_bits), f"0{self.basis.n_atoms}b")
        if len(bits) != self.basis.n_atoms:
            raise ConfigError(f"bitstring length {len(bits)} != atom count {self.basis.n_atoms}")
        n = np.frombuffer(bits.encode(), dtype=np.uint8) - ord("0")
        energy = 0.0
        for (i, j), v in self.couplings.items():
            if n[i] and n[j]:
                energy += v
        energy -= params.delta * float(n.sum())
        energy += params.delta0 * float(self.pattern @ n)
        return energy


def hamiltonian_for(basis: BasisSpace, r_b: float, omega: float = 1.0,
                    cutoff_over_a: float = 3.0,
                    pattern: np.ndarray | None = None) -> RydbergHamiltonian:
    """Convenience constructor: couplings from a blockade radius in units of a."""
    geom = basis.geometry
    c6 = c6_from_blockade_radius(r_b * geom.a, omega)
    cutoff = None if cutoff_over_a is None else cutoff_over_a * geom.a
    return RydbergHamiltonian(basis, interaction_graph(geom, c6, cutoff), pattern)
