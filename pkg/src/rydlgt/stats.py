"""Snapshot statistics: sampling, detection and thermal noise, string
probabilities with spatial filters, and exact binomial intervals.
"""

from dataclasses import dataclass, field
import io

import numpy as np
import scipy.stats

from .errors import ConfigError
from .geometry import Geometry, couplings_from_positions
from .hilbert import BasisSpace, QuantumState
from .lgt import NamedConfig

AGGRESSIVE = "aggressive"
CONSERVATIVE = "conservative"


@dataclass(frozen=True)
class NoiseModel:
    """Detection fidelities and position jitter.

    Jitter values are in the geometry's length unit (um for physical
    lattices); the defaults quote the hardware numbers in um.
    """

    sigma_thermal: float = 0.2
    sigma_static: float = 0.1
    p_rydberg: float = 0.95
    p_ground: float = 0.99

    def __post_init__(self):
        if not (0.0 <= self.p_rydberg <= 1.0 and 0.0 <= self.p_ground <= 1.0):
            raise ConfigError("detection fidelities must lie in [0, 1]")
        if self.sigma_thermal < 0.0 or self.sigma_static < 0.0:
            raise ConfigError("position jitters must be >= 0")


@dataclass
class ShotSet:
    """Measured or simulated occupation-basis snapshots."""

    geometry: Geometry
    bits: np.ndarray  # (n_shots, n_atoms) uint8
    provenance: str = "simulated"
    seed: int | None = None

    def __post_init__(self):
        self.bits = np.asarray(self.bits, dtype=np.uint8)
        if self.bits.ndim != 2 or self.bits.shape[1] != self.geometry.n_atoms:
            raise ConfigError(
                f"shot array shape {self.bits.shape} does not match atom count "
                f"{self.geometry.n_atoms}")

    @property
    def n_shots(self) -> int:
        return self.bits.shape[0]

    def bitstrings(self) -> list[str]:
        return ["".join(str(int(b)) for b in row) for row in self.bits]

    def write(self, fh, geometry_file: str = "-"):
        fh.write(f"# geometry: {geometry_file}\n")
        fh.write(f"# seed: {self.seed if self.seed is not None else 0}\n")
        for row in self.bitstrings():
            fh.write(row + "\n")

    @classmethod
    def read(cls, fh, geometry: Geometry) -> "ShotSet":
        seed = None
        rows = []
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                if line.startswith("# seed:"):
                    seed = int(line.split(":", 1)[1])
                continue
            if len(line) != geometry.n_atoms or set(line) - {"0", "1"}:
                raise ConfigError(
                    f"line {lineno}: bad bitstring {line!r} (expected {geometry.n_atoms} "
                    "characters of 0/1)")
            rows.append([ord(c) - ord("0") for c in line])
        bits = np.array(rows, dtype=np.uint8).reshape(len(rows), geometry.n_atoms)
        return cls(geometry=geometry, bits=bits, provenance="file", seed=seed)


@dataclass(frozen=True)
class FilterRegion:
    """Atom-id subset used to match snapshot patterns."""

    atom_ids: tuple
    name: str = "custom"

    def __post_init__(self):
        if len(set(self.atom_ids)) != len(self.atom_ids):
            raise ConfigError("filter region has duplicate atom ids")

    @classmethod
    def box_around(cls, geom: Geometry, core_ids, margin: float, name: str) -> "FilterRegion":
        """All atoms inside the bounding box of ``core_ids`` grown by ``margin``."""
        core = geom.positions[list(core_ids)]
        lo = core.min(axis=0) - margin
        hi = core.max(axis=0) + margin
        inside = np.all((geom.positions >= lo - 1e-9) & (geom.positions <= hi + 1e-9), axis=1)
        return cls(atom_ids=tuple(np.nonzero(inside)[0].tolist()), name=name)

    @classmethod
    def aggressive(cls, geom: Geometry, string_ids) -> "FilterRegion":
        """The string atoms themselves (a tight box)."""
        return cls.box_around(geom, string_ids, margin=0.25 * geom.a, name=AGGRESSIVE)

    @classmethod
    def conservative(cls, geom: Geometry, string_ids) -> "FilterRegion":
        """String atoms plus the first surrounding shell; matching on the
        larger region post-selects more strictly."""
        return cls.box_around(geom, string_ids, margin=1.0 * geom.a, name=CONSERVATIVE)


def sample_shots(state: QuantumState, n: int, seed: int) -> ShotSet:
    """Draw occupation-basis snapshots from |amplitude|^2."""
    if abs(state.norm() - 1.0) > 1e-10:
        raise ConfigError(f"state norm {state.norm()} is not 1; normalize before sampling")
    rng = np.random.default_rng(seed)
    probs = state.probabilities()
    probs = probs / probs.sum()
    idx = rng.choice(state.basis.size, size=n, p=probs)
    codes = state.basis.states[idx]
    n_atoms = state.basis.n_atoms
    shifts = np.array([n_atoms - 1 - i for i in range(n_atoms)], dtype=np.uint64)
    bits = ((codes[:, None] >> shifts[None, :]) & np.uint64(1)).astype(np.uint8)
    return ShotSet(geometry=state.basis.geometry, bits=bits, provenance="simulated", seed=seed)


def apply_detection_errors(shots: ShotSet, noise: NoiseModel, seed: int) -> ShotSet:
    """Independent per-atom readout flips: 1->0 with 1-p_r, 0->1 with 1-p_g."""
    rng = np.random.default_rng(seed)
    u = rng.random(shots.bits.shape)
    flip_excited = (shots.bits == 1) & (u < 1.0 - noise.p_rydberg)
    flip_ground = (shots.bits == 0) & (u < 1.0 - noise.p_ground)
    out = shots.bits ^ (flip_excited | flip_ground)
    return ShotSet(geometry=shots.geometry, bits=out.astype(np.uint8),
                   provenance=shots.provenance, seed=shots.seed)


def perfect_read_probability(bits: str, noise: NoiseModel) -> float:
    """Closed-form probability that every atom of a target reads correctly:
    p_g^{n_g} * p_r^{n_r}."""
    n_r = bits.count("1")
    n_g = len(bits) - n_r
    return noise.p_ground**n_g * noise.p_rydberg**n_r


def _region_patterns(configs, region: FilterRegion) -> dict:
    patterns = {}
    for cfg in configs:
        patterns[cfg.label] = np.array([int(cfg.bits[i]) for i in region.atom_ids],
                                       dtype=np.uint8)
    keys = ["".join(map(str, p)) for p in patterns.values()]
    if len(set(keys)) != len(keys):
        raise ConfigError(
            f"filter region {region.name!r} does not separate the configurations "
            "(two labels restrict to the same pattern)")
    return patterns


def string_probabilities(shots: ShotSet, configs, region: FilterRegion) -> dict:
    """Per-label match frequencies of the region-restricted patterns.

    Returns label -> (k, n, p); the total string probability is the sum over
    ``string_*`` labels, exposed under the key ``p_s``.
    """
    patterns = _region_patterns(configs, region)
    sub = shots.bits[:, list(region.atom_ids)]
    out = {}
    n = shots.n_shots
    for label, pat in patterns.items():
        k = int(np.all(sub == pat[None, :], axis=1).sum())
        out[label] = (k, n, k / n if n else 0.0)
    return out


def state_probabilities(state: QuantumState, configs, region: FilterRegion) -> dict:
    """Exact Born probabilities of the region-restricted patterns."""
    patterns = _region_patterns(configs, region)
    basis = state.basis
    n_atoms = basis.n_atoms
    ids = np.array(region.atom_ids)
    shifts = (n_atoms - 1 - ids).astype(np.uint64)
    sub = ((basis.states[:, None] >> shifts[None, :]) & np.uint64(1)).astype(np.uint8)
    weights = np.asarray([1 << k for k in range(len(ids))], dtype=np.int64)
    keys = sub @ weights
    probs = state.probabilities()
    out = {}
    for label, pat in patterns.items():
        target = int(pat.astype(np.int64) @ weights)
        out[label] = float(probs[keys == target].sum())
    return out


def total_string_probability(table: dict) -> float:
    """p_s = sum of the minimal-string entries of a probability table."""
    total = 0.0
    for label, value in table.items():
        if label.startswith("string_"):
            total += value[2] if isinstance(value, tuple) else value
    return total


def violation_probabilities(shots: ShotSet, region: FilterRegion, geom: Geometry) -> dict:
    """Blockade-violation frequencies within the filter region.

    A vertex is violated when >= 2 region atoms around it are excited.
    Buckets (each violating shot lands in exactly one):
      v1  a single violated vertex on sublattice A,
      v2  a single violated vertex on sublattice B,
      v3  a triple occupancy or more than one violated vertex.
    For the 3-atom string of a d=2 geometry these are the patterns
    110, 011 and 111.
    """
    ids = set(region.atom_ids)
    vertices = []
    for site in geom.vertices():
        around = [i for i in geom.atoms_around(site) if i in ids]
        if len(around) >= 2:
            vertices.append((site[2], around))
    counts = {"p_v1": 0, "p_v2": 0, "p_v3": 0}
    for row in shots.bits:
        violated = []
        triple = False
        for sub, around in vertices:
            occ = int(sum(row[i] for i in around))
            if occ >= 2:
                violated.append(sub)
                if occ >= 3:
                    triple = True
        if not violated:
            continue
        if triple or len(violated) > 1:
            counts["p_v3"] += 1
        elif violated[0] == "A":
            counts["p_v1"] += 1
        else:
            counts["p_v2"] += 1
    n = shots.n_shots
    return {k: (v, n, v / n if n else 0.0) for k, v in counts.items()}


def clopper_pearson(k: int, n: int, alpha: float = 0.32) -> tuple[float, float]:
    """Exact central binomial confidence interval at error rate alpha."""
    if not 0 <= k <= n or n <= 0:
        raise ConfigError(f"need 0 <= k <= n with n > 0, got k={k}, n={n}")
    if not 0.0 < alpha < 1.0:
        raise ConfigError(f"alpha must lie in (0, 1), got {alpha}")
    low = 0.0 if k == 0 else float(scipy.stats.beta.ppf(alpha / 2.0, k, n - k + 1))
    high = 1.0 if k == n else float(scipy.stats.beta.isf(alpha / 2.0, k + 1, n - k))
    return (low, high)


def thermal_ensemble(geom: Geometry, noise: NoiseModel, n_realizations: int, seed: int,
                     c6: float, cutoff: float | None = None) -> list[dict]:
    """Coupling maps under quenched position disorder.

    One static placement offset is drawn for the whole set; each realization
    adds independent thermal offsets and recomputes V on the nominal pair
    set (pairs within the cutoff of the unperturbed geometry).
    """
    rng = np.random.default_rng(seed)
    if cutoff is None:
        cutoff = 3.0 * geom.a
    pairs = list(geom.pair_distances(cutoff))
    static = rng.normal(0.0, noise.sigma_static, size=geom.positions.shape)
    maps = []
    for _ in range(n_realizations):
        thermal = rng.normal(0.0, noise.sigma_thermal, size=geom.positions.shape)
        pos = geom.positions + static + thermal
        vals = {}
        for (i, j) in pairs:
            r = float(np.hypot(*(pos[i] - pos[j])))
            vals[(i, j)] = c6 / r**6
        maps.append(vals)
    return maps


def pair_spread_linearized(r: float, v: float, sigma_axis: float) -> float:
    """First-order spread of V(r): 6 V sigma_rel / r with sigma_rel = sqrt(2) sigma."""
    return 6.0 * v * np.sqrt(2.0) * sigma_axis / r


def meanfield_energy_spread(bits: str, geom: Geometry, noise: NoiseModel,
                            c6: float, cutoff: float | None = None) -> float:
    """Quadrature spread of the interaction energies of the excited atoms.

    Per excited atom, thermal jitter spreads its total interaction energy
    with the other excited atoms; the per-atom standard deviations combine
    in quadrature.
    """
    if len(bits) != geom.n_atoms:
        raise ConfigError(f"bitstring length {len(bits)} != atom count {geom.n_atoms}")
    n = np.frombuffer(bits.encode(), dtype=np.uint8) - ord("0")
    excited = np.nonzero(n)[0]
    if cutoff is None:
        cutoff = 3.0 * geom.a
    pairs = geom.pair_distances(cutoff)
    var_per_atom = {i: 0.0 for i in excited}
    for (i, j), r in pairs.items():
        if n[i] and n[j]:
            s = pair_spread_linearized(r, c6 / r**6, noise.sigma_thermal)
            var_per_atom[i] += s**2
            var_per_atom[j] += s**2
    return float(np.sqrt(sum(var_per_atom.values())))


def probability_table_rows(table: dict, alpha: float = 0.32) -> list[dict]:
    """CSV-ready rows (label, k, n, p, ci_low, ci_high) from a counts table."""
    rows = []
    for label, value in table.items():
        if isinstance(value, tuple):
            k, n, p = value
            lo, hi = clopper_pearson(k, n, alpha) if n > 0 else (0.0, 1.0)
        else:
            k, n, p = "", "", value
            lo = hi = value
        rows.append({"label": label, "k": k, "n": n, "p": p, "ci_low": lo, "ci_high": hi})
    return rows
