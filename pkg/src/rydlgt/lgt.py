"""Gauge-theory dictionary between atomic bitstrings and U(1) link models.

Sign convention.  With s_l = 0 on intra-cell links and 1 on bridges, the
electric field is defined through

    (-1)^{s_l} S^z_l = 1/2 - n_l ,

i.e. intra-cell links are excited in the vacuum and bridges are not.  This
is the unique assignment for which the all-(-1/2) vacuum, the columnar
covering, and the blockade constraint coincide.  Links that are absent
(removed by a defect or outside the patch) enter the lattice divergence as
frozen ground-state atoms, so every vertex sees three link slots and the
staggered static background q_x = (-1)^{s_x}/2 holds uniformly:

    grad_x S^z = (-1)^{s_x} (3/2 - N_x),     N_x = excited atoms at x,
    Q_x        = (-1)^{s_x} (1 - N_x)        in {0,1} on A, {-1,0} on B.

A defect vertex has N_x = 0 frozen, hence a charge Q = +1 (A) or -1 (B)
that cannot fluctuate; these are the static charges of the problem.
"""

from dataclasses import dataclass
import itertools
import json

import numpy as np

from .errors import ConfigError
from .geometry import Geometry, Site, adjacent_links, site_sign_exponent
from .hilbert import is_blockade_valid, vertex_occupancy

VACUUM = "vacuum"
BROKEN = "broken_b"
CHARGES = "charges_c"
INTERMEDIATE_I = "intermediate_i"
INTERMEDIATE_J = "intermediate_j"


def _sign(site: Site) -> int:
    return 1 if site_sign_exponent(site) == 0 else -1


def all_sites(geom: Geometry) -> list[Site]:
    """Every honeycomb vertex of the ideal patch, defect sites included."""
    spec = geom.spec
    return [(i, j, sub) for j in range(spec.L1) for i in range(spec.L0) for sub in ("A", "B")]


@dataclass
class GaugeConfig:
    """Decoded electric fields and charges for one snapshot.

    ``sz`` is indexed by atom id; ``charge`` holds the decoded Q_x per site
    (the forced +-1 at defect vertices included); ``static_charge`` reports
    the non-fluctuating content per site: the staggered +-1/2 background,
    overridden by the forced +-1 at defect sites.
    """

    geometry: Geometry
    sz: np.ndarray
    charge: dict
    static_charge: dict

    def to_json(self) -> str:
        doc = {
            "links": [
                {"key": list(a.key), "sz": float(self.sz[a.id])} for a in self.geometry.atoms
            ],
            "charges": [
                {"site": list(site), "Q": q} for site, q in sorted(self.charge.items())
            ],
            "static_charges": [
                {"site": list(site), "q": q} for site, q in sorted(self.static_charge.items())
            ],
        }
        return json.dumps(doc, indent=1)


def encode(bits: str, geom: Geometry, strict: bool = True) -> GaugeConfig:
    """Decode a measured bitstring into link fields and charges.

    In strict mode blockade-violating inputs are rejected; otherwise the
    charges simply leave their hardcore range at the violating vertices.
    """
    if len(bits) != geom.n_atoms:
        raise ConfigError(f"bitstring length {len(bits)} != atom count {geom.n_atoms}")
    n = np.frombuffer(bits.encode(), dtype=np.uint8) - ord("0")
    if strict and not is_blockade_valid(int(bits, 2), geom):
        raise ConfigError("bitstring violates the blockade constraint (strict mode)")
    s_l = np.array([a.s_l for a in geom.atoms])
    sz = (0.5 - n.astype(float)) * np.where(s_l == 0, 1.0, -1.0)

    defect_sites = set(geom.defect_sites())
    charge: dict[Site, int] = {}
    static: dict[Site, float] = {}
    for site in all_sites(geom):
        occupancy = int(sum(n[i] for i in geom.atoms_around(site)))
        charge[site] = _sign(site) * (1 - occupancy)
        static[site] = float(_sign(site)) if site in defect_sites else 0.5 * _sign(site)
    return GaugeConfig(geometry=geom, sz=sz, charge=charge, static_charge=static)


def decode(config: GaugeConfig) -> str:
    """Inverse of :func:`encode`: the bitstring implied by the link fields."""
    geom = config.geometry
    s_l = np.array([a.s_l for a in geom.atoms])
    n = 0.5 - config.sz * np.where(s_l == 0, 1.0, -1.0)
    occ = np.rint(n).astype(int)
    if not np.all((occ == 0) | (occ == 1)):
        raise ConfigError("link fields are not +-1/2")
    return "".join(str(b) for b in occ)


def gauss_residual(config: GaugeConfig) -> dict:
    """Per-site residual G_x - q_x from the stored fields.

    The divergence uses the stored S^z on present links plus the frozen
    ground-state value on absent slots; q_x is the staggered background.
    Consistent decodes give exactly zero everywhere; corrupting S^z on one
    link moves exactly its two endpoint residuals.
    """
    geom = config.geometry
    s_l = {a.key: a.s_l for a in geom.atoms}
    key_to_id = {a.key: a.id for a in geom.atoms}
    out: dict[Site, float] = {}
    for site in all_sites(geom):
        div = 0.0
        for slot in adjacent_links(site):
            if slot in key_to_id:
                term = (1.0 if s_l[slot] == 0 else -1.0) * float(config.sz[key_to_id[slot]])
            else:
                term = 0.5  # frozen |g>: (-1)^{s_l} S^z = 1/2
            div += term
        div *= _sign(site)
        out[site] = div - config.charge[site] - 0.5 * _sign(site)
    return out


def vacuum_bitstring(geom: Geometry) -> str:
    """Columnar covering: every present intra-cell atom excited.

    For a defect-free patch this is the LGT vacuum (S^z = -1/2 on all
    links); with two charges placed it is the fully broken string, with a
    screening charge next to each defect.
    """
    return "".join("1" if a.s_l == 0 else "0" for a in geom.atoms)


@dataclass(frozen=True)
class NamedConfig:
    """A labelled product configuration and the region that identifies it."""

    label: str
    bits: str
    region: tuple[int, ...]

    def region_pattern(self) -> str:
        return "".join(self.bits[i] for i in self.region)


def _site_neighbors(site: Site, geom: Geometry):
    """(neighbor site, link key) pairs in the ideal lattice, patch-clipped."""
    i, j, sub = site
    spec = geom.spec
    out = []
    for slot in adjacent_links(site):
        li, lj, kind = slot
        if not (0 <= li < spec.L0 and 0 <= lj < spec.L1):
            continue
        if kind == 1 and li >= spec.L0 - 1:
            continue
        if kind == 2 and lj >= spec.L1 - 1:
            continue
        if kind == 0:
            other = (li, lj, "B" if sub == "A" else "A")
        elif kind == 1:
            other = (li + 1, lj, "A") if sub == "B" else (li, lj, "B")
        else:
            other = (li, lj + 1, "A") if sub == "B" else (li, lj, "B")
        out.append((other, slot))
    return out


def minimal_string_paths(geom: Geometry) -> list[list[tuple[int, int, int]]]:
    """All shortest defect-to-defect link paths with present interior atoms."""
    if len(geom.defects) != 2:
        raise ConfigError(f"string enumeration needs exactly 2 defects, got {len(geom.defects)}")
    start, goal = geom.defects[0].site, geom.defects[1].site

    # BFS layering over ideal sites, then backtrack every shortest path.
    dist = {start: 0}
    frontier = [start]
    while frontier and goal not in dist:
        nxt = []
        for site in frontier:
            for other, _ in _site_neighbors(site, geom):
                if other not in dist:
                    dist[other] = dist[site] + 1
                    nxt.append(other)
        frontier = nxt
    if goal not in dist:
        raise ConfigError("defects are not connected on the lattice")

    paths: list[list[tuple[int, int, int]]] = []

    def backtrack(site, acc):
        if site == start:
            paths.append(list(reversed(acc)))
            return
        for other, link in _site_neighbors(site, geom):
            if dist.get(other) == dist[site] - 1:
                backtrack(other, acc + [link])

    backtrack(goal, [])

    valid = []
    for path in paths:
        interior = path[1:-1]
        if all(geom.has_atom(k) for k in interior):
            valid.append(path)
    if not valid:
        raise ConfigError("no minimal string path has all interior atoms present "
                          "(defects adjacent or geometry over-trimmed)")
    valid.sort()
    return valid


def string_region(geom: Geometry, paths=None) -> tuple[int, ...]:
    """Atoms supporting the minimal strings: the 2d-1 atoms between straight
    charges, or the union over all minimal paths for displaced ones."""
    if paths is None:
        paths = minimal_string_paths(geom)
    ids = []
    for path in paths:
        for key in path[1:-1]:
            atom_id = geom.atom_by_key(key).id
            if atom_id not in ids:
                ids.append(atom_id)
    return tuple(sorted(ids))


def _with_pattern(base: str, geom: Geometry, assignments: dict) -> str:
    out = list(base)
    for key, value in assignments.items():
        out[geom.atom_by_key(key).id] = value
    return "".join(out)


def enumerate_strings(geom: Geometry) -> list[NamedConfig]:
    """Named product configurations for a two-defect geometry.

    Returns the minimal strings (string_1..k), the broken string b, the
    charge-full configuration c, and for a single straight string also the
    two one-pair intermediates i and j of the breaking ladder.
    """
    paths = minimal_string_paths(geom)
    region = string_region(geom, paths)
    vac = vacuum_bitstring(geom)
    configs: list[NamedConfig] = []

    for k, path in enumerate(paths, start=1):
        interior = path[1:-1]
        assign = {key: ("0" if key[2] == 0 else "1") for key in interior}
        bits = _with_pattern(vac, geom, assign)
        if not is_blockade_valid(int(bits, 2), geom):
            raise ConfigError(f"string path {k} produced a blockade-violating bitstring")
        configs.append(NamedConfig(f"string_{k}", bits, region))

    configs.append(NamedConfig(BROKEN, vac, region))

    all_off = {geom.atoms[i].key: "0" for i in region}
    configs.append(NamedConfig(CHARGES, _with_pattern(vac, geom, all_off), region))

    if len(paths) == 1:
        interior = paths[0][1:-1]
        bridges = [key for key in interior if key[2] != 0]
        if len(bridges) > 1:  # d = 1 has no one-pair intermediates distinct from c
            string_bits = configs[0].bits
            first = _with_pattern(string_bits, geom, {bridges[0]: "0"})
            last = _with_pattern(string_bits, geom, {bridges[-1]: "0"})
            configs.append(NamedConfig(INTERMEDIATE_I, first, region))
            configs.append(NamedConfig(INTERMEDIATE_J, last, region))
    return configs


def configs_by_label(configs) -> dict:
    return {c.label: c for c in configs}


def quench_pattern(geom: Geometry, broken_bits: str | None = None) -> np.ndarray:
    """Local-detuning pattern c_l = 1 on the ground-state atoms of the
    broken string (the pattern used both for the quench and for assisted
    preparation of that state)."""
    if broken_bits is None:
        broken_bits = vacuum_bitstring(geom)
    bits = np.frombuffer(broken_bits.encode(), dtype=np.uint8) - ord("0")
    return 1.0 - bits.astype(float)


# -- confinement quantities --------------------------------------------------

def coupling_value(r_over_a: float, r_b: float, omega: float = 1.0,
                   cutoff_over_a: float = 3.0) -> float:
    """Truncated pair interaction V(r) = Omega R_b^6 / r^6 in units of a."""
    if cutoff_over_a is not None and r_over_a > cutoff_over_a * (1.0 + 1e-9):
        return 0.0
    return omega * r_b**6 / r_over_a**6


def string_tension(r_b: float, omega: float = 1.0, cutoff_over_a: float = 3.0) -> float:
    """Leading string tension sigma_0 = V(sqrt(3) a) - V(2 a)."""
    return (coupling_value(np.sqrt(3.0), r_b, omega, cutoff_over_a)
            - coupling_value(2.0, r_b, omega, cutoff_over_a))


def renormalized_mass(delta: float, r_b: float, omega: float = 1.0) -> float:
    """Pair mass 2m = delta - 6 (R_b/2)^6 Omega (delta plays the bare 2m_0)."""
    return delta - 6.0 * (r_b / 2.0) ** 6 * omega


def classical_crossing(d: int, delta: float, r_b: float, omega: float = 1.0,
                       cutoff_over_a: float = 3.0) -> float:
    """Local-detuning strength where string and broken-string levels cross:
    solves 2m = (sigma_0 + delta0*) d."""
    if d < 1:
        raise ConfigError(f"charge separation must be >= 1, got {d}")
    two_m = renormalized_mass(delta, r_b, omega)
    return two_m / d - string_tension(r_b, omega, cutoff_over_a)


def classical_crossing_diagonal(geom: Geometry, delta: float, r_b: float,
                                omega: float = 1.0, cutoff_over_a: float = 3.0,
                                label_a: str = "string_1", label_b: str = BROKEN) -> float:
    """Exact diagonal-level crossing of two named configurations.

    Both classical energies are linear in delta0 under the quench pattern;
    the crossing solves E_a(delta0) = E_b(delta0).
    """
    from .hamiltonian import HamiltonianParams, RydbergHamiltonian
    from .hilbert import BasisSpace
    from .geometry import interaction_graph

    configs = configs_by_label(enumerate_strings(geom))
    bits_a = configs[label_a].bits
    bits_b = configs[label_b].bits
    pattern = quench_pattern(geom)
    couplings = interaction_graph(geom, omega * (r_b * geom.a) ** 6,
                                  cutoff_over_a * geom.a)

    # Diagonal energies evaluated directly; no basis enumeration needed.
    def energy(bits, delta0):
        n = np.frombuffer(bits.encode(), dtype=np.uint8) - ord("0")
        e = sum(v for (i, j), v in couplings.items() if n[i] and n[j])
        e -= delta * float(n.sum())
        e += delta0 * float(pattern @ n)
        return e

    e_a0, e_b0 = energy(bits_a, 0.0), energy(bits_b, 0.0)
    slope_a = energy(bits_a, 1.0) - e_a0
    slope_b = energy(bits_b, 1.0) - e_b0
    if abs(slope_a - slope_b) < 1e-12:
        raise ConfigError(f"configurations {label_a} and {label_b} never cross in delta0")
    return (e_b0 - e_a0) / (slope_a - slope_b)
