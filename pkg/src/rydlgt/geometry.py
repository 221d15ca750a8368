"""Kagome-arranged atom arrays built from the links of a honeycomb patch.

The honeycomb patch has L0 x L1 two-site unit cells spanned by
u1 = (2, 0) * a and u2 = (1, sqrt(3)) * a, with sublattice-A vertices at the
cell origin and sublattice-B vertices at (1, 1/sqrt(3)) * a.  Atoms sit at the
midpoints of the three links a cell contributes:

    type 0  A(i,j)-B(i,j)      intra-cell,            s_l = 0
    type 1  B(i,j)-A(i+1,j)    bridge along axis 0,   s_l = 1
    type 2  B(i,j)-A(i,j+1)    bridge along axis 1,   s_l = 1

Only links whose two endpoints both lie inside the patch are kept, which
gives 3*L0*L1 - L0 - L1 atoms and a nearest-neighbour (Kagome) distance of
exactly ``a``.  Static charges are created by removing the three atoms around
a honeycomb vertex.
"""

from dataclasses import dataclass, field, replace
import itertools
import json
import math

import numpy as np

from .errors import CapacityError, ConfigError
from .units import FIELD_OF_VIEW_UM, MAX_ATOMS

SQRT3 = math.sqrt(3.0)

# Site keys are (i, j, "A"|"B"); sublattice parity s_x is 0 on A, 1 on B.
Site = tuple[int, int, str]

# Link positions within a cell, in units of a.
_LINK_OFFSETS = {
    0: (0.5, 0.5 / SQRT3),
    1: (1.5, 0.5 / SQRT3),
    2: (1.0, 2.0 / SQRT3),
}


def site_sign_exponent(site: Site) -> int:
    """Parity exponent s_x: 0 for sublattice A, 1 for B."""
    return 0 if site[2] == "A" else 1


def site_position(site: Site, a: float = 1.0) -> tuple[float, float]:
    """Cartesian position of a honeycomb vertex."""
    i, j, sub = site
    x = 2.0 * i + 1.0 * j
    y = SQRT3 * j
    if sub == "B":
        x += 1.0
        y += 1.0 / SQRT3
    return (x * a, y * a)


def adjacent_links(site: Site) -> list[tuple[int, int, int]]:
    """The three (i, j, type) link slots around a vertex in the ideal lattice."""
    i, j, sub = site
    if sub == "A":
        return [(i, j, 0), (i - 1, j, 1), (i, j - 1, 2)]
    return [(i, j, 0), (i, j, 1), (i, j, 2)]


def _link_endpoints(i: int, j: int, kind: int) -> tuple[Site, Site]:
    if kind == 0:
        return ((i, j, "A"), (i, j, "B"))
    if kind == 1:
        return ((i, j, "B"), (i + 1, j, "A"))
    return ((i, j, "B"), (i, j + 1, "A"))


@dataclass(frozen=True)
class LatticeSpec:
    """Size of the honeycomb patch; ``a`` is the Kagome lattice spacing."""

    L0: int
    L1: int
    a: float = 1.0

    def __post_init__(self):
        if self.L0 < 1 or self.L1 < 1:
            raise ConfigError(f"cell counts must be >= 1, got {self.L0}x{self.L1}")
        if not self.a > 0.0:
            raise ConfigError(f"lattice spacing must be positive, got {self.a}")

    @property
    def atom_count(self) -> int:
        return 3 * self.L0 * self.L1 - self.L0 - self.L1


@dataclass(frozen=True)
class LinkAtom:
    """One tweezer site: the midpoint of a honeycomb link.

    ``id`` is the dense index among *present* atoms; ``key`` = (i, j, type)
    is the stable lattice coordinate that survives defect placement.
    """

    id: int
    key: tuple[int, int, int]
    position: tuple[float, float]
    endpoints: tuple[Site, Site]
    s_l: int

    @property
    def is_intra_cell(self) -> bool:
        return self.s_l == 0


@dataclass(frozen=True)
class ChargeDefect:
    site: Site
    sign: int  # +1 on sublattice A, -1 on B

    def __post_init__(self):
        expected = 1 if self.site[2] == "A" else -1
        if self.sign != expected:
            raise ConfigError(f"defect sign {self.sign} inconsistent with sublattice {self.site[2]}")


class Geometry:
    """Immutable atom array: present atoms, defects, vertex adjacency."""

    def __init__(self, spec: LatticeSpec, atoms: list[LinkAtom], defects: list[ChargeDefect] = (),
                 removed_keys: frozenset = frozenset()):
        self.spec = spec
        self.atoms = tuple(atoms)
        self.defects = tuple(defects)
        self.removed_keys = frozenset(removed_keys)
        self._key_to_atom = {atom.key: atom for atom in self.atoms}
        # vertex -> ids of adjacent present atoms
        adjacency: dict[Site, list[int]] = {}
        for atom in self.atoms:
            for site in atom.endpoints:
                adjacency.setdefault(site, []).append(atom.id)
        self._vertex_atoms = adjacency
        self.positions = np.array([atom.position for atom in self.atoms], dtype=float)

    @property
    def n_atoms(self) -> int:
        return len(self.atoms)

    @property
    def a(self) -> float:
        return self.spec.a

    def atom_by_key(self, key: tuple[int, int, int]) -> LinkAtom:
        return self._key_to_atom[key]

    def has_atom(self, key: tuple[int, int, int]) -> bool:
        return key in self._key_to_atom

    def vertices(self) -> list[Site]:
        """All honeycomb vertices touched by at least one present atom."""
        return sorted(self._vertex_atoms)

    def atoms_around(self, site: Site) -> list[int]:
        """Ids of present atoms adjacent to a vertex (possibly empty)."""
        return list(self._vertex_atoms.get(site, []))

    def defect_sites(self) -> list[Site]:
        return [d.site for d in self.defects]

    def distance(self, id_a: int, id_b: int) -> float:
        return float(np.hypot(*(self.positions[id_a] - self.positions[id_b])))

    def pair_distances(self, cutoff: float | None = None) -> dict[tuple[int, int], float]:
        """Unordered present-atom pairs with separation <= cutoff (default 3a)."""
        if cutoff is None:
            cutoff = 3.0 * self.a
        diffs = self.positions[:, None, :] - self.positions[None, :, :]
        dists = np.hypot(diffs[..., 0], diffs[..., 1])
        out: dict[tuple[int, int], float] = {}
        n = self.n_atoms
        limit = cutoff * (1.0 + 1e-9)
        for i in range(n):
            for j in range(i + 1, n):
                if dists[i, j] <= limit:
                    out[(i, j)] = float(dists[i, j])
        return out

    def without_atoms(self, ids) -> "Geometry":
        """New geometry with the given atoms removed; survivor order preserved."""
        drop = set(ids)
        removed = {self.atoms[i].key for i in drop}
        survivors = [a for a in self.atoms if a.id not in drop]
        reindexed = [replace(a, id=k) for k, a in enumerate(survivors)]
        return Geometry(self.spec, reindexed, self.defects, self.removed_keys | removed)

    # -- serialization ------------------------------------------------------

    def to_json(self) -> str:
        doc = {
            "spec": {"L0": self.spec.L0, "L1": self.spec.L1, "a": self.spec.a},
            "defects": [{"site": list(d.site), "sign": d.sign} for d in self.defects],
            "removed_keys": sorted(list(k) for k in self.removed_keys),
            "atoms": [
                {
                    "id": a.id,
                    "key": list(a.key),
                    "x": a.position[0],
                    "y": a.position[1],
                    "s_l": a.s_l,
                    "endpoints": [list(e) for e in a.endpoints],
                }
                for a in self.atoms
            ],
        }
        return json.dumps(doc, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "Geometry":
        doc = json.loads(text)
        spec = LatticeSpec(**doc["spec"])
        atoms = [
            LinkAtom(
                id=a["id"],
                key=tuple(a["key"]),
                position=(a["x"], a["y"]),
                endpoints=tuple(tuple(e) for e in a["endpoints"]),
                s_l=a["s_l"],
            )
            for a in doc["atoms"]
        ]
        defects = [ChargeDefect(site=tuple(d["site"]), sign=d["sign"]) for d in doc["defects"]]
        removed = frozenset(tuple(k) for k in doc.get("removed_keys", []))
        return cls(spec, atoms, defects, removed)


def build_lattice(spec: LatticeSpec) -> Geometry:
    """Place atoms on all fully interior links of the honeycomb patch.

    Atom ids run row-major over cells (j outer, i inner) and link type
    0, 1, 2 within a cell, so files written for the same spec always agree.
    """
    atoms: list[LinkAtom] = []
    a = spec.a
    for j in range(spec.L1):
        for i in range(spec.L0):
            for kind in range(3):
                if kind == 1 and i == spec.L0 - 1:
                    continue
                if kind == 2 and j == spec.L1 - 1:
                    continue
                dx, dy = _LINK_OFFSETS[kind]
                pos = ((2.0 * i + j + dx) * a, (SQRT3 * j + dy) * a)
                atoms.append(
                    LinkAtom(
                        id=len(atoms),
                        key=(i, j, kind),
                        position=pos,
                        endpoints=_link_endpoints(i, j, kind),
                        s_l=0 if kind == 0 else 1,
                    )
                )
    assert len(atoms) == spec.atom_count
    return Geometry(spec, atoms)


def place_charges(geom: Geometry, sites: list[Site]) -> Geometry:
    """Create one static charge per site by removing its 3 adjacent atoms.

    Sites must be interior (all three adjacent atoms present) and no two
    defects may share an atom.
    """
    taken: set[int] = set()
    defects = list(geom.defects)
    for site in sites:
        ids = geom.atoms_around(site)
        if len(ids) != 3:
            raise ConfigError(
                f"defect site {site} is not interior: {len(ids)} adjacent atoms present"
            )
        overlap = taken.intersection(ids)
        if overlap:
            raise ConfigError(f"defect site {site} shares atoms {sorted(overlap)} with another defect")
        taken.update(ids)
        defects.append(ChargeDefect(site=site, sign=1 if site[2] == "A" else -1))
    out = geom.without_atoms(taken)
    return Geometry(out.spec, out.atoms, defects, out.removed_keys)


def straight_string_geometry(L0: int, L1: int, d: int, a: float = 1.0,
                             origin: tuple[int, int] | None = None) -> Geometry:
    """Patch with two charges separated by ``d`` cells along axis 0.

    The defects sit at A(i0, j0) and B(i0 + d, j0); by default they are
    centred in the patch.  The 2d-1 atoms strictly between them carry the
    minimal string.
    """
    if d < 1:
        raise ConfigError(f"charge separation must be >= 1, got {d}")
    if origin is None:
        i0 = (L0 - 1 - d) // 2
        j0 = (L1 - 1) // 2
    else:
        i0, j0 = origin
    geom = build_lattice(LatticeSpec(L0, L1, a))
    return place_charges(geom, [(i0, j0, "A"), (i0 + d, j0, "B")])


def diagonal_string_geometry(L0: int, L1: int, d0: int, d1: int, a: float = 1.0,
                             origin: tuple[int, int] | None = None) -> Geometry:
    """Patch with two charges displaced by (d0, d1) cells, at A and B vertices."""
    if d0 < 0 or d1 < 0 or d0 + d1 < 1:
        raise ConfigError(f"invalid charge displacement ({d0}, {d1})")
    if origin is None:
        i0 = (L0 - 1 - d0) // 2
        j0 = (L1 - 1 - d1) // 2
    else:
        i0, j0 = origin
    geom = build_lattice(LatticeSpec(L0, L1, a))
    return place_charges(geom, [(i0, j0, "A"), (i0 + d0, j0 + d1, "B")])


def trim_to_band(geom: Geometry, half_width: float) -> Geometry:
    """Keep only atoms within a band around the axis through the two defects.

    Shrinks a defect geometry to a desk-scale strip while preserving the
    local blockade structure along the string (and, for symmetric patches,
    the mirror symmetry across the axis).
    """
    if len(geom.defects) != 2:
        raise ConfigError(f"band trim needs exactly 2 defects, got {len(geom.defects)}")
    p0 = np.array(site_position(geom.defects[0].site, geom.a))
    p1 = np.array(site_position(geom.defects[1].site, geom.a))
    axis = p1 - p0
    axis = axis / np.hypot(*axis)
    normal = np.array([-axis[1], axis[0]])
    drop = [a.id for a in geom.atoms
            if abs(float((np.array(a.position) - p0) @ normal)) > half_width * (1.0 + 1e-9)]
    return geom.without_atoms(drop)


def interaction_graph(geom: Geometry, c6: float, cutoff: float | None = None) -> dict[tuple[int, int], float]:
    """Van der Waals couplings V = C6 / r^6 for all pairs within the cutoff.

    The default cutoff is 3a (fifth neighbours); pass ``cutoff=None`` via
    :func:`all_pairs_cutoff` semantics by giving a large value explicitly.
    """
    if c6 <= 0.0:
        raise ConfigError(f"C6 must be positive, got {c6}")
    if cutoff is not None and cutoff <= 0.0:
        raise ConfigError(f"cutoff must be positive, got {cutoff}")
    return {pair: c6 / r**6 for pair, r in geom.pair_distances(cutoff).items()}


def couplings_from_positions(positions: np.ndarray, c6: float,
                             cutoff: float | None = None) -> dict[tuple[int, int], float]:
    """Same as :func:`interaction_graph` but for an explicit position array."""
    positions = np.asarray(positions, dtype=float)
    n = len(positions)
    out: dict[tuple[int, int], float] = {}
    limit = None if cutoff is None else cutoff * (1.0 + 1e-9)
    for i in range(n):
        for j in range(i + 1, n):
            r = float(np.hypot(*(positions[i] - positions[j])))
            if limit is None or r <= limit:
                out[(i, j)] = c6 / r**6
    return out


def validate_hardware_envelope(geom: Geometry, a_um: float | None = None) -> dict:
    """Advisory check against the machine limits (256 atoms, 75x128 um).

    Either the geometry carries a physical spacing already, or ``a_um``
    rescales the reduced-unit positions.  The bounding box may be laid out in
    either orientation of the field of view.
    """
    scale = a_um if a_um is not None else geom.a
    if geom.n_atoms:
        span = geom.positions.max(axis=0) - geom.positions.min(axis=0)
        width, height = float(span[0]) * scale / geom.a, float(span[1]) * scale / geom.a
    else:
        width = height = 0.0
    fov_w, fov_h = FIELD_OF_VIEW_UM
    fits = (width <= fov_w and height <= fov_h) or (width <= fov_h and height <= fov_w)
    count_ok = geom.n_atoms <= MAX_ATOMS
    return {
        "atom_count": geom.n_atoms,
        "count_ok": count_ok,
        "bounding_box_um": (width, height),
        "box_ok": fits,
        "ok": count_ok and fits,
    }
