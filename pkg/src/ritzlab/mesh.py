"""Voxel domains, Kuhn tetrahedral meshes, dihedral audits and box extensions.

Domains are finite unions of axis-aligned cells. Every cell is cut into
``n**3`` sub-cubes and every sub-cube into the six Kuhn path tetrahedra that
share the diagonal from its lowest to its highest corner. Since all sub-cubes
use the same diagonal direction the mesh is conforming across cell faces, and
every element is congruent to the path simplex (0,0,0),(1,0,0),(1,1,0),(1,1,1),
whose dihedral angles are at most pi/2.
"""
from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from pathlib import Path

import numpy as np

# local edges (i, j) of a tetrahedron; the dihedral angle at edge (i, j) is the
# angle between the faces opposite the two remaining vertices
LOCAL_EDGES = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))
# local face k is the triangle opposite vertex k
LOCAL_FACES = ((1, 2, 3), (0, 2, 3), (0, 1, 3), (0, 1, 2))

DEFAULT_AUDIT_TOL = 1e-9


class MeshError(ValueError):
    """Raised for invalid domains, malformed mesh files or broken meshes."""


# --------------------------------------------------------------------------
# Domains
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class DomainSpec:
    """A union of axis-aligned cells ``[c, c+1]**3 * scale``.

    Parameters
    ----------
    cells : frozenset of (int, int, int)
        Integer coordinates of the lowest corner of each occupied cell.
    name : str
        Label used in reports.
    scale : float
        Physical edge length of one cell.
    """

    cells: frozenset
    name: str = "custom"
    scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(
            self, "cells", frozenset(tuple(int(v) for v in c) for c in self.cells)
        )

    @property
    def cell_array(self) -> np.ndarray:
        return np.array(sorted(self.cells), dtype=np.int64).reshape(-1, 3)

    @property
    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Integer bounding box ``(lo, hi)`` in cell units."""
        c = self.cell_array
        return c.min(axis=0), c.max(axis=0) + 1

    def box(self, margin: int = 1) -> "DomainSpec":
        """The bounding box of the domain inflated by ``margin`` cells per side."""
        lo, hi = self.bounds
        lo, hi = lo - margin, hi + margin
        cells = itertools.product(*(range(a, b) for a, b in zip(lo, hi)))
        return DomainSpec(frozenset(cells), f"{self.name}-box{margin}", self.scale)

    def validate(self) -> None:
        """Reject empty, disconnected or non-well-composed cell sets."""
        if not self.cells:
            raise MeshError(f"domain {self.name!r} has no cells")
        if not _face_connected(self.cells):
            raise MeshError(f"domain {self.name!r} is not face-connected")
        bad = _critical_configurations(self.cells)
        if bad:
            raise MeshError(
                f"domain {self.name!r} is not a Lipschitz polyhedron: "
                f"{len(bad)} pinched edge/vertex configurations, first at {bad[0]}"
            )

    def distance(self, x: np.ndarray) -> np.ndarray:
        """Euclidean distance from points ``x`` (shape (N, 3)) to the closed domain.

        Zero exactly for points of the closed domain.
        """
        x = np.asarray(x, dtype=float)
        best = np.full(x.shape[0], np.inf)
        for lo, hi in _merge_cells(self.cells):
            lo = np.asarray(lo, dtype=float) * self.scale
            hi = np.asarray(hi, dtype=float) * self.scale
            d = np.maximum(np.maximum(lo - x, x - hi), 0.0)
            np.minimum(best, np.sqrt(np.einsum("ij,ij->i", d, d)), out=best)
        return best

    def contains(self, x: np.ndarray) -> np.ndarray:
        return self.distance(x) == 0.0

    def corners(self) -> np.ndarray:
        """Physical coordinates of all cell corners."""
        c = self.cell_array
        off = np.array(list(itertools.product((0, 1), repeat=3)))
        pts = np.unique((c[:, None, :] + off[None]).reshape(-1, 3), axis=0)
        return pts * self.scale


def preset(name: str, scale: float = 1.0) -> DomainSpec:
    """Named domains: ``cube``, ``fichera`` and ``lprism``."""
    if name == "cube":
        cells = {(0, 0, 0)}
    elif name == "fichera":
        cells = set(itertools.product((0, 1), repeat=3)) - {(1, 1, 1)}
    elif name == "lprism":
        cells = {(0, 0, 0), (1, 0, 0), (0, 1, 0)}
    else:
        raise MeshError(f"unknown domain preset {name!r}; choose from {PRESETS}")
    return DomainSpec(frozenset(cells), name, scale)


PRESETS = ("cube", "fichera", "lprism")


def _face_connected(cells) -> bool:
    cells = set(cells)
    start = next(iter(cells))
    seen = {start}
    queue = deque([start])
    steps = [s for a in range(3) for s in ((0,) * a + (d,) + (0,) * (2 - a) for d in (-1, 1))]
    while queue:
        c = queue.popleft()
        for s in steps:
            nb = (c[0] + s[0], c[1] + s[1], c[2] + s[2])
            if nb in cells and nb not in seen:
                seen.add(nb)
                queue.append(nb)
    return len(seen) == len(cells)


def _critical_configurations(cells) -> list:
    """Edge and vertex neighbourhoods whose boundary is not a 2-manifold.

    An edge is pinched when exactly two diagonally opposite cells of its four
    neighbours are occupied (or empty). A vertex is pinched when exactly two
    antipodal cells of its eight neighbours are occupied (or empty).
    """
    cells = set(cells)
    lo = np.min(list(cells), axis=0) - 1
    hi = np.max(list(cells), axis=0) + 1
    bad = []
    # vertex v is the corner shared by cells v - {0,1}^3
    for v in itertools.product(*(range(a, b + 1) for a, b in zip(lo, hi))):
        occ = {d: (v[0] - d[0], v[1] - d[1], v[2] - d[2]) in cells
               for d in itertools.product((0, 1), repeat=3)}
        for value in (True, False):
            hit = [d for d, o in occ.items() if o == value]
            if len(hit) == 2 and all(a != b for a, b in zip(*hit)):
                bad.append(("vertex", v))
        # edges along each axis starting at v
        for axis in range(3):
            others = [a for a in range(3) if a != axis]
            quad = {}
            for d in itertools.product((0, 1), repeat=2):
                c = list(v)
                c[others[0]] -= d[0]
                c[others[1]] -= d[1]
                quad[d] = tuple(c) in cells
            for value in (True, False):
                hit = [d for d, o in quad.items() if o == value]
                if len(hit) == 2 and hit[0][0] != hit[1][0] and hit[0][1] != hit[1][1]:
                    bad.append(("edge", v, axis))
    return bad


@lru_cache(maxsize=32)
def _merge_cells(cells: frozenset) -> tuple:
    """Greedy cover of the cell set by disjoint boxes (cell units)."""
    remaining = set(cells)
    boxes = []
    for c in sorted(cells):
        if c not in remaining:
            continue
        lo = list(c)
        hi = [c[0] + 1, c[1] + 1, c[2] + 1]
        for axis in range(3):
            while True:
                slab = list(itertools.product(*(
                    range(hi[a], hi[a] + 1) if a == axis else range(lo[a], hi[a])
                    for a in range(3))))
                if all(s in remaining for s in slab):
                    hi[axis] += 1
                else:
                    break
        for s in itertools.product(*(range(lo[a], hi[a]) for a in range(3))):
            remaining.discard(s)
        boxes.append((tuple(lo), tuple(hi)))
    return tuple(boxes)


# --------------------------------------------------------------------------
# Meshes
# --------------------------------------------------------------------------


@dataclass(eq=False)
class TetMesh:
    """Conforming tetrahedral mesh.

    ``vertices`` is (V, 3) float, ``tets`` is (E, 4) int with positive signed
    volumes. Generated meshes additionally carry their integer ``lattice``
    coordinates (vertex = lattice * scale / n) and the ``spec`` they mesh.
    Arrays are made read-only; derived data is cached.
    """

    vertices: np.ndarray
    tets: np.ndarray
    grid_spacing: float
    lattice: np.ndarray | None = None
    spec: DomainSpec | None = None
    n: int | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=float)
        self.tets = np.ascontiguousarray(self.tets, dtype=np.int64)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise MeshError("vertices must have shape (V, 3)")
        if self.tets.ndim != 2 or self.tets.shape[1] != 4:
            raise MeshError("tets must have shape (E, 4)")
        if self.tets.size and (self.tets.min() < 0 or self.tets.max() >= len(self.vertices)):
            raise MeshError("tet vertex index out of range")
        for a in (self.vertices, self.tets, self.lattice):
            if a is not None:
                a.flags.writeable = False

    @property
    def num_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def num_tets(self) -> int:
        return self.tets.shape[0]

    @cached_property
    def signed_volumes(self) -> np.ndarray:
        p = self.vertices[self.tets]
        d = p[:, 1:] - p[:, :1]
        return np.linalg.det(d) / 6.0

    @cached_property
    def _face_table(self):
        # unique faces, (E, 4) map to unique face ids, and incidence counts
        nv = self.num_vertices
        f = np.sort(self.tets[:, LOCAL_FACES], axis=2).reshape(-1, 3)
        keys = (f[:, 0] * nv + f[:, 1]) * nv + f[:, 2]
        uniq, first, inverse, counts = np.unique(
            keys, return_index=True, return_inverse=True, return_counts=True)
        faces = f[first]
        return faces, inverse.reshape(-1, 4), counts

    @property
    def faces(self) -> np.ndarray:
        """Unique triangular faces (F, 3), vertex ids ascending."""
        return self._face_table[0]

    @property
    def tet_faces(self) -> np.ndarray:
        """(E, 4) ids into :attr:`faces`; column k is the face opposite vertex k."""
        return self._face_table[1]

    @property
    def face_counts(self) -> np.ndarray:
        return self._face_table[2]

    @cached_property
    def boundary_faces(self) -> np.ndarray:
        """(tet, local face) pairs of faces with a single incident tet."""
        on_bdy = self.face_counts[self.tet_faces] == 1
        t, k = np.nonzero(on_bdy)
        return np.column_stack([t, k])

    @cached_property
    def boundary_triangles(self) -> np.ndarray:
        """Vertex triples (B, 3) of the boundary faces."""
        return self.faces[self.face_counts == 1]

    @cached_property
    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.num_vertices, dtype=bool)
        mask[self.boundary_triangles.ravel()] = True
        mask.flags.writeable = False
        return mask

    @property
    def boundary_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.boundary_mask)

    @property
    def interior_nodes(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary_mask)

    @property
    def node_class(self) -> np.ndarray:
        """Per-vertex label, ``"boundary"`` or ``"interior"``."""
        return np.where(self.boundary_mask, "boundary", "interior")

    @cached_property
    def edges(self) -> np.ndarray:
        nv = self.num_vertices
        e = np.sort(self.tets[:, LOCAL_EDGES], axis=2).reshape(-1, 2)
        return np.column_stack(np.divmod(np.unique(e[:, 0] * nv + e[:, 1]), nv))

    @cached_property
    def diameters(self) -> np.ndarray:
        p = self.vertices[self.tets]
        lengths = [np.linalg.norm(p[:, i] - p[:, j], axis=1) for i, j in LOCAL_EDGES]
        return np.max(lengths, axis=0)

    def check(self) -> None:
        """Raise :class:`MeshError` unless volumes are positive and faces conform."""
        if np.any(self.signed_volumes <= 0):
            bad = np.flatnonzero(self.signed_volumes <= 0)
            raise MeshError(f"{bad.size} tets with non-positive volume, first {bad[0]}")
        if np.any(self.face_counts > 2):
            raise MeshError("non-conforming mesh: a face is shared by more than two tets")


def _kuhn_templates() -> np.ndarray:
    # local corner id = dx + 2 dy + 4 dz; the six monotone paths from 0 to 7
    unit = (1, 2, 4)
    corner = np.array(list(itertools.product((0, 1), repeat=3)))[:, ::-1]
    out = []
    for perm in itertools.permutations(range(3)):
        a = unit[perm[0]]
        b = a + unit[perm[1]]
        t = [0, a, b, 7]
        d = corner[t[1:]] - corner[t[0]]
        if np.linalg.det(d) < 0:
            t[2], t[3] = t[3], t[2]
        out.append(t)
    return np.array(out, dtype=np.int64)


KUHN_TEMPLATES = _kuhn_templates()


def _lattice_keys(ijk: np.ndarray, lo: np.ndarray, shape: np.ndarray) -> np.ndarray:
    r = ijk - lo
    return (r[..., 0] * shape[1] + r[..., 1]) * shape[2] + r[..., 2]


def _subcube_origins(spec: DomainSpec, n: int) -> np.ndarray:
    cells = spec.cell_array
    off = np.array(list(itertools.product(range(n), repeat=3)), dtype=np.int64)
    return (cells[:, None, :] * n + off[None]).reshape(-1, 3)


@lru_cache(maxsize=16)
def generate(spec: DomainSpec, n: int) -> TetMesh:
    """Kuhn mesh of ``spec`` with ``n`` subdivisions per cell edge.

    Produces ``6 * n**3 * len(cells)`` congruent tets of spacing
    ``s = scale / n``. Results are cached; meshes are read-only.
    """
    if n < 1:
        raise MeshError("n must be >= 1")
    spec.validate()
    origins = _subcube_origins(spec, n)
    corner = np.array(list(itertools.product((0, 1), repeat=3)), dtype=np.int64)[:, ::-1]
    corners = origins[:, None, :] + corner[None]  # (S, 8, 3), local id dx + 2dy + 4dz
    lo = corners.reshape(-1, 3).min(axis=0)
    shape = corners.reshape(-1, 3).max(axis=0) - lo + 1
    keys = _lattice_keys(corners, lo, shape).ravel()
    uniq, inverse = np.unique(keys, return_inverse=True)
    corner_ids = inverse.reshape(-1, 8)
    tets = corner_ids[:, KUHN_TEMPLATES].reshape(-1, 4)
    lattice = np.column_stack(np.unravel_index(uniq, shape)) + lo
    vertices = (lattice * spec.scale) / n
    return TetMesh(vertices, tets, spec.scale / n, lattice=lattice, spec=spec, n=n)


_PERM_CODE = np.full(27, -1, dtype=np.int64)
for _i, _p in enumerate(itertools.permutations(range(3))):
    _PERM_CODE[_p[0] * 9 + _p[1] * 3 + _p[2]] = _i


def locate(mesh: TetMesh, x: np.ndarray) -> np.ndarray:
    """Ids of the tets of a generated mesh that contain points ``x`` (N, 3).

    Inside a sub-cube with local coordinates ``t`` the Kuhn tet is the one whose
    path visits the axes in decreasing order of ``t``. Points on shared faces
    get one of the incident tets.
    """
    if mesh.lattice is None:
        raise MeshError("point location needs a generated (voxel) mesh")
    if "subcube_keys" not in mesh._cache:
        origins = _subcube_origins(mesh.spec, mesh.n)
        lo = origins.min(axis=0)
        shape = origins.max(axis=0) - lo + 1
        keys = _lattice_keys(origins, lo, shape)
        order = np.argsort(keys, kind="stable")
        mesh._cache["subcube_keys"] = (lo, shape, keys[order], order)
    lo, shape, sorted_keys, order = mesh._cache["subcube_keys"]
    t = np.asarray(x, dtype=float) * mesh.n / mesh.spec.scale
    sub = np.clip(np.floor(t).astype(np.int64), lo, lo + shape - 1)
    local = t - sub

    def lookup(sub):
        keys = _lattice_keys(sub, lo, shape)
        pos = np.clip(np.searchsorted(sorted_keys, keys), 0, len(sorted_keys) - 1)
        inside = np.all((sub >= lo) & (sub < lo + shape), axis=1)
        return pos, inside & (sorted_keys[pos] == keys)

    pos, found = lookup(sub)
    # points on a grid plane may belong to the sub-cube below it
    for shift in itertools.product((0, 1), repeat=3):
        miss = np.flatnonzero(~found)
        if miss.size == 0:
            break
        d = np.array(shift)
        if not d.any():
            continue
        ok = np.all((d == 0) | (np.abs(local[miss]) <= 1e-12), axis=1)
        cand = miss[ok]
        p2, f2 = lookup(sub[cand] - d)
        hit = cand[f2]
        pos[hit] = p2[f2]
        found[hit] = True
        sub[hit] -= d
        local[hit] += d
    if not found.all() or np.any((local < -1e-12) | (local > 1 + 1e-12)):
        raise MeshError("point outside the mesh")
    axis_order = np.argsort(-local, axis=1, kind="stable")
    perm = _PERM_CODE[axis_order[:, 0] * 9 + axis_order[:, 1] * 3 + axis_order[:, 2]]
    return order[pos] * 6 + perm


# --------------------------------------------------------------------------
# Geometry and audits
# --------------------------------------------------------------------------


def metrics(mesh: TetMesh) -> tuple[float, float, float]:
    """``(h_max, h_min, h_max / h_min)`` with h the longest edge of each tet."""
    d = mesh.diameters
    return float(d.max()), float(d.min()), float(d.max() / d.min())


def dihedral_angles(points: np.ndarray) -> np.ndarray:
    """Interior dihedral angles (E, 6) of tets ``points`` (E, 4, 3).

    Column order follows :data:`LOCAL_EDGES`. Uses the outward face normals
    ``n_k`` of the faces opposite the two vertices not on the edge:
    ``angle = arccos(-n_k . n_l)``.
    """
    points = np.asarray(points, dtype=float)
    normals = np.empty(points.shape[:1] + (4, 3))
    for k, (a, b, c) in enumerate(LOCAL_FACES):
        nrm = np.cross(points[:, b] - points[:, a], points[:, c] - points[:, a])
        # orient away from the opposite vertex
        s = np.einsum("ij,ij->i", nrm, points[:, a] - points[:, k])
        nrm *= np.where(s < 0, -1.0, 1.0)[:, None]
        normals[:, k] = nrm / np.linalg.norm(nrm, axis=1, keepdims=True)
    out = np.empty(points.shape[:1] + (6,))
    for e, (i, j) in enumerate(LOCAL_EDGES):
        k, l = sorted(set(range(4)) - {i, j})
        cos = -np.einsum("ij,ij->i", normals[:, k], normals[:, l])
        out[:, e] = np.arccos(np.clip(cos, -1.0, 1.0))
    return out


@dataclass
class DihedralReport:
    """Result of :func:`audit_non_obtuse`.

    ``violations`` holds ``(element, local_edge, angle)``; degenerate tets
    appear once with ``local_edge = -1`` and ``angle = nan``.
    """

    angles: np.ndarray
    per_element_max: np.ndarray
    global_max: float
    violations: list
    tol: float

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "pass": self.passed,
            "num_elements": int(self.angles.shape[0]),
            "global_max": self.global_max,
            "tol": self.tol,
            "num_violations": len(self.violations),
            "violations": [
                {"element": int(t), "edge": int(e), "angle": None if np.isnan(a) else float(a)}
                for t, e, a in self.violations[:100]
            ],
        }


def audit_non_obtuse(mesh: TetMesh, tol: float = DEFAULT_AUDIT_TOL) -> DihedralReport:
    """Check that every dihedral angle of every tet is at most ``pi/2 + tol``."""
    vol = np.abs(mesh.signed_volumes)
    degenerate = vol <= 1e-14 * mesh.grid_spacing**3
    angles = np.full((mesh.num_tets, 6), np.nan)
    good = ~degenerate
    if good.any():
        angles[good] = dihedral_angles(mesh.vertices[mesh.tets[good]])
    per_elem = np.max(angles, axis=1)
    limit = np.pi / 2 + tol
    violations = [(int(t), -1, float("nan")) for t in np.flatnonzero(degenerate)]
    t, e = np.nonzero(angles > limit)
    violations += [(int(a), int(b), float(angles[a, b])) for a, b in zip(t, e)]
    violations.sort(key=lambda v: (v[0], v[1]))
    gmax = float(np.nanmax(per_elem)) if good.any() else float("nan")
    return DihedralReport(angles, per_elem, gmax, violations, tol)


# --------------------------------------------------------------------------
# Extension to a convex box
# --------------------------------------------------------------------------


@dataclass(eq=False)
class ExtendedMesh:
    """Kuhn mesh of a box that contains the Omega mesh as a submesh.

    ``node_map[i]`` is the outer vertex id of Omega vertex ``i`` and
    ``elem_map[t]`` the outer tet id of Omega tet ``t``.
    """

    inner: TetMesh
    outer: TetMesh
    node_map: np.ndarray
    elem_map: np.ndarray
    margin: int

    @property
    def omega_boundary_nodes(self) -> np.ndarray:
        return self.node_map[self.inner.boundary_nodes]

    @cached_property
    def inner_mask(self) -> np.ndarray:
        """Outer-vertex mask of vertices that belong to the Omega mesh."""
        m = np.zeros(self.outer.num_vertices, dtype=bool)
        m[self.node_map] = True
        return m


def extend_to_box(mesh: TetMesh, spec: DomainSpec | None = None, margin: int = 1) -> ExtendedMesh:
    """Embed a generated mesh into the Kuhn mesh of its ``margin``-inflated box."""
    if margin < 1:
        raise MeshError("margin must be >= 1 cell")
    spec = spec if spec is not None else mesh.spec
    if mesh.lattice is None or spec is None or mesh.n is None:
        raise MeshError("box extension needs a generated (voxel) mesh")
    if spec != mesh.spec:
        raise MeshError("spec does not match the mesh")
    n = mesh.n
    outer = generate(spec.box(margin), n)
    lo = outer.lattice.min(axis=0)
    shape = outer.lattice.max(axis=0) - lo + 1
    outer_keys = _lattice_keys(outer.lattice, lo, shape)  # ascending by construction
    node_map = np.searchsorted(outer_keys, _lattice_keys(mesh.lattice, lo, shape))

    sub_lo = lo
    sub_shape = shape - 1
    outer_sub = _lattice_keys(_subcube_origins(outer.spec, n), sub_lo, sub_shape)
    order = np.argsort(outer_sub, kind="stable")
    inner_sub = _lattice_keys(_subcube_origins(spec, n), sub_lo, sub_shape)
    pos = order[np.searchsorted(outer_sub[order], inner_sub)]
    elem_map = (pos[:, None] * 6 + np.arange(6)[None]).ravel()
    if not np.array_equal(outer.tets[elem_map], node_map[mesh.tets]):
        raise MeshError("extension does not reproduce the inner mesh")
    return ExtendedMesh(mesh, outer, node_map, elem_map, margin)


# --------------------------------------------------------------------------
# File formats
# --------------------------------------------------------------------------


def write_mesh(mesh: TetMesh, path) -> None:
    """Plain text: ``V E``, then V lines ``x y z``, then E lines of 0-based ids."""
    with open(path, "w") as fh:
        fh.write(f"{mesh.num_vertices} {mesh.num_tets}\n")
        for x, y, z in mesh.vertices:
            fh.write(f"{x:.17g} {y:.17g} {z:.17g}\n")
        for t in mesh.tets:
            fh.write(f"{t[0]} {t[1]} {t[2]} {t[3]}\n")


def read_mesh(path) -> TetMesh:
    """Read the text format of :func:`write_mesh`.

    Negatively oriented tets are flipped. The grid spacing of a file mesh is
    taken as the mean element diameter divided by sqrt(3).
    """
    path = Path(path)
    try:
        tokens = path.read_text().split()
    except OSError as exc:
        raise MeshError(f"cannot read mesh file {path}: {exc}") from exc
    try:
        nv, ne = int(tokens[0]), int(tokens[1])
        body = tokens[2:]
        if len(body) != 3 * nv + 4 * ne:
            raise MeshError(f"{path}: expected {3 * nv + 4 * ne} values, found {len(body)}")
        verts = np.array(body[: 3 * nv], dtype=float).reshape(nv, 3)
        tets = np.array(body[3 * nv:], dtype=np.int64).reshape(ne, 4)
    except (IndexError, ValueError) as exc:
        raise MeshError(f"{path}: malformed mesh file ({exc})") from exc
    if tets.size and (tets.min() < 0 or tets.max() >= nv):
        raise MeshError(f"{path}: vertex index out of range 0..{nv - 1}")
    p = verts[tets]
    vol = np.linalg.det(p[:, 1:] - p[:, :1])
    tets = tets.copy()
    neg = vol < 0
    tets[neg, 2], tets[neg, 3] = tets[neg, 3], tets[neg, 2].copy()
    probe = TetMesh(verts, tets, 1.0)
    s = float(probe.diameters.mean() / np.sqrt(3.0)) if ne else 1.0
    return TetMesh(verts, tets, s)


def write_vtk(mesh: TetMesh, path, point_data: dict | None = None) -> None:
    """Legacy ASCII VTK unstructured grid (cell type 10) with optional point data."""
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\nritzlab mesh\nASCII\nDATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {mesh.num_vertices} double\n")
        for x, y, z in mesh.vertices:
            fh.write(f"{x:.17g} {y:.17g} {z:.17g}\n")
        fh.write(f"CELLS {mesh.num_tets} {5 * mesh.num_tets}\n")
        for t in mesh.tets:
            fh.write(f"4 {t[0]} {t[1]} {t[2]} {t[3]}\n")
        fh.write(f"CELL_TYPES {mesh.num_tets}\n")
        fh.write("10\n" * mesh.num_tets)
        if point_data:
            fh.write(f"POINT_DATA {mesh.num_vertices}\n")
            for name, values in point_data.items():
                values = np.asarray(values, dtype=float)
                fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
                fh.writelines(f"{v:.17g}\n" for v in values)
