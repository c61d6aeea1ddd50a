"""P1 finite elements on tetrahedral meshes.

Stiffness assembly, the Ritz projection with boundary interpolation, nodal
interpolation, the auxiliary zero-trace solution on an extended box mesh, and
exact or sampled norms of discrete and continuous fields.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
import scipy.sparse as sp

from .mesh import LOCAL_FACES, ExtendedMesh, MeshError, TetMesh, locate
from .quadrature import barycentric_lattice, tet_rule, triangle_rule
from .sparse import DEFAULT_RTOL, SolverError, SolveStats, cg_solve, csr, restrict

# polynomial degree of the discrete space; the auxiliary right-hand side drops
# the elementwise volume term -(u, lap v)_T, which vanishes only for degree 1
DEGREE = 1

VOLUME_QUAD_DEGREE = 6
FACE_QUAD_DEGREE = 6

_CHUNK = 1 << 17


@dataclass(frozen=True, eq=False)
class ScalarField:
    """A function given by formula, vectorised over points of shape (N, 3).

    ``gradient`` returns (N, 3). ``box`` is the ``(lo, hi)`` box the formula is
    meant for (informational).
    """

    value: Callable[[np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray], np.ndarray] | None = None
    box: tuple | None = None
    name: str = ""

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(self.value(np.asarray(x, dtype=float)), dtype=float)

    def grad(self, x: np.ndarray) -> np.ndarray:
        if self.gradient is None:
            raise ValueError(
                f"field {self.name!r} has no analytic gradient; "
                "finite-difference gradients are not used")
        return np.asarray(self.gradient(np.asarray(x, dtype=float)), dtype=float)


@dataclass(eq=False)
class NodalField:
    """A continuous piecewise-linear field: one value per mesh vertex."""

    mesh: TetMesh
    values: np.ndarray
    stats: SolveStats | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.mesh.num_vertices,):
            raise ValueError(
                f"field has {self.values.shape} values for {self.mesh.num_vertices} vertices")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("nodal field contains non-finite values")


Field = Union[ScalarField, NodalField]


def _chunks(total: int, size: int = _CHUNK):
    for start in range(0, total, size):
        yield slice(start, min(start + size, total))


# --------------------------------------------------------------------------
# Element geometry and assembly
# --------------------------------------------------------------------------


def barycentric_gradients(points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of the barycentric coordinates and volumes.

    Parameters
    ----------
    points : ndarray, shape (4, 3) or (E, 4, 3)

    Returns
    -------
    grads : ndarray, shape (4, 3) or (E, 4, 3)
        Row ``a`` is the constant gradient of the hat function of vertex ``a``.
    volumes : float or ndarray (E,)
    """
    points = np.asarray(points, dtype=float)
    single = points.ndim == 2
    p = points[None] if single else points
    d = p[:, 1:] - p[:, :1]
    det = np.linalg.det(d)
    scale = np.max(np.abs(d), axis=(1, 2)) if len(d) else np.zeros(0)
    if np.any(det <= 1e-14 * 6 * scale**3):
        raise MeshError("degenerate or negatively oriented tetrahedron")
    inv = np.linalg.inv(d)  # row i = gradient of lambda_{i+1}
    g = np.empty_like(p)
    g[:, 1:] = np.swapaxes(inv, 1, 2)
    g[:, 0] = -g[:, 1:].sum(axis=1)
    vol = det / 6.0
    return (g[0], vol[0]) if single else (g, vol)


def _element_geometry(mesh: TetMesh, sl: slice):
    return barycentric_gradients(mesh.vertices[mesh.tets[sl]])


def assemble_stiffness(mesh: TetMesh) -> sp.csr_matrix:
    """Global matrix ``A[i, j] = sum_T |T| grad(l_i) . grad(l_j)`` (cached per mesh)."""
    if "stiffness" in mesh._cache:
        return mesh._cache["stiffness"]
    nv = mesh.num_vertices
    total = sp.csr_matrix((nv, nv))
    for sl in _chunks(mesh.num_tets):
        g, vol = _element_geometry(mesh, sl)
        local = np.einsum("eid,ejd->eij", g, g) * vol[:, None, None]
        t = mesh.tets[sl]
        rows = np.repeat(t, 4, axis=1).ravel()
        cols = np.tile(t, (1, 4)).ravel()
        total = total + sp.coo_matrix((local.ravel(), (rows, cols)), shape=(nv, nv)).tocsr()
    a = csr(total)
    mesh._cache["stiffness"] = a
    return a


def interior_stiffness(mesh: TetMesh) -> sp.csr_matrix:
    if "interior_stiffness" not in mesh._cache:
        mesh._cache["interior_stiffness"] = restrict(assemble_stiffness(mesh), mesh.interior_nodes)
    return mesh._cache["interior_stiffness"]


# --------------------------------------------------------------------------
# Evaluation helpers
# --------------------------------------------------------------------------


def _physical(points: np.ndarray, bary: np.ndarray) -> np.ndarray:
    # points (C, k, 3), bary (Q, k) -> (C, Q, 3)
    return np.einsum("qk,ckd->cqd", bary, points)


def _values_on(u: Field, vert_ids: np.ndarray, bary: np.ndarray, mesh: TetMesh) -> np.ndarray:
    """Values (C, Q) of ``u`` at barycentric points of simplices ``vert_ids`` (C, k)."""
    if isinstance(u, NodalField):
        if u.mesh is not mesh:
            raise ValueError("nodal field lives on a different mesh")
        return u.values[vert_ids] @ bary.T
    x = _physical(mesh.vertices[vert_ids], bary)
    return u(x.reshape(-1, 3)).reshape(x.shape[:2])


def p1_field(f: NodalField) -> ScalarField:
    """Formula view of a P1 field on a generated mesh (uses Kuhn point location)."""
    mesh = f.mesh
    grads = element_gradients(mesh, f)
    base = mesh.tets[:, 0]

    def value(x):
        t = locate(mesh, x)
        return f.values[base[t]] + np.einsum("ij,ij->i", grads[t], x - mesh.vertices[base[t]])

    def gradient(x):
        return grads[locate(mesh, x)]

    return ScalarField(value, gradient, name="p1")


def gradient_check(u: ScalarField, points: np.ndarray, step: float = 1e-6) -> float:
    """Largest relative mismatch between ``u.grad`` and central differences."""
    points = np.asarray(points, dtype=float)
    fd = np.empty_like(points)
    for d in range(3):
        e = np.zeros(3)
        e[d] = step
        fd[:, d] = (u(points + e) - u(points - e)) / (2 * step)
    g = u.grad(points)
    scale = max(1.0, float(np.abs(g).max()))
    return float(np.abs(g - fd).max() / scale)


# --------------------------------------------------------------------------
# Projections
# --------------------------------------------------------------------------


def interpolate(mesh: TetMesh, u: Field) -> NodalField:
    """Nodal interpolant: ``(I_h u)(x_i) = u(x_i)``."""
    if isinstance(u, NodalField):
        return NodalField(mesh, u.values.copy())
    return NodalField(mesh, u(mesh.vertices))


def load_vector(mesh: TetMesh, u: Field, degree: int = VOLUME_QUAD_DEGREE) -> np.ndarray:
    """``b_i = (grad u, grad phi_i)`` for every vertex ``i``.

    Volume quadrature of the given degree for formula fields; exact (``A u``)
    for nodal fields on ``mesh``.
    """
    if isinstance(u, NodalField):
        if u.mesh is not mesh:
            raise ValueError("nodal field lives on a different mesh")
        return assemble_stiffness(mesh) @ u.values
    rule = tet_rule(degree)
    out = np.zeros(mesh.num_vertices)
    for sl in _chunks(mesh.num_tets):
        g, vol = _element_geometry(mesh, sl)
        t = mesh.tets[sl]
        x = _physical(mesh.vertices[t], rule.points)
        gu = u.grad(x.reshape(-1, 3)).reshape(x.shape)
        avg = np.einsum("q,cqd->cd", rule.weights, gu) * (6.0 * vol)[:, None]
        local = np.einsum("cad,cd->ca", g, avg)
        out += np.bincount(t.ravel(), weights=local.ravel(), minlength=mesh.num_vertices)
    return out


def ritz_project(
    mesh: TetMesh,
    u: Field,
    rtol: float = DEFAULT_RTOL,
    degree: int = VOLUME_QUAD_DEGREE,
) -> NodalField:
    """Ritz projection: boundary values interpolate ``u``; interior Galerkin solve.

    Interior values solve ``A_II x = b_I - A_IB u_B`` by CG, started from the
    nodal interpolant. Solve statistics are attached as ``.stats``.

    Raises
    ------
    SolverError
        If CG does not converge.
    """
    a = assemble_stiffness(mesh)
    nodal = interpolate(mesh, u).values
    bnd = mesh.boundary_nodes
    inner = mesh.interior_nodes
    b = load_vector(mesh, u, degree)
    ub = np.zeros(mesh.num_vertices)
    ub[bnd] = nodal[bnd]
    rhs = (b - a @ ub)[inner]
    x, stats = cg_solve(interior_stiffness(mesh), rhs, rtol=rtol, x0=nodal[inner])
    if not stats.converged:
        raise SolverError(f"Ritz projection CG failed: {stats}")
    out = ub
    out[inner] = x
    return NodalField(mesh, out, stats)


def face_integrals(mesh: TetMesh, u: Field, degree: int = FACE_QUAD_DEGREE) -> np.ndarray:
    """``int_F u`` over every unique face of ``mesh`` (ordered as ``mesh.faces``)."""
    rule = triangle_rule(degree)
    faces = mesh.faces
    out = np.empty(len(faces))
    for sl in _chunks(len(faces)):
        f = faces[sl]
        p = mesh.vertices[f]
        area = 0.5 * np.linalg.norm(np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]), axis=1)
        vals = _values_on(u, f, rule.points, mesh)
        out[sl] = 2.0 * area * (vals @ rule.weights)
    return out


def outward_unit_normals(points: np.ndarray) -> np.ndarray:
    """(C, 4, 3) outward unit normals; column k belongs to the face opposite vertex k."""
    n = np.empty_like(points)
    for k, (a, b, c) in enumerate(LOCAL_FACES):
        v = np.cross(points[:, b] - points[:, a], points[:, c] - points[:, a])
        s = np.einsum("ij,ij->i", v, points[:, a] - points[:, k])
        v *= np.where(s < 0, -1.0, 1.0)[:, None]
        n[:, k] = v / np.linalg.norm(v, axis=1, keepdims=True)
    return n


def flux_pairing(mesh: TetMesh, u: Field, degree: int = FACE_QUAD_DEGREE) -> np.ndarray:
    """``sum_T <u, grad(phi_i) . n>_{dT}`` for every vertex ``i`` of ``mesh``."""
    assert DEGREE == 1, "volume term of the flux pairing is only zero for P1"
    integrals = face_integrals(mesh, u, degree)
    out = np.zeros(mesh.num_vertices)
    for sl in _chunks(mesh.num_tets):
        g, _ = _element_geometry(mesh, sl)
        t = mesh.tets[sl]
        nrm = outward_unit_normals(mesh.vertices[t])
        local = np.einsum("cad,ckd,ck->ca", g, nrm, integrals[mesh.tet_faces[sl]])
        out += np.bincount(t.ravel(), weights=local.ravel(), minlength=mesh.num_vertices)
    return out


def aux_rhs_functional(ext: ExtendedMesh, utilde: Field,
                       degree: int = FACE_QUAD_DEGREE) -> np.ndarray:
    """Right-hand side of the auxiliary problem on the interior nodes of the box.

    ``utilde`` is a formula field on the box or a nodal field on ``ext.outer``.
    """
    return flux_pairing(ext.outer, utilde, degree)[ext.outer.interior_nodes]


def solve_aux(ext: ExtendedMesh, utilde: Field, rtol: float = DEFAULT_RTOL,
              degree: int = FACE_QUAD_DEGREE) -> NodalField:
    """Zero-trace discrete field on the box paired against ``utilde`` through face fluxes."""
    outer = ext.outer
    inner = outer.interior_nodes
    rhs = aux_rhs_functional(ext, utilde, degree)
    x0 = interpolate(outer, utilde).values[inner]
    x, stats = cg_solve(interior_stiffness(outer), rhs, rtol=rtol, x0=x0)
    if not stats.converged:
        raise SolverError(f"auxiliary CG failed: {stats}")
    out = np.zeros(outer.num_vertices)
    out[inner] = x
    return NodalField(outer, out, stats)


# --------------------------------------------------------------------------
# Norms
# --------------------------------------------------------------------------


def linf_norm(f) -> float:
    """Max-norm of a P1 field (the largest nodal magnitude; exact)."""
    v = f.values if isinstance(f, NodalField) else np.asarray(f, dtype=float)
    return float(np.abs(v).max()) if v.size else 0.0


def element_gradients(mesh: TetMesh, f) -> np.ndarray:
    """Constant gradient (E, 3) of a P1 field on each element."""
    v = f.values if isinstance(f, NodalField) else np.asarray(f, dtype=float)
    out = np.empty((mesh.num_tets, 3))
    for sl in _chunks(mesh.num_tets):
        g, _ = _element_geometry(mesh, sl)
        out[sl] = np.einsum("cad,ca->cd", g, v[mesh.tets[sl]])
    return out


def w1inf_seminorm(mesh: TetMesh, f) -> float:
    """``max_T |grad f|`` (exact for P1)."""
    return float(np.linalg.norm(element_gradients(mesh, f), axis=1).max())


def w1inf_norm(mesh: TetMesh, f) -> float:
    return max(linf_norm(f), w1inf_seminorm(mesh, f))


def _sample_points(mesh: TetMesh, order: int, sl: slice) -> np.ndarray:
    bary = np.vstack([barycentric_lattice(3, order), tet_rule(VOLUME_QUAD_DEGREE).points])
    return _physical(mesh.vertices[mesh.tets[sl]], bary).reshape(-1, 3)


def field_linf(u: Field, mesh: TetMesh, order: int = 4) -> float:
    """Sup of ``|u|`` over the mesh, sampled on an order-``order`` lattice plus quadrature points."""
    if isinstance(u, NodalField):
        return linf_norm(u)
    best = 0.0
    for sl in _chunks(mesh.num_tets, _CHUNK // 8):
        best = max(best, float(np.abs(u(_sample_points(mesh, order, sl))).max()))
    return best


def field_grad_linf(u: ScalarField, mesh: TetMesh, order: int = 4) -> float:
    """Sampled sup of ``|grad u|``."""
    best = 0.0
    for sl in _chunks(mesh.num_tets, _CHUNK // 8):
        g = u.grad(_sample_points(mesh, order, sl))
        best = max(best, float(np.linalg.norm(g, axis=1).max()))
    return best


def boundary_linf(u: Field, mesh: TetMesh, order: int = 10) -> float:
    """Sup of ``|u|`` on the mesh boundary.

    Exact (boundary nodal max) for P1 fields; for formula fields a sample on
    an order-``order`` barycentric lattice of every boundary triangle, which
    includes its vertices. The sample is a lower bound of the true sup.
    """
    if isinstance(u, NodalField):
        return float(np.abs(u.values[mesh.boundary_nodes]).max())
    tri = mesh.boundary_triangles
    bary = barycentric_lattice(2, order)
    best = 0.0
    for sl in _chunks(len(tri), _CHUNK // 8):
        best = max(best, float(np.abs(_values_on(u, tri[sl], bary, mesh)).max()))
    return best


def interpolation_error(mesh: TetMesh, u: ScalarField, order: int = 5) -> float:
    """``max |u - I_h u|`` sampled on an order-``order`` lattice in every element."""
    bary = barycentric_lattice(3, order)
    nodal = u(mesh.vertices)
    best = 0.0
    for sl in _chunks(mesh.num_tets, _CHUNK // 8):
        t = mesh.tets[sl]
        exact = _values_on(u, t, bary, mesh)
        approx = nodal[t] @ bary.T
        best = max(best, float(np.abs(exact - approx).max()))
    return best


def write_field(f: NodalField, path) -> None:
    """Text dump: ``V`` then one value per line, aligned with the mesh file."""
    with open(path, "w") as fh:
        fh.write(f"{f.values.size}\n")
        fh.writelines(f"{v:.17g}\n" for v in f.values)


def read_field(mesh: TetMesh, path) -> NodalField:
    with open(path) as fh:
        n = int(fh.readline())
        values = np.loadtxt(fh, ndmin=1) if n else np.zeros(0)
    return NodalField(mesh, values)
