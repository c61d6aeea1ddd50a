"""Discrete weak maximum principle checks.

On non-obtuse meshes the stiffness matrix has non-positive off-diagonal
entries in every interior row, which makes discrete harmonic fields attain
their extrema on the boundary. The functions here audit that sign pattern,
compute discrete harmonic extensions and test the resulting inequalities.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import fem
from .fem import NodalField
from .mesh import ExtendedMesh, TetMesh
from .sparse import DEFAULT_RTOL, SolverError, cg_solve

SIGN_TOL = 1e-13


@dataclass
class SignAuditReport:
    count: int
    worst_entry: tuple
    passed: bool
    rows_scanned: int
    tol: float

    def to_dict(self) -> dict:
        i, j, v = self.worst_entry
        return {"pass": self.passed, "count": self.count, "rows_scanned": self.rows_scanned,
                "tol": self.tol,
                "worst_entry": None if i is None else {"i": i, "j": j, "value": v}}


def offdiagonal_sign_audit(a, interior, tol: float = SIGN_TOL) -> SignAuditReport:
    """Count off-diagonal entries ``> tol`` in the rows listed in ``interior``.

    ``worst_entry`` is the largest off-diagonal ``(i, j, value)`` in those rows
    (``(None, None, None)`` when there is none).
    """
    interior = np.asarray(interior, dtype=np.int64)
    sub = a[interior].tocoo()
    rows = interior[sub.row]
    off = rows != sub.col
    rows, cols, vals = rows[off], sub.col[off], sub.data[off]
    if vals.size == 0:
        return SignAuditReport(0, (None, None, None), True, int(interior.size), tol)
    k = int(np.argmax(vals))
    count = int(np.count_nonzero(vals > tol))
    worst = (int(rows[k]), int(cols[k]), float(vals[k]))
    return SignAuditReport(count, worst, count == 0, int(interior.size), tol)


def element_gradient_products(mesh: TetMesh) -> float:
    """Largest ``grad(l_i) . grad(l_j)`` over all tets and pairs ``i != j``."""
    best = -np.inf
    for sl in fem._chunks(mesh.num_tets):
        g, _ = fem._element_geometry(mesh, sl)
        prod = np.einsum("eid,ejd->eij", g, g)
        iu = np.triu_indices(4, 1)
        best = max(best, float(prod[:, iu[0], iu[1]].max()))
    return best


def discrete_harmonic(mesh: TetMesh, g, rtol: float = DEFAULT_RTOL) -> NodalField:
    """P1 field with boundary values ``g`` and zero interior Galerkin residual.

    ``g`` holds either one value per vertex (only boundary entries are read)
    or one value per boundary node, ordered as ``mesh.boundary_nodes``.
    """
    g = np.asarray(g, dtype=float)
    bnd = mesh.boundary_nodes
    inner = mesh.interior_nodes
    full = np.zeros(mesh.num_vertices)
    if g.shape == (mesh.num_vertices,):
        full[bnd] = g[bnd]
    elif g.shape == (bnd.size,):
        full[bnd] = g
    else:
        raise ValueError(f"boundary data of shape {g.shape} does not fit the mesh")
    if not np.all(np.isfinite(full)):
        raise ValueError("non-finite boundary data")
    a = fem.assemble_stiffness(mesh)
    rhs = -(a @ full)[inner]
    x, stats = cg_solve(fem.interior_stiffness(mesh), rhs, rtol=rtol)
    if not stats.converged:
        raise SolverError(f"harmonic extension CG failed: {stats}")
    full[inner] = x
    return NodalField(mesh, full, stats)


def check_max_principle(f: NodalField, tol: float = 1e-10) -> tuple[bool, float]:
    """Two-sided weak maximum principle test.

    Returns ``(pass, margin)`` with ``margin = boundary max - global max``.
    """
    v = f.values
    b = v[f.mesh.boundary_nodes]
    bmax, bmin = float(b.max()), float(b.min())
    gmax, gmin = float(v.max()), float(v.min())
    ok = gmax <= bmax + tol and gmin >= bmin - tol
    return ok, bmax - gmax


def harmonic_trials(mesh: TetMesh, trials: int = 100, seed: int = 0,
                    tol: float = 1e-10) -> dict:
    """Random boundary data in [0, 1]; count harmonic extensions obeying the principle."""
    rng = np.random.default_rng(seed)
    nb = mesh.boundary_nodes.size
    passed = 0
    worst = np.inf
    for _ in range(trials):
        f = discrete_harmonic(mesh, rng.random(nb))
        ok, _ = check_max_principle(f, tol)
        passed += ok
        v = f.values
        b = v[mesh.boundary_nodes]
        worst = min(worst, float(b.max() - v.max()), float(v.min() - b.min()))
    return {"trials": trials, "passed": passed, "seed": seed, "tol": tol,
            "worst_margin": worst}


@dataclass
class InequalityRecord:
    lhs: float
    rhs: float
    passed: bool
    u_boundary: float
    aux_boundary: float
    tol: float

    def to_dict(self) -> dict:
        return asdict(self)


def verify_boundary_max_bound(mesh: TetMesh, ext: ExtendedMesh, u, utilde, rhu: NodalField | None = None,
                  aux: NodalField | None = None, tol: float = 1e-8) -> InequalityRecord:
    """Compare ``max |R_h u - u~_h|`` on the domain with its boundary bound.

    The bound is ``||u||_{L inf(boundary)} + ||u~_h||_{L inf(boundary)}``;
    ``u`` and ``utilde`` are fields, ``rhu`` and ``aux`` optional precomputed
    projections.
    """
    rhu = fem.ritz_project(mesh, u) if rhu is None else rhu
    aux = fem.solve_aux(ext, utilde) if aux is None else aux
    diff = rhu.values - aux.values[ext.node_map]
    lhs = float(np.abs(diff).max())
    ub = fem.boundary_linf(u, mesh)
    ab = float(np.abs(aux.values[ext.omega_boundary_nodes]).max())
    rhs = ub + ab
    return InequalityRecord(lhs, rhs, lhs <= rhs + tol, ub, ab, tol)
