"""Refinement studies for max-norm and W^{1,inf} stability of the Ritz projection."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np

from . import fem, maxprinciple
from .fem import NodalField
from .functions import ExtensionRecipe, TestFunction, build_extension
from .mesh import DEFAULT_AUDIT_TOL, DomainSpec, ExtendedMesh, TetMesh, audit_non_obtuse, \
    extend_to_box, generate, metrics
from .sparse import DEFAULT_RTOL

log = logging.getLogger(__name__)

CSV_FIELDS = ("domain", "func", "n", "h", "log_h", "u_linf", "Rhu_linf", "ratio1", "ratio2",
              "u_w1inf", "Rhu_w1inf", "ratio3", "aux_linf", "chain_lhs", "chain_rhs",
              "cg_iters", "residual")


class AuditError(RuntimeError):
    """A mesh failed the non-obtuse or stiffness sign audit."""


@lru_cache(maxsize=4)
def _extension(mesh: TetMesh, margin: int) -> ExtendedMesh:
    return extend_to_box(mesh, mesh.spec, margin)


def log_factor(h: float) -> float:
    """``|ln h|``."""
    return abs(math.log(h))


def gate(mesh: TetMesh, audit_tol: float = DEFAULT_AUDIT_TOL,
         sign_tol: float = maxprinciple.SIGN_TOL) -> None:
    """Raise :class:`AuditError` unless the mesh is non-obtuse with an M-matrix sign pattern."""
    rep = audit_non_obtuse(mesh, audit_tol)
    if not rep.passed:
        raise AuditError(f"mesh is not non-obtuse: {len(rep.violations)} violations, "
                         f"first {rep.violations[0]}")
    sign = maxprinciple.offdiagonal_sign_audit(fem.assemble_stiffness(mesh),
                                               mesh.interior_nodes, sign_tol)
    if not sign.passed:
        raise AuditError(f"stiffness sign audit failed: worst entry {sign.worst_entry}")


@dataclass
class LevelRow:
    domain: str
    func: str
    n: int | None
    h: float
    log_h: float
    u_linf: float
    Rhu_linf: float
    ratio1: float
    ratio2: float
    u_w1inf: float | None = None
    Rhu_w1inf: float | None = None
    ratio3: float | None = None
    aux_linf: float | None = None
    chain_lhs: float | None = None
    chain_rhs: float | None = None
    cg_iters: int = 0
    residual: float = 0.0
    # quantities of the final triangle-inequality chain, not in the CSV schema
    aux_linf_omega: float | None = None
    aux_boundary: float | None = None
    u_boundary: float | None = None
    aux_ratio: float | None = None
    aux_cg_iters: int | None = None
    aux_residual: float | None = None
    resolved: bool = True


@dataclass
class StabilityReport:
    domain: str
    func: str
    regularity: str
    rows: list = field(default_factory=list)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows], dtype=float)

    def growth(self, name: str) -> np.ndarray:
        """Level-to-level factors ``col[k+1] / col[k]``."""
        c = self.column(name)
        return c[1:] / c[:-1]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_FIELDS)
        for r in self.rows:
            w.writerow([_fmt(getattr(r, k)) for k in CSV_FIELDS])
        return buf.getvalue()

    def to_json(self) -> str:
        doc = {"domain": self.domain, "func": self.func, "regularity": self.regularity,
               "rows": [{k: getattr(r, k) for k in CSV_FIELDS} for r in self.rows]}
        return json.dumps(doc, indent=2) + "\n"


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def study_level(mesh: TetMesh, u: TestFunction, ext: ExtendedMesh | None = None,
                recipe: ExtensionRecipe = ExtensionRecipe(), rtol: float = DEFAULT_RTOL,
                audit_tol: float = DEFAULT_AUDIT_TOL) -> LevelRow:
    """All report quantities on one mesh; aux columns are filled when ``ext`` is given."""
    gate(mesh, audit_tol)
    h = metrics(mesh)[0]
    lh = log_factor(h)
    rhu = fem.ritz_project(mesh, u.field, rtol=rtol)
    u_linf = u.linf(mesh)
    rhu_linf = fem.linf_norm(rhu)
    ratio1 = rhu_linf / u_linf
    spec = mesh.spec
    row = LevelRow(spec.name if spec else "file", u.name, mesh.n, h, lh, u_linf, rhu_linf,
                   ratio1, ratio1 / lh, cg_iters=rhu.stats.iterations,
                   residual=rhu.stats.residual)
    if u.feature_scale is not None and u.feature_scale < 2 * h:
        row.resolved = False
        log.warning("%s: feature scale %g under-resolved at h = %g", u.name, u.feature_scale, h)
    if u.lipschitz:
        row.u_w1inf = u.w1inf(mesh)
        row.Rhu_w1inf = fem.w1inf_norm(mesh, rhu)
        row.ratio3 = row.Rhu_w1inf / (lh * row.u_w1inf)
    if ext is not None:
        utilde = build_extension(u, spec, recipe, ext.margin)
        aux = fem.solve_aux(ext, utilde, rtol=rtol)
        ineq = maxprinciple.verify_boundary_max_bound(mesh, ext, u.field, utilde, rhu=rhu, aux=aux)
        row.aux_linf = fem.linf_norm(aux)
        row.aux_linf_omega = float(np.abs(aux.values[ext.node_map]).max())
        row.aux_boundary = ineq.aux_boundary
        row.u_boundary = ineq.u_boundary
        row.chain_lhs = ineq.lhs
        row.chain_rhs = ineq.rhs
        row.aux_ratio = row.aux_linf / (lh * u_linf)
        row.aux_cg_iters = aux.stats.iterations
        row.aux_residual = aux.stats.residual
    return row


def run_study(spec: DomainSpec, u: TestFunction, levels, margin: int = 1,
              recipe: ExtensionRecipe = ExtensionRecipe(), rtol: float = DEFAULT_RTOL,
              audit_tol: float = DEFAULT_AUDIT_TOL, with_aux: bool = True) -> StabilityReport:
    """Stability ratios of the Ritz projection of ``u`` over refinement ``levels``.

    Raises
    ------
    AuditError
        If any level's mesh fails the non-obtuse gate.
    """
    levels = list(levels)
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise ValueError("levels must be strictly increasing")
    report = StabilityReport(spec.name, u.name, u.regularity.value)
    for n in levels:
        mesh = generate(spec, n)
        ext = _extension(mesh, margin) if with_aux else None
        report.rows.append(study_level(mesh, u, ext, recipe, rtol, audit_tol))
        log.info("level n=%d done", n)
    return report


# --------------------------------------------------------------------------
# Identity between the auxiliary field and the data
# --------------------------------------------------------------------------


@dataclass
class IdentityRecord:
    residual: float
    raw: float
    scale: float
    passed: bool
    tol: float

    def to_dict(self) -> dict:
        return asdict(self)


def verify_aux_identity(mesh: TetMesh, ext: ExtendedMesh, u, utilde, tol: float = 1e-8,
                        face_degree: int = fem.FACE_QUAD_DEGREE,
                        volume_degree: int = fem.VOLUME_QUAD_DEGREE,
                        rtol: float = DEFAULT_RTOL, aux: NodalField | None = None
                        ) -> IdentityRecord:
    """Galerkin residual of the auxiliary field against ``u`` on interior domain nodes.

    ``r_i = (grad u~_h, grad phi_i) - (grad u, grad phi_i)`` for interior ``i``,
    reported as ``max |r| / max |(grad u, grad phi_i)|``.
    """
    aux = fem.solve_aux(ext, utilde, rtol=rtol, degree=face_degree) if aux is None else aux
    a = fem.assemble_stiffness(mesh)
    inner = mesh.interior_nodes
    lhs = (a @ aux.values[ext.node_map])[inner]
    rhs = fem.load_vector(mesh, u, volume_degree)[inner]
    raw = float(np.abs(lhs - rhs).max()) if inner.size else 0.0
    scale = float(np.abs(rhs).max()) if inner.size else 0.0
    res = raw / scale if scale > 0 else raw
    return IdentityRecord(res, raw, scale, res <= tol, tol)


# --------------------------------------------------------------------------
# Inverse-inequality chain
# --------------------------------------------------------------------------


@dataclass
class InverseChainRecord:
    n: int | None
    h: float
    a: float
    b: float
    inverse_constant: float
    e_linf: float
    interp_error: float
    log_ratio: float
    degenerate: bool

    def to_dict(self) -> dict:
        return asdict(self)


def verify_inverse_chain(mesh: TetMesh, u: TestFunction, rhu: NodalField | None = None,
                         rtol: float = DEFAULT_RTOL) -> InverseChainRecord:
    """Measure the inverse estimate and the max-norm bound for ``e = R_h u - I_h u``.

    ``a = ||e||_{W1,inf}``, ``b = ||e||_inf / h``, ``inverse_constant = a / b`` and
    ``log_ratio = ||e||_inf / (|ln h| ||u - I_h u||_inf)``. When ``e`` vanishes to
    rounding the record is flagged degenerate and both ratios are NaN.
    """
    rhu = fem.ritz_project(mesh, u.field, rtol=rtol) if rhu is None else rhu
    ih = fem.interpolate(mesh, u.field)
    e = rhu.values - ih.values
    h = metrics(mesh)[0]
    e_linf = fem.linf_norm(e)
    a = fem.w1inf_norm(mesh, e)
    b = e_linf / h
    interp = fem.interpolation_error(mesh, u.field)
    scale = max(1.0, fem.linf_norm(ih))
    degenerate = e_linf <= 1e-12 * scale
    inv = float("nan") if degenerate else a / b
    lr = float("nan") if degenerate or interp == 0 else e_linf / (log_factor(h) * interp)
    return InverseChainRecord(mesh.n, h, a, b, inv, e_linf, interp, lr, degenerate)


def interpolation_rates(spec: DomainSpec, u: TestFunction, levels) -> tuple[np.ndarray, float]:
    """Sampled ``||u - I_h u||_inf`` per level and the least-squares log-log slope in h."""
    hs, errs = [], []
    for n in levels:
        mesh = generate(spec, n)
        hs.append(metrics(mesh)[0])
        errs.append(fem.interpolation_error(mesh, u.field))
    slope = float(np.polyfit(np.log(hs), np.log(errs), 1)[0])
    return np.array(errs), slope
