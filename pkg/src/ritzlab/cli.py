"""Command-line front end.

Exit codes: 0 success, 1 verification or solver failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import fem, maxprinciple, stability
from .functions import ExtensionRecipe, builtin_test_functions
from .mesh import DEFAULT_AUDIT_TOL, PRESETS, MeshError, audit_non_obtuse, generate, \
    metrics, preset, read_mesh, write_mesh, write_vtk
from .sparse import DEFAULT_RTOL, SolverError

log = logging.getLogger("ritzlab")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    domain: str | None = "fichera"
    mesh: str | None = None
    scale: float = 1.0
    n: int = 4
    levels: list = field(default_factory=lambda: [2, 4, 8])
    func: str = "sinprod"
    eps: float = 0.25
    margin: int = 1
    width: float = 1.0
    rtol: float = DEFAULT_RTOL
    audit_tol: float = DEFAULT_AUDIT_TOL
    trials: int = 100
    seed: int = 0
    out: str = "ritzlab_out"
    formats: list = field(default_factory=lambda: ["txt"])

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        return cls(**json.loads(text))

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "RunConfig":
        out = args.out or os.environ.get("RITZLAB_OUT") or "ritzlab_out"
        return cls(
            command=args.command,
            domain=None if args.mesh else args.domain,
            mesh=args.mesh,
            scale=args.scale,
            n=args.n,
            levels=list(args.levels),
            func=args.func,
            eps=args.eps,
            margin=args.margin,
            width=args.width,
            rtol=args.rtol,
            audit_tol=args.audit_tol,
            trials=args.trials,
            seed=args.seed,
            out=out,
            formats=list(args.format),
        )


def _g(x) -> str:
    return f"{x:.17g}"


def _int_list(text: str) -> list:
    try:
        vals = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _formats(text: str) -> list:
    vals = [t.strip() for t in text.split(",") if t.strip()]
    bad = set(vals) - {"txt", "vtk", "csv", "json"}
    if bad:
        raise argparse.ArgumentTypeError(f"unknown formats {sorted(bad)}")
    return vals


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group()
    src.add_argument("--domain", choices=PRESETS, default="fichera",
                     help="domain preset (default: fichera)")
    src.add_argument("--mesh", help="mesh text file instead of a preset")
    common.add_argument("--scale", type=float, default=1.0, help="cell edge length (default: 1)")
    common.add_argument("--n", type=int, default=4, help="subdivisions per cell (default: 4)")
    common.add_argument("--levels", type=_int_list, default=[2, 4, 8],
                        help="refinement levels for study (default: 2,4,8)")
    common.add_argument("--func", default="sinprod", help="test function (default: sinprod)")
    common.add_argument("--eps", type=float, default=0.25,
                        help="boundary-layer width (default: 0.25)")
    common.add_argument("--margin", type=int, default=1, help="box margin in cells (default: 1)")
    common.add_argument("--width", type=float, default=1.0,
                        help="extension cutoff width in cells (default: 1)")
    common.add_argument("--rtol", type=float, default=DEFAULT_RTOL,
                        help=f"CG relative tolerance (default: {DEFAULT_RTOL:g})")
    common.add_argument("--audit-tol", type=float, default=DEFAULT_AUDIT_TOL,
                        help=f"dihedral angle tolerance in rad (default: {DEFAULT_AUDIT_TOL:g})")
    common.add_argument("--trials", type=int, default=100,
                        help="random harmonic trials (default: 100)")
    common.add_argument("--seed", type=int, default=0, help="random seed (default: 0)")
    common.add_argument("--out", default=None,
                        help="output directory (default: $RITZLAB_OUT or ./ritzlab_out)")
    common.add_argument("--format", type=_formats, default=["txt"],
                        help="extra output formats, comma separated: txt,vtk (default: txt)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="ritzlab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, text in (
        ("mesh-audit", "dihedral-angle audit of a mesh"),
        ("ritz", "Ritz projection of a test function"),
        ("maxprinciple", "stiffness sign audit and random discrete-harmonic trials"),
        ("study", "max-norm and W1,inf stability study over refinement levels"),
        ("export-mesh", "write a mesh in text (and VTK) format"),
    ):
        sub.add_parser(name, parents=[common], help=text, description=text)
    return p


def _load_mesh(cfg: RunConfig):
    if cfg.mesh:
        return read_mesh(cfg.mesh)
    if cfg.n < 1:
        raise UsageError("--n must be >= 1")
    return generate(preset(cfg.domain, cfg.scale), cfg.n)


def _catalog(cfg: RunConfig, mesh=None):
    spec = mesh.spec if mesh is not None and mesh.spec is not None else None
    if spec is None:
        spec = preset(cfg.domain or "cube", cfg.scale)
    cat = builtin_test_functions(spec, eps=cfg.eps)
    if cfg.func not in cat:
        raise UsageError(f"unknown function {cfg.func!r}; catalog: {', '.join(sorted(cat))}")
    return cat[cfg.func]


def _outdir(cfg: RunConfig) -> Path:
    d = Path(cfg.out)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _dump(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")


def cmd_mesh_audit(cfg: RunConfig) -> int:
    mesh = _load_mesh(cfg)
    rep = audit_non_obtuse(mesh, cfg.audit_tol)
    doc = rep.to_dict()
    doc["h_max"], doc["h_min"], doc["quasi_uniformity"] = metrics(mesh)
    _dump(_outdir(cfg) / "audit.json", doc)
    print(f"elements {mesh.num_tets} max_dihedral {_g(rep.global_max)} "
          f"violations {len(rep.violations)} pass {rep.passed}")
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_ritz(cfg: RunConfig) -> int:
    mesh = _load_mesh(cfg)
    u = _catalog(cfg, mesh)
    rhu = fem.ritz_project(mesh, u.field, rtol=cfg.rtol)
    out = _outdir(cfg)
    fem.write_field(rhu, out / "field.txt")
    if "vtk" in cfg.formats:
        write_vtk(mesh, out / "field.vtk", {"Rhu": rhu.values, "u": u.field(mesh.vertices)})
    err = float(np.abs(rhu.values - u.field(mesh.vertices)).max())
    doc = {"func": u.name, "u_linf": u.linf(mesh), "Rhu_linf": fem.linf_norm(rhu),
           "Rhu_w1inf": fem.w1inf_norm(mesh, rhu), "max_nodal_error": err,
           **rhu.stats.to_dict()}
    _dump(out / "ritz.json", doc)
    for k in ("u_linf", "Rhu_linf", "Rhu_w1inf", "max_nodal_error", "residual"):
        print(f"{k} {_g(doc[k])}")
    print(f"cg_iters {doc['iterations']} converged {doc['converged']}")
    return EXIT_OK


def cmd_maxprinciple(cfg: RunConfig) -> int:
    mesh = _load_mesh(cfg)
    a = fem.assemble_stiffness(mesh)
    sign = maxprinciple.offdiagonal_sign_audit(a, mesh.interior_nodes)
    elem = maxprinciple.element_gradient_products(mesh)
    trials = maxprinciple.harmonic_trials(mesh, cfg.trials, cfg.seed)
    doc = {"sign_audit": sign.to_dict(), "max_element_gradient_product": elem,
           "harmonic": trials}
    _dump(_outdir(cfg) / "maxprinciple.json", doc)
    print(f"sign_audit pass {sign.passed} worst {sign.worst_entry}")
    print(f"harmonic trials {trials['passed']}/{trials['trials']} pass (seed {cfg.seed})")
    ok = sign.passed and trials["passed"] == trials["trials"]
    return EXIT_OK if ok else EXIT_FAIL


def cmd_study(cfg: RunConfig) -> int:
    recipe = ExtensionRecipe(width=cfg.width)
    if cfg.mesh:
        mesh = read_mesh(cfg.mesh)
        stability.gate(mesh, cfg.audit_tol)
        u = _catalog(cfg, mesh)
        report = stability.StabilityReport("file", u.name, u.regularity.value)
        report.rows.append(stability.study_level(mesh, u, None, recipe, cfg.rtol, cfg.audit_tol))
    else:
        spec = preset(cfg.domain, cfg.scale)
        u = _catalog(cfg)
        for n in cfg.levels:
            stability.gate(generate(spec, n), cfg.audit_tol)
        report = stability.run_study(spec, u, cfg.levels, cfg.margin, recipe, cfg.rtol,
                                     cfg.audit_tol)
    out = _outdir(cfg)
    (out / "study.csv").write_text(report.to_csv())
    (out / "study.json").write_text(report.to_json())
    sys.stdout.write(report.to_csv())
    return EXIT_OK


def cmd_export_mesh(cfg: RunConfig) -> int:
    mesh = _load_mesh(cfg)
    out = _outdir(cfg)
    write_mesh(mesh, out / "mesh.txt")
    if "vtk" in cfg.formats:
        write_vtk(mesh, out / "mesh.vtk")
    print(f"vertices {mesh.num_vertices} tets {mesh.num_tets}")
    return EXIT_OK


COMMANDS = {
    "mesh-audit": cmd_mesh_audit,
    "ritz": cmd_ritz,
    "maxprinciple": cmd_maxprinciple,
    "study": cmd_study,
    "export-mesh": cmd_export_mesh,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    cfg = RunConfig.from_args(args)
    try:
        code = COMMANDS[cfg.command](cfg)
    except (UsageError, MeshError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (stability.AuditError, SolverError) as exc:
        print(f"failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    _dump(Path(cfg.out) / f"config-{cfg.command}.json", json.loads(cfg.to_json()))
    return code


if __name__ == "__main__":
    sys.exit(main())
