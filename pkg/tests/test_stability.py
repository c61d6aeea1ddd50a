import csv
import io
import json
import math

import numpy as np
import pytest

from ritzlab import fem, stability
from ritzlab.fem import NodalField, ScalarField
from ritzlab.functions import (ExtensionRecipe, Regularity, build_extension,
                               builtin_test_functions, discrete_extension)
from ritzlab.mesh import TetMesh, extend_to_box, generate, preset

SLIVER = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0.5, 0.5, 0.05]])


def test_catalog_contents():
    cube = builtin_test_functions(preset("cube"))
    fich = builtin_test_functions(preset("fichera"))
    assert {"constant", "linear", "quadratic", "sinprod", "boundary_layer", "kink"} <= set(cube)
    assert "corner" not in cube and {"corner", "corner_half"} <= set(fich)
    assert fich["corner"].regularity is Regularity.CONT and not fich["corner"].lipschitz
    assert fich["kink"].regularity is Regularity.W1INF
    assert fich["sinprod"].regularity is Regularity.SMOOTH


def test_catalog_sup_norms():
    spec = preset("fichera")
    cat = builtin_test_functions(spec)
    m = generate(spec, 4)
    # fichera sinprod is sin(pi x / 2) sin(pi y / 2) sin(pi z / 2)
    x = np.random.default_rng(0).random((50, 3)) * 2
    np.testing.assert_allclose(cat["sinprod"].field(x), np.prod(np.sin(np.pi * x / 2), axis=1))
    assert cat["sinprod"].exact_linf == 1.0
    assert cat["sinprod"].exact_grad_linf == pytest.approx(np.pi / 2)
    assert cat["corner"].exact_linf == pytest.approx(3 ** (1 / 3))
    assert cat["linear"].exact_linf == pytest.approx(7.0)  # 1 + 2*2 + 2 at (2, 0, 2)
    assert cat["kink"].exact_grad_linf == pytest.approx(math.sqrt(2))
    for name in ("sinprod", "linear", "corner", "kink", "boundary_layer"):
        sampled = fem.field_linf(cat[name].field, m, order=6)
        assert sampled <= cat[name].exact_linf + 1e-12
        assert sampled >= cat[name].exact_linf * (1 - 1e-2)
    for name in ("sinprod", "boundary_layer", "kink"):
        sampled = fem.field_grad_linf(cat[name].field, m)
        assert sampled <= cat[name].exact_grad_linf + 1e-12


def test_extension_of_constant():
    spec = preset("cube")
    u = builtin_test_functions(spec)["constant"]
    ut = build_extension(u, spec, ExtensionRecipe(width=1.0), margin=1)
    inside = np.random.default_rng(1).random((100, 3))
    np.testing.assert_array_equal(ut(inside), 1.0)
    outer = generate(preset("cube").box(1), 1)
    bnd = outer.vertices[outer.boundary_nodes]
    assert not ut(bnd).any()
    mid = np.array([[1.5, 0.5, 0.5], [-0.25, 0.5, 0.5]])
    np.testing.assert_allclose(ut(mid), [0.5, 0.75])
    g = np.random.default_rng(2).random((2000, 3)) * 3 - 1
    assert np.abs(ut(g)).max() <= 1.0


def test_extension_agrees_bitwise_and_is_bounded():
    spec = preset("fichera")
    u = builtin_test_functions(spec)["linear"]
    ut = build_extension(u, spec)
    m = generate(spec, 3)
    assert np.array_equal(ut(m.vertices), u.field(m.vertices))
    g = np.random.default_rng(3).random((5000, 3)) * 4 - 1
    assert np.abs(ut(g)).max() <= u.exact_linf
    edge = np.array([[-1.0, 0.3, 0.4], [3.0, 1.0, 1.0]])
    assert not ut(edge).any()


def test_extension_width_validation():
    spec = preset("cube")
    u = builtin_test_functions(spec)["constant"]
    with pytest.raises(ValueError, match="margin"):
        build_extension(u, spec, ExtensionRecipe(width=2.0), margin=1)
    with pytest.raises(ValueError):
        build_extension(u, spec, ExtensionRecipe(width=0.0), margin=1)


def test_discrete_extension_properties():
    spec = preset("lprism")
    m = generate(spec, 2)
    ext = extend_to_box(m, margin=1)
    v = np.random.default_rng(4).normal(size=m.num_vertices)
    ut = discrete_extension(ext, NodalField(m, v))
    assert np.array_equal(ut.values[ext.node_map], v)
    assert not ut.values[ext.outer.boundary_nodes].any()
    assert np.abs(ut.values).max() <= np.abs(v).max()


def test_identity_discrete():
    spec = preset("fichera")
    m = generate(spec, 2)
    ext = extend_to_box(m, margin=1)
    f = NodalField(m, np.random.default_rng(5).normal(size=m.num_vertices))
    ut = discrete_extension(ext, f)
    rec = stability.verify_aux_identity(m, ext, f, ut, tol=1e-10)
    assert rec.passed and rec.residual <= 1e-10


def test_identity_zero():
    spec = preset("cube")
    m = generate(spec, 2)
    ext = extend_to_box(m, margin=1)
    zero = ScalarField(lambda x: np.zeros(len(x)), lambda x: np.zeros((len(x), 3)))
    rec = stability.verify_aux_identity(m, ext, zero, zero)
    assert rec.residual == 0.0 and rec.passed


@pytest.mark.parametrize("n", [2, 4])
def test_identity_sinprod_improves_with_face_degree(n):
    spec = preset("fichera")
    m = generate(spec, n)
    ext = extend_to_box(m, margin=1)
    u = builtin_test_functions(spec)["sinprod"]
    ut = build_extension(u, spec)
    r4 = stability.verify_aux_identity(m, ext, u.field, ut, face_degree=4)
    r6 = stability.verify_aux_identity(m, ext, u.field, ut, face_degree=6)
    assert r6.residual < r4.residual


def test_study_linear_ratio_one():
    spec = preset("fichera")
    rep = stability.run_study(spec, builtin_test_functions(spec)["linear"], [1, 2, 3])
    np.testing.assert_allclose(rep.column("ratio1"), 1.0, rtol=1e-12)
    np.testing.assert_allclose(rep.column("h"), [math.sqrt(3) / n for n in (1, 2, 3)])
    assert np.all(rep.column("residual") <= 1e-12)


def test_study_columns_and_serialisation():
    spec = preset("cube")
    u = builtin_test_functions(spec)["sinprod"]
    rep = stability.run_study(spec, u, [2, 4])
    rows = list(csv.DictReader(io.StringIO(rep.to_csv())))
    assert tuple(rows[0]) == stability.CSV_FIELDS
    assert [int(r["n"]) for r in rows] == [2, 4]
    for r in rep.rows:
        assert r.ratio2 == pytest.approx(r.Rhu_linf / (abs(math.log(r.h)) * r.u_linf))
        assert r.ratio3 is not None and np.isfinite(r.ratio3)
        assert r.chain_lhs <= r.chain_rhs + 1e-8
        # triangle inequality on the domain
        assert r.Rhu_linf <= r.chain_lhs + r.aux_linf_omega
    doc = json.loads(rep.to_json())
    assert doc["func"] == "sinprod" and len(doc["rows"]) == 2
    assert rep.growth("h") == pytest.approx([0.5])


def test_study_non_lipschitz_has_no_ratio3():
    spec = preset("fichera")
    rep = stability.run_study(spec, builtin_test_functions(spec)["corner"], [1, 2], with_aux=False)
    assert all(r.ratio3 is None for r in rep.rows)
    assert all(r.aux_linf is None for r in rep.rows)
    assert ",," in rep.to_csv().splitlines()[1]


def test_study_flags_unresolved_boundary_layer():
    spec = preset("cube")
    u = builtin_test_functions(spec, eps=0.05)["boundary_layer"]
    rep = stability.run_study(spec, u, [2], with_aux=False)
    assert not rep.rows[0].resolved


def test_study_rejects_bad_levels():
    spec = preset("cube")
    with pytest.raises(ValueError):
        stability.run_study(spec, builtin_test_functions(spec)["linear"], [4, 2])


def test_gate_rejects_obtuse_mesh():
    m = TetMesh(SLIVER, np.array([[0, 1, 2, 3]]), 1.0)
    with pytest.raises(stability.AuditError):
        stability.gate(m)


def test_inverse_chain_degenerate_for_vh():
    spec = preset("fichera")
    m = generate(spec, 2)
    rec = stability.verify_inverse_chain(m, builtin_test_functions(spec)["linear"])
    assert rec.degenerate and math.isnan(rec.inverse_constant)
    assert rec.a <= 1e-10 and rec.b <= 1e-10


def test_inverse_chain_kink_on_grid_plane_is_degenerate():
    # |x - 0.5| + y is piecewise linear on every mesh with the plane x = 0.5 as a grid plane
    spec = preset("cube")
    u = builtin_test_functions(spec, kink_at=0.5)["kink"]
    for n in (2, 4):
        rec = stability.verify_inverse_chain(generate(spec, n), u)
        assert rec.degenerate and np.isfinite(rec.a) and np.isfinite(rec.b)
    rep = stability.run_study(spec, u, [2, 4], with_aux=False)
    assert np.all(np.isfinite(rep.column("ratio3")))


def test_inverse_chain_kink_off_grid():
    spec = preset("cube")
    u = builtin_test_functions(spec)["kink"]
    recs = [stability.verify_inverse_chain(generate(spec, n), u) for n in (2, 4, 8)]
    for r in recs:
        assert not r.degenerate
        assert np.isfinite(r.inverse_constant) and np.isfinite(r.log_ratio)
        assert r.a <= 2 * math.sqrt(3) * 6 * r.b  # crude inverse estimate on Kuhn tets


def test_interpolation_rates_smooth():
    spec = preset("fichera")
    errs, slope = stability.interpolation_rates(spec, builtin_test_functions(spec)["sinprod"],
                                                [2, 4, 8])
    assert np.all(np.diff(errs) < 0)
    assert 1.8 <= slope <= 2.2


@pytest.mark.parametrize("name", ["cube", "fichera", "lprism"])
def test_constant_ratio_one_exactly(name):
    spec = preset(name)
    rep = stability.run_study(spec, builtin_test_functions(spec)["constant"], [1, 2],
                              with_aux=False)
    assert np.all(rep.column("ratio1") == 1.0)


@pytest.mark.parametrize("func", ["sinprod", "boundary_layer", "kink", "corner", "quadratic"])
def test_rhu_dominates_boundary_values(func):
    spec = preset("fichera")
    u = builtin_test_functions(spec)[func]
    m = generate(spec, 2)
    rhu = fem.ritz_project(m, u.field)
    assert fem.linf_norm(rhu) >= np.abs(u.field(m.vertices[m.boundary_nodes])).max()


@pytest.mark.parametrize("func", ["constant", "linear", "quadratic", "sinprod", "boundary_layer",
                                  "kink", "corner", "corner_half"])
def test_extension_sup_equals_domain_sup(func):
    spec = preset("fichera")
    u = builtin_test_functions(spec)[func]
    ut = build_extension(u, spec)
    box = generate(spec.box(1), 2)
    sup_box = fem.field_linf(ut, box, order=4)
    sup_dom = fem.field_linf(u.field, generate(spec, 2), order=4)
    assert sup_box == pytest.approx(sup_dom, rel=1e-12)
    assert sup_box <= u.exact_linf + 1e-12
