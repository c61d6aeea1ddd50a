import numpy as np
import pytest
import scipy.sparse as sp

from ritzlab.fem import assemble_stiffness, interior_stiffness
from ritzlab.mesh import generate, preset
from ritzlab.sparse import (SolverError, cg_solve, csr, default_maxit, is_symmetric, matvec,
                            read_triplets, restrict, write_triplets)


def laplace_1d(n):
    return csr(sp.diags([-np.ones(n - 1), 2 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1]))


def test_identity_one_iteration():
    b = np.random.default_rng(0).normal(size=7)
    x, st = cg_solve(csr(np.eye(7)), b)
    np.testing.assert_array_equal(x, b)
    assert st.iterations == 1 and st.converged


def test_two_by_two():
    x, st = cg_solve(csr([[2, -1], [-1, 2]]), np.array([1.0, 0.0]))
    np.testing.assert_allclose(x, [2 / 3, 1 / 3], rtol=1e-14)
    assert st.converged and st.residual <= 1e-12


def test_cube_interior_system_matches_dense():
    m = generate(preset("cube"), 4)
    a = interior_stiffness(m)
    b = np.random.default_rng(1).normal(size=a.shape[0])
    x, st = cg_solve(a, b)
    ref = np.linalg.solve(a.toarray(), b)
    assert np.abs(x - ref).max() <= 1e-10 * np.abs(ref).max()
    assert st.converged


def test_cube_n2_single_interior_node():
    m = generate(preset("cube"), 2)
    a = assemble_stiffness(m)
    (i,) = m.interior_nodes
    sub = restrict(a, [i])
    assert sub.shape == (1, 1)
    assert sub[0, 0] == a[i, i]
    x, _ = cg_solve(sub, np.array([3.0]))
    assert x[0] == pytest.approx(3.0 / a[i, i], rel=1e-14)


def test_zero_rhs():
    x, st = cg_solve(laplace_1d(5), np.zeros(5))
    assert not x.any() and st.iterations == 0 and st.converged


def test_reported_residual_is_true_residual():
    a = laplace_1d(50)
    b = np.random.default_rng(2).normal(size=50)
    x, st = cg_solve(a, b, rtol=1e-10)
    assert st.residual == pytest.approx(np.linalg.norm(b - a @ x) / np.linalg.norm(b), rel=1e-12)


def test_maxit_exceeded_not_converged():
    a = laplace_1d(200)
    x, st = cg_solve(a, np.ones(200), maxit=3)
    assert st.iterations == 3 and not st.converged


def test_non_finite_aborts():
    with pytest.raises(SolverError):
        cg_solve(laplace_1d(3), np.array([1.0, np.nan, 0.0]))
    bad = laplace_1d(3).tolil()
    bad[1, 1] = np.inf
    with pytest.raises(SolverError):
        cg_solve(csr(bad), np.ones(3))


def test_energy_non_increasing():
    a = interior_stiffness(generate(preset("fichera"), 2))
    b = np.random.default_rng(4).normal(size=a.shape[0])
    _, st = cg_solve(a, b, monitor=True)
    e = np.array(st.energy_history)
    assert len(e) == st.iterations + 1
    assert np.all(np.diff(e) <= 1e-12 * np.abs(e).max())


def test_deterministic():
    a = interior_stiffness(generate(preset("lprism"), 3))
    b = np.random.default_rng(5).normal(size=a.shape[0])
    x1, s1 = cg_solve(a, b)
    x2, s2 = cg_solve(a, b)
    assert np.array_equal(x1, x2) and s1 == s2


def test_matvec_matches_dense():
    rng = np.random.default_rng(6)
    d = rng.normal(size=(200, 200)) * (rng.random((200, 200)) < 0.05)
    a = csr(d + d.T)
    x = rng.normal(size=200)
    ref = (d + d.T) @ x
    assert np.abs(matvec(a, x) - ref).max() <= 1e-13 * max(1.0, np.abs(ref).max())
    with pytest.raises(ValueError):
        matvec(a, np.ones(3))


def test_restrict_identity_and_composition():
    a = assemble_stiffness(generate(preset("cube"), 2))
    n = a.shape[0]
    assert (restrict(a, np.arange(n)) != a).nnz == 0
    i1 = np.array([0, 2, 4, 5, 9, 13, 20, 26])
    i2 = np.array([1, 3, 4, 6])  # positions within i1
    twice = restrict(restrict(a, i1), i2)
    once = restrict(a, i1[i2])
    assert (twice != once).nnz == 0
    with pytest.raises(IndexError):
        restrict(a, [n])
    with pytest.raises(IndexError):
        restrict(a, [-1])


def test_symmetry_check():
    assert is_symmetric(assemble_stiffness(generate(preset("fichera"), 2)))
    assert not is_symmetric(csr([[1.0, 2.0], [0.0, 1.0]]))


def test_default_maxit():
    assert default_maxit(100) == 200
    assert default_maxit(1) == 20


def test_triplets_roundtrip(tmp_path):
    a = assemble_stiffness(generate(preset("cube"), 1))
    write_triplets(a, tmp_path / "a.txt")
    assert (tmp_path / "a.txt").read_text().splitlines()[0] == f"8 {a.nnz}"
    b = read_triplets(tmp_path / "a.txt")
    assert (a != b).nnz == 0
