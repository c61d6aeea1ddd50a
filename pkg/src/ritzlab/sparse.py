"""Symmetric CSR helpers and a Jacobi-preconditioned conjugate gradient solver.

Matrices are plain :class:`scipy.sparse.csr_matrix` objects with sorted
column indices; this module adds the operations the solvers need and a CG
loop whose stopping test and reported residual are under our control.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

SparseMatrix = sp.csr_matrix

DEFAULT_RTOL = 1e-12


class SolverError(RuntimeError):
    """CG met a non-finite value or did not converge when convergence was required."""


@dataclass
class SolveStats:
    iterations: int
    residual: float
    converged: bool
    energy_history: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {"iterations": self.iterations, "residual": self.residual,
                "converged": self.converged}


def csr(a) -> SparseMatrix:
    m = sp.csr_matrix(a, dtype=float)
    m.sum_duplicates()
    m.sort_indices()
    return m


def matvec(a: SparseMatrix, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (a.shape[1],):
        raise ValueError(f"vector of length {x.shape} does not match matrix {a.shape}")
    return a @ x


def restrict(a: SparseMatrix, index) -> SparseMatrix:
    """Principal submatrix ``A[index][:, index]``."""
    index = np.asarray(index, dtype=np.int64).ravel()
    n = a.shape[0]
    if index.size and (index.min() < 0 or index.max() >= n):
        raise IndexError(f"restriction indices out of range for a {n}x{n} matrix")
    sub = a[index][:, index]
    return csr(sub)


def is_symmetric(a: SparseMatrix, rtol: float = 1e-13) -> bool:
    scale = abs(a).max() if a.nnz else 0.0
    diff = a - a.T
    return (abs(diff).max() if diff.nnz else 0.0) <= rtol * scale


def default_maxit(n: int) -> int:
    return max(1, int(math.ceil(20 * math.sqrt(n))))


def cg_solve(
    a: SparseMatrix,
    b: np.ndarray,
    rtol: float = DEFAULT_RTOL,
    maxit: int | None = None,
    x0: np.ndarray | None = None,
    monitor: bool = False,
) -> tuple[np.ndarray, SolveStats]:
    """Solve ``A x = b`` for symmetric positive definite ``A``.

    Jacobi-preconditioned CG, stopping when the recurrence residual drops
    below ``rtol * ||b||``; the reported residual is the true
    ``||b - A x|| / ||b||`` recomputed at exit. With ``monitor`` the quadratic
    energy ``x.A x / 2 - b.x`` of each iterate is recorded; it differs from
    half the squared energy-norm error by a constant, so it must not increase.

    Raises
    ------
    SolverError
        If a non-finite value appears.
    """
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    if a.shape != (n, n):
        raise ValueError(f"matrix {a.shape} does not match rhs of length {n}")
    if not np.all(np.isfinite(b)):
        raise SolverError("non-finite right-hand side")
    maxit = default_maxit(n) if maxit is None else maxit
    bnorm = float(np.linalg.norm(b))
    if n == 0 or bnorm == 0.0:
        return np.zeros(n), SolveStats(0, 0.0, True)

    diag = a.diagonal()
    if np.any(diag <= 0) or not np.all(np.isfinite(diag)):
        raise SolverError("Jacobi preconditioner needs a positive finite diagonal")
    inv_diag = 1.0 / diag

    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - a @ x
    history = []
    if monitor:
        history.append(float(0.5 * x @ (b - r) - b @ x))
    target = rtol * bnorm
    rnorm = float(np.linalg.norm(r))
    it = 0
    if rnorm > target:
        z = inv_diag * r
        p = z.copy()
        rz = float(r @ z)
        while it < maxit:
            ap = a @ p
            pap = float(p @ ap)
            if not math.isfinite(pap) or pap <= 0.0:
                if not math.isfinite(pap):
                    raise SolverError(f"non-finite curvature at iteration {it}")
                break
            alpha = rz / pap
            x += alpha * p
            r -= alpha * ap
            it += 1
            if monitor:
                history.append(float(0.5 * x @ (b - r) - b @ x))
            rnorm = float(np.linalg.norm(r))
            if not math.isfinite(rnorm):
                raise SolverError(f"non-finite residual at iteration {it}")
            if rnorm <= target:
                # recurrence residual drifts from the true one; restart from it
                r = b - a @ x
                rnorm = float(np.linalg.norm(r))
                if rnorm <= target:
                    break
                z = inv_diag * r
                p = z.copy()
                rz = float(r @ z)
                continue
            z = inv_diag * r
            rz_new = float(r @ z)
            p *= rz_new / rz
            p += z
            rz = rz_new

    if not np.all(np.isfinite(x)):
        raise SolverError("non-finite solution")
    true_res = float(np.linalg.norm(b - a @ x)) / bnorm
    return x, SolveStats(it, true_res, true_res <= rtol, history)


def write_triplets(a: SparseMatrix, path) -> None:
    """Dump ``n nnz`` then ``i j v`` lines (0-based)."""
    coo = a.tocoo()
    with open(path, "w") as fh:
        fh.write(f"{a.shape[0]} {a.nnz}\n")
        for i, j, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{i} {j} {v:.17g}\n")


def read_triplets(path) -> SparseMatrix:
    with open(path) as fh:
        n, nnz = (int(t) for t in fh.readline().split())
        data = np.loadtxt(fh, ndmin=2) if nnz else np.zeros((0, 3))
    return csr(sp.coo_matrix((data[:, 2], (data[:, 0].astype(int), data[:, 1].astype(int))),
                             shape=(n, n)))
