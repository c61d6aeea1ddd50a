"""Simplex quadrature by collapsed (conical) Gauss-Jacobi products.

An ``m``-point-per-direction rule integrates polynomials of degree ``2m - 1``
exactly on the reference triangle or tetrahedron and has strictly positive
weights. Weights are normalised to sum to the reference measure (1/2 or 1/6).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi


@dataclass(frozen=True)
class QuadratureRule:
    """Barycentric points (Q, d+1), weights (Q,) and exactness degree."""

    points: np.ndarray
    weights: np.ndarray
    degree: int

    @property
    def dim(self) -> int:
        return self.points.shape[1] - 1


def _gauss_jacobi01(m: int, alpha: int) -> tuple[np.ndarray, np.ndarray]:
    # nodes on [0, 1] for weight (1 - t)**alpha
    t, w = roots_jacobi(m, alpha, 0)
    return (1.0 + t) / 2.0, w / 2.0 ** (alpha + 1)


@lru_cache(maxsize=None)
def triangle_rule(degree: int = 4) -> QuadratureRule:
    m = max(1, (degree + 2) // 2)
    a, wa = _gauss_jacobi01(m, 1)
    b, wb = _gauss_jacobi01(m, 0)
    A, B = np.meshgrid(a, b, indexing="ij")
    x = A.ravel()
    y = (B * (1.0 - A)).ravel()
    w = np.outer(wa, wb).ravel()
    pts = np.column_stack([1.0 - x - y, x, y])
    return QuadratureRule(pts, w, 2 * m - 1)


@lru_cache(maxsize=None)
def tet_rule(degree: int = 4) -> QuadratureRule:
    m = max(1, (degree + 2) // 2)
    a, wa = _gauss_jacobi01(m, 2)
    b, wb = _gauss_jacobi01(m, 1)
    c, wc = _gauss_jacobi01(m, 0)
    A, B, C = np.meshgrid(a, b, c, indexing="ij")
    x = A.ravel()
    y = (B * (1.0 - A)).ravel()
    z = (C * (1.0 - A) * (1.0 - B)).ravel()
    w = (wa[:, None, None] * wb[None, :, None] * wc[None, None, :]).ravel()
    pts = np.column_stack([1.0 - x - y - z, x, y, z])
    return QuadratureRule(pts, w, 2 * m - 1)


@lru_cache(maxsize=None)
def barycentric_lattice(dim: int, order: int) -> np.ndarray:
    """All barycentric points ``k / order`` of a ``dim``-simplex (vertices included)."""
    pts = []

    def rec(prefix, left, slots):
        if slots == 1:
            pts.append(prefix + [left])
            return
        for k in range(left + 1):
            rec(prefix + [k], left - k, slots - 1)

    rec([], order, dim + 1)
    return np.array(pts, dtype=float) / order
