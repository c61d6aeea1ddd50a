"""Catalog of test functions and their continuous extensions to a box.

The extension of ``u`` used by the auxiliary problem is

    utilde(x) = u(x)                              if x lies in the closed domain
    utilde(x) = chi(x) * clip(u(x), -M, M)        otherwise

with ``M = ||u||_inf`` on the domain and ``chi = max(0, 1 - dist(x, domain)/w)``.
It agrees with ``u`` on the domain bit for bit, vanishes wherever
``dist >= w`` (in particular on the boundary of a box with margin ``>= w``)
and never exceeds ``M`` in magnitude.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .fem import NodalField, ScalarField, field_grad_linf, field_linf
from .mesh import DomainSpec, ExtendedMesh, generate


class Regularity(str, enum.Enum):
    CONT = "cont"  # continuous, gradient square integrable but unbounded
    W1INF = "w1inf"  # Lipschitz
    SMOOTH = "smooth"


@dataclass(frozen=True, eq=False)
class TestFunction:
    """A catalog entry: formula field plus regularity and known sup norms."""

    __test__ = False  # not a pytest class

    name: str
    field: ScalarField
    regularity: Regularity
    exact_linf: float | None = None
    exact_grad_linf: float | None = None
    feature_scale: float | None = None
    params: dict = field(default_factory=dict)

    @property
    def lipschitz(self) -> bool:
        return self.regularity in (Regularity.W1INF, Regularity.SMOOTH)

    def linf(self, mesh) -> float:
        if self.exact_linf is not None:
            return self.exact_linf
        return field_linf(self.field, mesh)

    def grad_linf(self, mesh) -> float:
        if not self.lipschitz:
            raise ValueError(f"{self.name} is not Lipschitz")
        if self.exact_grad_linf is not None:
            return self.exact_grad_linf
        return field_grad_linf(self.field, mesh)

    def w1inf(self, mesh) -> float:
        return max(self.linf(mesh), self.grad_linf(mesh))


def _corner_max(spec: DomainSpec, f) -> float:
    # exact for |f| convex: the max over a union of boxes sits at a cell corner
    return float(np.abs(f(spec.corners())).max())


def _const(c):
    return ScalarField(lambda x: np.full(len(x), float(c)),
                       lambda x: np.zeros((len(x), 3)), name="constant")


def _linear(coef, c0):
    coef = np.asarray(coef, dtype=float)
    return ScalarField(lambda x: c0 + x @ coef,
                       lambda x: np.broadcast_to(coef, (len(x), 3)).copy(), name="linear")


def _quadratic(center):
    center = np.asarray(center, dtype=float)
    return ScalarField(lambda x: np.einsum("ij,ij->i", x - center, x - center),
                       lambda x: 2.0 * (x - center), name="quadratic")


def _sinprod(k, lo):
    w = k * np.pi

    def value(x):
        return np.prod(np.sin(w * (x - lo)), axis=1)

    def grad(x):
        s = np.sin(w * (x - lo))
        c = np.cos(w * (x - lo))
        return w * np.column_stack([c[:, 0] * s[:, 1] * s[:, 2],
                                    s[:, 0] * c[:, 1] * s[:, 2],
                                    s[:, 0] * s[:, 1] * c[:, 2]])

    return ScalarField(value, grad, name="sinprod")


def _boundary_layer(eps, x0):
    def value(x):
        return np.exp(-(x[:, 0] - x0) / eps)

    def grad(x):
        g = np.zeros((len(x), 3))
        g[:, 0] = -value(x) / eps
        return g

    return ScalarField(value, grad, name="boundary_layer")


def _kink(c):
    def value(x):
        return np.abs(x[:, 0] - c) + x[:, 1]

    def grad(x):
        g = np.zeros((len(x), 3))
        g[:, 0] = np.sign(x[:, 0] - c)
        g[:, 1] = 1.0
        return g

    return ScalarField(value, grad, name="kink")


def _corner_power(center, alpha):
    center = np.asarray(center, dtype=float)

    def value(x):
        r = np.linalg.norm(x - center, axis=1)
        return r**alpha

    def grad(x):
        d = x - center
        r = np.linalg.norm(d, axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            f = np.where(r > 0, alpha * r ** (alpha - 2.0), 0.0)
        return d * f[:, None]

    return ScalarField(value, grad, name=f"corner{alpha:.4g}")


def builtin_test_functions(spec: DomainSpec, eps: float = 0.25,
                           kink_at: float | None = None) -> dict[str, TestFunction]:
    """Test functions adapted to the bounding box of ``spec``.

    ``sinprod`` has one half-wave across the largest box extent, ``boundary_layer``
    decays from the face ``x = x_lo`` on scale ``eps``, ``kink`` is
    ``|x - c| + y`` with ``c`` a third into the first cell layer (off every dyadic grid plane), and
    (fichera only) ``corner`` / ``corner_half`` are ``rho**(2/3)`` and
    ``rho**(1/2)`` with rho the distance to the reentrant corner.
    """
    s = spec.scale
    blo, bhi = spec.bounds
    lo = blo * s
    hi = bhi * s
    extent = float((hi - lo).max())
    out = {}

    out["constant"] = TestFunction("constant", _const(1.0), Regularity.SMOOTH, 1.0, 0.0)

    lin = _linear((2.0, -3.0, 1.0), 1.0)
    out["linear"] = TestFunction("linear", lin, Regularity.SMOOTH,
                                 _corner_max(spec, lin), float(np.sqrt(14.0)))

    quad = _quadratic(lo)
    out["quadratic"] = TestFunction("quadratic", quad, Regularity.SMOOTH,
                                    _corner_max(spec, quad),
                                    2.0 * float(np.linalg.norm(spec.corners() - lo, axis=1).max()))

    k = 1.0 / extent
    sin = _sinprod(k, lo)
    peak = lo + extent / 2.0
    exact = 1.0 if spec.contains(peak[None])[0] else None
    edge = peak.copy()
    edge[0] = lo[0]
    exact_g = k * np.pi if spec.contains(edge[None])[0] else None
    out["sinprod"] = TestFunction("sinprod", sin, Regularity.SMOOTH, exact, exact_g,
                                  params={"k": k})

    bl = _boundary_layer(eps, lo[0])
    out["boundary_layer"] = TestFunction("boundary_layer", bl, Regularity.SMOOTH, 1.0,
                                         1.0 / eps, feature_scale=eps, params={"eps": eps})

    c = lo[0] + s / 3.0 if kink_at is None else kink_at
    kink = _kink(c)
    out["kink"] = TestFunction("kink", kink, Regularity.W1INF, _corner_max(spec, kink),
                               float(np.sqrt(2.0)), params={"c": c})

    if spec.name == "fichera":
        center = np.full(3, s)
        far = float(np.linalg.norm(spec.corners() - center, axis=1).max())
        for name, alpha in (("corner", 2.0 / 3.0), ("corner_half", 0.5)):
            out[name] = TestFunction(name, _corner_power(center, alpha), Regularity.CONT,
                                     far**alpha, None, params={"alpha": alpha})
    return out


# --------------------------------------------------------------------------
# Extensions
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ExtensionRecipe:
    """Cutoff width (in cells) and optional clamp bound ``M``."""

    width: float = 1.0
    bound: float | None = None


def _bound_for(u, spec: DomainSpec, recipe: ExtensionRecipe) -> float:
    if recipe.bound is not None:
        return float(recipe.bound)
    if isinstance(u, TestFunction) and u.exact_linf is not None:
        return float(u.exact_linf)
    f = u.field if isinstance(u, TestFunction) else u
    return field_linf(f, generate(spec, 4), order=6)


def build_extension(u, spec: DomainSpec, recipe: ExtensionRecipe = ExtensionRecipe(),
                    margin: int = 1) -> ScalarField:
    """Continuous extension of ``u`` that vanishes at distance ``width`` from the domain.

    Raises
    ------
    ValueError
        If the cutoff width exceeds the box margin.
    """
    if recipe.width > margin:
        raise ValueError(f"cutoff width {recipe.width} exceeds the box margin {margin}")
    if recipe.width <= 0:
        raise ValueError("cutoff width must be positive")
    f = u.field if isinstance(u, TestFunction) else u
    bound = _bound_for(u, spec, recipe)
    width = recipe.width * spec.scale

    def value(x):
        x = np.asarray(x, dtype=float)
        dist = spec.distance(x)
        v = f(x)
        chi = np.clip(1.0 - dist / width, 0.0, 1.0)
        return np.where(dist == 0.0, v, chi * np.clip(v, -bound, bound))

    lo, hi = spec.bounds
    box = ((lo - margin) * spec.scale, (hi + margin) * spec.scale)
    return ScalarField(value, None, box=box, name=f"ext({f.name})")


def discrete_extension(ext: ExtendedMesh, f: NodalField, formula: ScalarField | None = None,
                       width: float = 1.0) -> NodalField:
    """Zero-trace P1 extension of a P1 field on the inner mesh to the box mesh.

    Inner vertices keep their values. Other vertices get
    ``chi(x) * clip(g(x), -M, M)`` where ``g`` is ``formula`` if given, else the
    value at the nearest inner vertex, and ``M = max |f|``.
    """
    spec = ext.inner.spec
    if width > ext.margin:
        raise ValueError(f"cutoff width {width} exceeds the box margin {ext.margin}")
    outer = ext.outer
    vals = np.zeros(outer.num_vertices)
    vals[ext.node_map] = f.values
    rest = np.flatnonzero(~ext.inner_mask)
    x = outer.vertices[rest]
    if formula is not None:
        g = formula(x)
    else:
        _, idx = cKDTree(ext.inner.vertices).query(x)
        g = f.values[idx]
    bound = float(np.abs(f.values).max()) if f.values.size else 0.0
    chi = np.clip(1.0 - spec.distance(x) / (width * spec.scale), 0.0, 1.0)
    vals[rest] = chi * np.clip(g, -bound, bound)
    vals[outer.boundary_nodes] = 0.0
    return NodalField(outer, vals)
