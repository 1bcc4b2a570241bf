"""Single-chart almost Lie algebroids: structure functions, axiom checks, lifts.

A chart is the coordinate data of an anchored vector bundle over an open
subset of R^n with fiber R^m: an anchor field rho(x) of shape (n, m) with
entries rho^a_i, and a structure field c(x) of shape (m, m, m) with entries
c^i_jk giving the bracket [e_j, e_k] = c^i_jk e_i.  The chart is *almost Lie*
when c is skew in its lower pair and the anchor intertwines brackets,

    (d_b rho^a_k) rho^b_j - (d_b rho^a_j) rho^b_k = rho^a_i c^i_jk ,

which :func:`validate_anchor_morphism` certifies on sample points.  The
Jacobi identity is never assumed or checked.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .numerics import finite_difference_jacobian

__all__ = [
    "ChartAlgebroid",
    "Section",
    "ExtendedAlgebroid",
    "ValidationReport",
    "anchor_apply",
    "validate_skew",
    "as_sample_points",
    "validate_anchor_morphism",
    "morphism_residual",
    "tangent_lift_section",
    "hamiltonian_vector_field",
    "product_with_time",
    "tangent_bundle",
    "lie_algebra",
    "so3_structure",
    "so3_algebra",
    "atiyah_trivial",
    "affine_matrix_field",
]

_DEFAULT_FD_STEP = 1e-5


@dataclass(frozen=True)
class ChartAlgebroid:
    """Anchored bundle chart with callable structure data.

    anchor(x) -> (base_dim, fiber_dim) array rho^a_i
    structure(x) -> (fiber_dim,) * 3 array c^i_jk
    anchor_jacobian(x) -> (base_dim, fiber_dim, base_dim) array d rho^a_i / d x^b
    """

    base_dim: int
    fiber_dim: int
    anchor: Callable[[np.ndarray], np.ndarray]
    structure: Callable[[np.ndarray], np.ndarray]
    anchor_jacobian: Callable[[np.ndarray], np.ndarray] | None = None
    name: str = ""

    def __post_init__(self):
        if self.base_dim < 0 or self.fiber_dim <= 0:
            raise ValueError("need base_dim >= 0 and fiber_dim >= 1")

    def anchor_at(self, x: np.ndarray) -> np.ndarray:
        rho = np.asarray(self.anchor(np.asarray(x, dtype=float)), dtype=float)
        if rho.shape != (self.base_dim, self.fiber_dim):
            raise ValueError(f"anchor returned shape {rho.shape}, "
                             f"expected {(self.base_dim, self.fiber_dim)}")
        return rho

    def structure_at(self, x: np.ndarray) -> np.ndarray:
        c = np.asarray(self.structure(np.asarray(x, dtype=float)), dtype=float)
        m = self.fiber_dim
        if c.shape != (m, m, m):
            raise ValueError(f"structure returned shape {c.shape}, expected {(m, m, m)}")
        return c

    def bracket(self, x: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        """[u, v]^i = c^i_jk u^j v^k at the point x."""
        return np.einsum("ijk,j,k->i", self.structure_at(x), u, v)

    def anchor_jacobian_at(self, x: np.ndarray, fd_step: float = _DEFAULT_FD_STEP) -> np.ndarray:
        if self.anchor_jacobian is not None:
            jac = np.asarray(self.anchor_jacobian(np.asarray(x, dtype=float)), dtype=float)
            expected = (self.base_dim, self.fiber_dim, self.base_dim)
            if jac.shape != expected:
                raise ValueError(f"anchor jacobian returned shape {jac.shape}, expected {expected}")
            return jac
        flat = finite_difference_jacobian(lambda p: self.anchor_at(p).ravel(), x, fd_step)
        return flat.reshape(self.base_dim, self.fiber_dim, self.base_dim)


@dataclass(frozen=True)
class Section:
    """A section of the bundle: x -> fiber vector, with an optional Jacobian."""

    eval: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray] | None = None

    def value(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(self.eval(np.asarray(x, dtype=float)), dtype=float)

    def jacobian_at(self, x: np.ndarray, fd_step: float = _DEFAULT_FD_STEP) -> np.ndarray:
        if self.jacobian is not None:
            return np.asarray(self.jacobian(np.asarray(x, dtype=float)), dtype=float)
        return finite_difference_jacobian(lambda p: self.value(p), x, fd_step)

    @classmethod
    def constant(cls, v: np.ndarray) -> "Section":
        v = np.asarray(v, dtype=float)
        return cls(eval=lambda x: v, jacobian=lambda x: np.zeros((v.size, np.asarray(x).size)))


@dataclass(frozen=True)
class ValidationReport:
    check: str
    max_violation: float
    tol: float
    passed: bool
    n_points: int
    box_lo: tuple[float, ...]
    box_hi: tuple[float, ...]

    def to_dict(self) -> dict:
        return {
            "name": self.check,
            "value": self.max_violation,
            "tolerance": self.tol,
            "passed": self.passed,
            "n_points": self.n_points,
            "sample_box": [list(self.box_lo), list(self.box_hi)],
        }


def _sample_box(points: np.ndarray) -> tuple[tuple[float, ...], tuple[float, ...]]:
    if points.size == 0:
        return (), ()
    return tuple(points.min(axis=0)), tuple(points.max(axis=0))


def as_sample_points(points, base_dim: int) -> np.ndarray:
    """Normalize sample points to shape (count, base_dim); over a point base
    any input collapses to a single empty sample per row."""
    arr = np.asarray(points, dtype=float)
    if base_dim == 0:
        count = arr.shape[0] if arr.ndim >= 1 and arr.shape[0] else 1
        return np.zeros((count, 0))
    return np.atleast_2d(arr.reshape(-1, base_dim))


def anchor_apply(alg: ChartAlgebroid, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Base velocity rho^a_i(x) y^i of the fiber vector y at x."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != (alg.base_dim,):
        raise ValueError(f"base point has shape {x.shape}, expected {(alg.base_dim,)}")
    if y.shape != (alg.fiber_dim,):
        raise ValueError(f"fiber vector has shape {y.shape}, expected {(alg.fiber_dim,)}")
    return alg.anchor_at(x) @ y


def validate_skew(alg: ChartAlgebroid, sample_points, tol: float) -> ValidationReport:
    """Max of |c^i_jk + c^i_kj| over the samples; passes iff <= tol."""
    if not (tol > 0):
        raise ValueError("tol must be positive")
    pts = as_sample_points(sample_points, alg.base_dim)
    worst = 0.0
    for x in pts:
        c = alg.structure_at(x)
        worst = max(worst, float(np.abs(c + np.swapaxes(c, 1, 2)).max()))
    lo, hi = _sample_box(pts)
    return ValidationReport("skew_symmetry", worst, tol, worst <= tol, len(pts), lo, hi)


def morphism_residual(alg: ChartAlgebroid, x: np.ndarray,
                      fd_step: float = _DEFAULT_FD_STEP) -> np.ndarray:
    """Pointwise residual (d_b rho^a_k) rho^b_j - (d_b rho^a_j) rho^b_k - rho^a_i c^i_jk."""
    rho = alg.anchor_at(x)
    drho = alg.anchor_jacobian_at(x, fd_step)
    c = alg.structure_at(x)
    res = np.einsum("akb,bj->ajk", drho, rho)
    res -= np.einsum("ajb,bk->ajk", drho, rho)
    res -= np.einsum("ai,ijk->ajk", rho, c)
    return res


def validate_anchor_morphism(alg: ChartAlgebroid, sample_points, fd_step: float,
                             tol: float) -> ValidationReport:
    """Check that the anchor is a bracket morphism on the sample points."""
    if not (fd_step > 0 and tol > 0):
        raise ValueError("fd_step and tol must be positive")
    pts = as_sample_points(sample_points, alg.base_dim)
    worst = 0.0
    for x in pts:
        res = morphism_residual(alg, x, fd_step)
        if res.size:
            worst = max(worst, float(np.abs(res).max()))
    lo, hi = _sample_box(pts)
    return ValidationReport("anchor_morphism", worst, tol, worst <= tol, len(pts), lo, hi)


def tangent_lift_section(alg: ChartAlgebroid, f: Section, x: np.ndarray,
                         y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Complete lift of the section f, evaluated at the fiber point (x, y).

    Returns the (xdot, ydot) components of the linear vector field

        xdot^a = rho^a_i f^i ,
        ydot^k = rho^a_i y^i df^k/dx^a + c^k_ij y^i f^j .
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    rho = alg.anchor_at(x)
    fx = f.value(x)
    if fx.shape != (alg.fiber_dim,) or y.shape != (alg.fiber_dim,):
        raise ValueError("fiber dimension mismatch")
    jac = f.jacobian_at(x)
    xdot = rho @ fx
    ydot = jac @ (rho @ y) + alg.bracket(x, y, fx)
    return xdot, ydot


def hamiltonian_vector_field(alg: ChartAlgebroid, h, x: np.ndarray, xi: np.ndarray,
                             grad_x=None, grad_xi=None,
                             fd_step: float = _DEFAULT_FD_STEP) -> tuple[np.ndarray, np.ndarray]:
    """Hamiltonian vector field of h(x, xi) on the dual bundle chart.

        xdot^b  = rho^b_i dh/dxi_i ,
        xidot_j = c^k_ij xi_k dh/dxi_i - rho^a_j dh/dx^a .

    Partials come from ``grad_x`` / ``grad_xi`` when given, otherwise from
    central differences with step ``fd_step``.
    """
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    if grad_xi is not None:
        dh_dxi = np.asarray(grad_xi(x, xi), dtype=float)
    else:
        dh_dxi = finite_difference_jacobian(lambda p: h(x, p), xi, fd_step)[0]
    if grad_x is not None:
        dh_dx = np.asarray(grad_x(x, xi), dtype=float)
    elif alg.base_dim:
        dh_dx = finite_difference_jacobian(lambda p: h(p, xi), x, fd_step)[0]
    else:
        dh_dx = np.zeros(0)
    rho = alg.anchor_at(x)
    c = alg.structure_at(x)
    xdot = rho @ dh_dxi
    xidot = np.einsum("kij,k,i->j", c, xi, dh_dxi) - rho.T @ dh_dx
    return xdot, xidot


@dataclass(frozen=True)
class ExtendedAlgebroid:
    """Product of the trivial line algebroid with a chart.

    Base coordinate 0 is the extra real coordinate, fiber coordinate 0 the
    extra rate direction; its anchor block is the 1x1 identity and structure
    slices touching index 0 vanish.
    """

    inner: ChartAlgebroid
    original: ChartAlgebroid

    def split_base(self, xx: np.ndarray) -> tuple[float, np.ndarray]:
        xx = np.asarray(xx, dtype=float)
        return float(xx[0]), xx[1:]

    def embed_base(self, x0: float, x: np.ndarray) -> np.ndarray:
        return np.concatenate(([float(x0)], np.asarray(x, dtype=float)))

    def split_fiber(self, yy: np.ndarray) -> tuple[float, np.ndarray]:
        yy = np.asarray(yy, dtype=float)
        return float(yy[0]), yy[1:]


def product_with_time(alg: ChartAlgebroid) -> ExtendedAlgebroid:
    """Prepend a trivial real direction to both base and fiber."""
    n, m = alg.base_dim, alg.fiber_dim

    def anchor(xx):
        out = np.zeros((n + 1, m + 1))
        out[0, 0] = 1.0
        out[1:, 1:] = alg.anchor_at(xx[1:])
        return out

    def structure(xx):
        out = np.zeros((m + 1, m + 1, m + 1))
        out[1:, 1:, 1:] = alg.structure_at(xx[1:])
        return out

    jac = None
    if alg.anchor_jacobian is not None:
        def jac(xx):
            out = np.zeros((n + 1, m + 1, n + 1))
            out[1:, 1:, 1:] = alg.anchor_jacobian_at(xx[1:])
            return out

    inner = ChartAlgebroid(n + 1, m + 1, anchor, structure, anchor_jacobian=jac,
                           name=f"time-extended({alg.name})" if alg.name else "time-extended")
    return ExtendedAlgebroid(inner=inner, original=alg)


# ---------------------------------------------------------------------------
# Built-in charts
# ---------------------------------------------------------------------------

def tangent_bundle(n: int) -> ChartAlgebroid:
    """The tangent bundle of R^n: identity anchor, zero bracket."""
    eye = np.eye(n)
    zero_c = np.zeros((n, n, n))
    zero_jac = np.zeros((n, n, n))
    return ChartAlgebroid(n, n, lambda x: eye, lambda x: zero_c,
                          anchor_jacobian=lambda x: zero_jac, name=f"TR^{n}")


def lie_algebra(table: np.ndarray, name: str = "lie-algebra") -> ChartAlgebroid:
    """Bundle over a point with zero anchor and constant structure table.

    The table must be skew in its lower index pair; any skew table is
    accepted (the Jacobi identity is not required).
    """
    table = np.asarray(table, dtype=float)
    if table.ndim != 3 or len(set(table.shape)) != 1:
        raise ValueError("structure table must have shape (m, m, m)")
    if np.abs(table + np.swapaxes(table, 1, 2)).max() > 1e-12:
        raise ValueError("structure table is not skew in its lower indices")
    m = table.shape[0]
    zero_anchor = np.zeros((0, m))
    return ChartAlgebroid(0, m, lambda x: zero_anchor, lambda x: table,
                          anchor_jacobian=lambda x: np.zeros((0, m, 0)), name=name)


def so3_structure() -> np.ndarray:
    """Structure constants of so(3): c^i_jk = eps_ijk."""
    eps = np.zeros((3, 3, 3))
    for i, j, k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        eps[i, j, k] = 1.0
        eps[i, k, j] = -1.0
    return eps


def so3_algebra() -> ChartAlgebroid:
    return lie_algebra(so3_structure(), name="so3")


def atiyah_trivial(base_dim: int, table: np.ndarray, name: str = "atiyah") -> ChartAlgebroid:
    """Trivialized Atiyah chart TM x g over R^base_dim.

    Fiber coordinates are (base-velocity part, algebra part); the anchor is
    [I | 0] and the bracket acts on the algebra block only.
    """
    table = np.asarray(table, dtype=float)
    k = table.shape[0]
    n = base_dim
    m = n + k
    rho = np.zeros((n, m))
    rho[:, :n] = np.eye(n)
    c = np.zeros((m, m, m))
    c[n:, n:, n:] = table
    return ChartAlgebroid(n, m, lambda x: rho, lambda x: c,
                          anchor_jacobian=lambda x: np.zeros((n, m, n)), name=name)


def affine_matrix_field(const: np.ndarray, linear: np.ndarray | None = None):
    """Matrix field x -> const + linear @ x from polynomial coefficients.

    ``const`` has the matrix shape, ``linear`` one trailing axis for x.
    Returns (field, jacobian_field).
    """
    const = np.asarray(const, dtype=float)
    if linear is None:
        jac_shape = const.shape + (0,)

        def field(x):
            return const

        def jac(x):
            return np.zeros(const.shape + (np.asarray(x).size,))

        return field, jac
    linear = np.asarray(linear, dtype=float)
    if linear.shape[:-1] != const.shape:
        raise ValueError("linear coefficient shape must extend the constant shape")

    def field(x):
        return const + linear @ np.asarray(x, dtype=float)

    def jac(x):
        return linear

    return field, jac
