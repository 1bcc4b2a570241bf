"""Admissible paths, their compositions and reparameterizations, and homotopy
fields with the generating ODE and residual checks.

Sampling conventions: a path stores one sample per grid node.  The fiber may
jump at breakpoints; the sample stored at a breakpoint node carries the
right-hand limit, and residuals are always evaluated segment-wise so a jump
never enters a difference quotient.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from .core import ChartAlgebroid
from .errors import AdmissibilityWarning, CompositionError
from .numerics import TimeGrid, grid_derivative

__all__ = [
    "EPath",
    "HomotopyField",
    "HomotopyReport",
    "admissibility_residual",
    "compose_paths",
    "reparameterize_unit",
    "null_path",
    "homotopy_residual",
    "generate_infinitesimal_homotopy",
    "shrink_homotopy",
    "bracket_bound",
]


@dataclass(frozen=True)
class EPath:
    """Sampled path: base points x(t) in R^n and fiber vectors a(t) in R^m."""

    grid: TimeGrid
    base: np.ndarray   # (N, n)
    fiber: np.ndarray  # (N, m)

    def __post_init__(self):
        base = np.atleast_2d(np.asarray(self.base, dtype=float))
        fiber = np.atleast_2d(np.asarray(self.fiber, dtype=float))
        n_nodes = self.grid.n_nodes
        if base.shape[0] != n_nodes or fiber.shape[0] != n_nodes:
            raise ValueError(f"sample rows ({base.shape[0]}, {fiber.shape[0]}) "
                             f"do not match the {n_nodes} grid nodes")
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "fiber", fiber)

    @property
    def base_dim(self) -> int:
        return self.base.shape[1]

    @property
    def fiber_dim(self) -> int:
        return self.fiber.shape[1]

    def base_at(self, t) -> np.ndarray:
        """Linear interpolation of the (continuous) base curve."""
        scalar = np.isscalar(t) or np.asarray(t).ndim == 0
        t = np.atleast_1d(np.asarray(t, dtype=float))
        nodes = self.grid.nodes
        out = np.empty(t.shape + (self.base_dim,))
        for j in range(self.base_dim):
            out[:, j] = np.interp(t, nodes, self.base[:, j])
        return out[0] if scalar else out

    def fiber_at(self, t) -> np.ndarray:
        """Segment-respecting linear interpolation; right-continuous at breakpoints."""
        scalar = np.isscalar(t) or np.asarray(t).ndim == 0
        t = np.atleast_1d(np.asarray(t, dtype=float))
        nodes = self.grid.nodes
        out = np.empty(t.shape + (self.fiber_dim,))
        bps = np.asarray(self.grid.breakpoints)
        seg_of_t = np.searchsorted(bps, t, side="right")
        for s, (i0, i1) in enumerate(self.grid.segment_bounds):
            mask = seg_of_t == s
            if not mask.any():
                continue
            seg_nodes = nodes[i0:i1 + 1]
            for j in range(self.fiber_dim):
                out[mask, j] = np.interp(t[mask], seg_nodes, self.fiber[i0:i1 + 1, j])
        return out[0] if scalar else out


def null_path(alg: ChartAlgebroid, x0: np.ndarray, t0: float = 0.0, t1: float = 1.0,
              step: float = 0.1) -> EPath:
    """The zero path sitting at a fixed base point."""
    grid = TimeGrid(t0, t1, step)
    n = grid.n_nodes
    base = np.tile(np.asarray(x0, dtype=float), (n, 1))
    return EPath(grid, base, np.zeros((n, alg.fiber_dim)))


def admissibility_residual(alg: ChartAlgebroid, path: EPath) -> float:
    """Max over interior nodes of |xdot - rho(x) a|.

    xdot comes from segment-wise central differences (one-sided at
    breakpoints); the two boundary nodes of the whole interval are excluded.
    """
    if path.grid.n_nodes < 3:
        raise ValueError("need at least 3 grid nodes")
    dx = grid_derivative(path.grid, path.base)
    worst = 0.0
    for k in range(1, path.grid.n_nodes - 1):
        rho = alg.anchor_at(path.base[k])
        worst = max(worst, float(np.linalg.norm(dx[k] - rho @ path.fiber[k])))
    return worst


def compose_paths(p: EPath, q: EPath, tol: float = 1e-9) -> EPath:
    """Concatenate q after p, shifting q in time; the joint becomes a breakpoint."""
    gap = float(np.linalg.norm(p.base[-1] - q.base[0]))
    if gap > tol:
        raise CompositionError(gap)
    shift = p.grid.t1 - q.grid.t0
    nodes = np.concatenate([p.grid.nodes, q.grid.nodes[1:] + shift])
    breakpoints = (*p.grid.breakpoints, p.grid.t1,
                   *(b + shift for b in q.grid.breakpoints))
    grid = TimeGrid.from_nodes(nodes, breakpoints, step=max(p.grid.step, q.grid.step))
    base = np.vstack([p.base, q.base[1:]])
    fiber = np.vstack([p.fiber[:-1], q.fiber])
    return EPath(grid, base, fiber)


def reparameterize_unit(p: EPath) -> EPath:
    """Affine reparameterization onto [0, 1] with fiber rescaled by the duration.

    The new samples are abar(t) = (t1 - t0) a(t0 + (t1 - t0) t); node times map
    exactly, so no interpolation happens.
    """
    t0, t1 = p.grid.t0, p.grid.t1
    span = t1 - t0
    nodes = (p.grid.nodes - t0) / span
    breakpoints = tuple((b - t0) / span for b in p.grid.breakpoints)
    grid = TimeGrid.from_nodes(nodes, breakpoints, step=p.grid.step / span)
    return EPath(grid, p.base.copy(), span * p.fiber)


# ---------------------------------------------------------------------------
# Homotopy fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HomotopyField:
    """Two-parameter family over (t, eps): base x, t-direction fiber a, and the
    infinitesimal-deformation fiber b (may be absent until generated)."""

    t_grid: TimeGrid
    eps_nodes: np.ndarray       # (E,)
    base: np.ndarray            # (T, E, n)
    a: np.ndarray               # (T, E, m)
    b: np.ndarray | None = None  # (T, E, m)

    def __post_init__(self):
        eps = np.asarray(self.eps_nodes, dtype=float)
        T, E = self.t_grid.n_nodes, len(eps)
        for name, arr in (("base", self.base), ("a", self.a)):
            arr = np.asarray(arr, dtype=float)
            if arr.shape[:2] != (T, E):
                raise ValueError(f"{name} has leading shape {arr.shape[:2]}, expected {(T, E)}")
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "eps_nodes", eps)
        if self.b is not None:
            b = np.asarray(self.b, dtype=float)
            if b.shape != self.a.shape:
                raise ValueError("b must match the shape of a")
            object.__setattr__(self, "b", b)


@dataclass(frozen=True)
class HomotopyReport:
    equation_residual: float
    t_admissibility: float
    eps_admissibility: float

    @property
    def max_residual(self) -> float:
        return max(self.equation_residual, self.t_admissibility, self.eps_admissibility)


def _eps_gradient(eps_nodes: np.ndarray, values: np.ndarray) -> np.ndarray:
    edge = 2 if len(eps_nodes) >= 3 else 1
    return np.gradient(values, eps_nodes, axis=1, edge_order=edge)


def _structure_cache(alg: ChartAlgebroid):
    """Structure lookup with a fast path for point-based charts (n = 0)."""
    if alg.base_dim == 0:
        c0 = alg.structure_at(np.zeros(0))
        return lambda x: c0
    return alg.structure_at


def homotopy_residual(alg: ChartAlgebroid, field: HomotopyField) -> HomotopyReport:
    """Residual of  d_t b = d_eps a + c(x)[b, a]  plus the two admissibility defects.

    Partials are central differences (segment-wise in t); the maxima run over
    grid points interior in both directions.
    """
    if field.b is None:
        raise ValueError("field has no b component")
    T, E, m = field.a.shape
    n = field.base.shape[2]
    db_dt = grid_derivative(field.t_grid, field.b.reshape(T, E * m)).reshape(T, E, m)
    da_de = _eps_gradient(field.eps_nodes, field.a)
    dx_dt = grid_derivative(field.t_grid, field.base.reshape(T, E * n)).reshape(T, E, n)
    dx_de = _eps_gradient(field.eps_nodes, field.base)
    structure = _structure_cache(alg)

    eq_worst = 0.0
    t_adm = 0.0
    e_adm = 0.0
    for it in range(1, T - 1):
        for ie in range(1, E - 1):
            x = field.base[it, ie]
            c = structure(x)
            res = db_dt[it, ie] - da_de[it, ie] - np.einsum("ijk,j,k->i", c, field.b[it, ie],
                                                            field.a[it, ie])
            eq_worst = max(eq_worst, float(np.abs(res).max()))
            if n:
                rho = alg.anchor_at(x)
                t_adm = max(t_adm, float(np.linalg.norm(dx_dt[it, ie] - rho @ field.a[it, ie])))
                e_adm = max(e_adm, float(np.linalg.norm(dx_de[it, ie] - rho @ field.b[it, ie])))
    return HomotopyReport(eq_worst, t_adm, e_adm)


def generate_infinitesimal_homotopy(alg: ChartAlgebroid, field: HomotopyField,
                                    b0: np.ndarray,
                                    warn_threshold: float = 1e-3
                                    ) -> tuple[HomotopyField, float]:
    """Integrate  d_t b = d_eps a + c(x)[b, a],  b(t0, eps) = b0(eps).

    Requires a t-admissible family a over base x and a rho-admissible b0 over
    x(t0, .).  Returns the completed field together with the monitor

        chi = max |d_eps x - rho(x) b| ,

    which stays at discretization level exactly when the chart is almost Lie;
    a warning is emitted when it exceeds ``warn_threshold``.
    """
    T, E, m = field.a.shape
    n = field.base.shape[2]
    b0 = np.asarray(b0, dtype=float)
    if b0.shape != (E, m):
        raise ValueError(f"b0 has shape {b0.shape}, expected {(E, m)}")
    da_de = _eps_gradient(field.eps_nodes, field.a)
    structure = _structure_cache(alg)
    nodes = field.t_grid.nodes

    def rhs(x_lv, a_lv, da_lv, B):
        out = np.empty_like(B)
        for e in range(E):
            c = structure(x_lv[e])
            out[e] = da_lv[e] + np.einsum("ijk,j,k->i", c, B[e], a_lv[e])
        return out

    b = np.empty((T, E, m))
    B = b0.copy()
    b[0] = B
    for i0, i1 in field.t_grid.segment_bounds:
        for k in range(i0, i1):
            h = nodes[k + 1] - nodes[k]
            x_l, x_r = field.base[k], field.base[k + 1]
            a_l, a_r = field.a[k], field.a[k + 1]
            d_l, d_r = da_de[k], da_de[k + 1]
            x_m, a_m, d_m = 0.5 * (x_l + x_r), 0.5 * (a_l + a_r), 0.5 * (d_l + d_r)
            k1 = rhs(x_l, a_l, d_l, B)
            k2 = rhs(x_m, a_m, d_m, B + (h / 2.0) * k1)
            k3 = rhs(x_m, a_m, d_m, B + (h / 2.0) * k2)
            k4 = rhs(x_r, a_r, d_r, B + h * k3)
            B = B + h * ((k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0)
            if not np.all(np.isfinite(B)):
                from .errors import IntegrationDivergedError
                raise IntegrationDivergedError(nodes[k + 1])
            b[k + 1] = B

    chi = 0.0
    if n:
        dx_de = _eps_gradient(field.eps_nodes, field.base)
        for it in range(T):
            for ie in range(E):
                rho = alg.anchor_at(field.base[it, ie])
                chi = max(chi, float(np.linalg.norm(dx_de[it, ie] - rho @ b[it, ie])))
    if chi > warn_threshold:
        warnings.warn(f"base-admissibility monitor reached {chi:.3g}; "
                      "the chart may fail the anchor-morphism axiom or the inputs "
                      "may be inadmissible", AdmissibilityWarning)
    out = replace(field, b=b)
    return out, chi


def shrink_homotopy(alg: ChartAlgebroid, p: EPath, n_t: int = 33,
                    n_eps: int = 33) -> HomotopyField:
    """Deformation shrinking a unit-interval path to its start point.

    Samples abar(t, eps) = eps a(t eps) and bbar(t, eps) = t a(t eps) over the
    base x(t eps).  The eps = 0 slice is the null path, the eps = 1 slice is
    the original; the initial infinitesimal deformation vanishes and the final
    one equals a.  Residual checks of the output assume p is sampled from a C1
    curve; fiber jumps in p map to discontinuity curves in (t, eps) that the
    strong-form residual does not account for.
    """
    if abs(p.grid.t0) > 1e-12 or abs(p.grid.t1 - 1.0) > 1e-12:
        raise ValueError("path must be parameterized by [0, 1]; "
                         "apply reparameterize_unit first")
    t_grid = TimeGrid(0.0, 1.0, 1.0 / (n_t - 1))
    eps = np.linspace(0.0, 1.0, n_eps)
    ts = t_grid.nodes
    tt, ee = np.meshgrid(ts, eps, indexing="ij")
    s = (tt * ee).ravel()
    a_s = p.fiber_at(s).reshape(len(ts), n_eps, p.fiber_dim)
    x_s = p.base_at(s).reshape(len(ts), n_eps, p.base_dim)
    a_field = ee[..., None] * a_s
    b_field = tt[..., None] * a_s
    return HomotopyField(t_grid, eps, x_s, a_field, b_field)


def bracket_bound(alg: ChartAlgebroid, points) -> float:
    """Frobenius bound on the bracket: |c[u, v]| <= bound * |u| * |v| on the samples."""
    from .core import as_sample_points

    worst = 0.0
    for x in as_sample_points(points, alg.base_dim):
        worst = max(worst, float(np.sqrt((alg.structure_at(x) ** 2).sum())))
    return worst
