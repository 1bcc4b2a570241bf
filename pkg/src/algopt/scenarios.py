"""Built-in scenarios, fixtures, and the config-driven runner.

Three pipelines ship with the library:

* ``so3-bang-bang``       time-optimal switching between two body-fixed
                          rotation axes, on the zero-anchor so(3) chart;
* ``classical-tm-lq``     scalar linear-quadratic problem on the tangent
                          bundle, with a closed-form oracle;
* ``wong-so3-r2``         energy-minimizing trajectories on a trivialized
                          Atiyah chart TM x so(3) over R^2 with an affine
                          connection, audited against the reduced
                          momentum/internal-momentum equations.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .control import Box, ControlSystem, FiniteSet
from .core import (ChartAlgebroid, affine_matrix_field, atiyah_trivial,
                   lie_algebra, so3_algebra, so3_structure, tangent_bundle,
                   validate_anchor_morphism, validate_skew)
from .errors import ConfigError
from .numerics import grid_derivative
from .pmp import ExtremalAudit, PmpFlow, integrate_pmp_flow, verify_extremal
from .serialize import (write_costate_csv, write_report_json, write_trajectory_csv)

__all__ = [
    "SCHEMA_VERSION",
    "WongFixture",
    "So3ScenarioResult",
    "WongScenarioResult",
    "ClassicalScenarioResult",
    "build_so3_bang_bang_system",
    "scenario_so3_bang_bang",
    "build_wong_system",
    "scenario_wong",
    "build_lq_system",
    "scenario_classical",
    "classical_reduction_residual",
    "SCENARIO_NAMES",
    "default_config",
    "validate_config",
    "build_chart_from_config",
    "run_scenario",
]

SCHEMA_VERSION = 1

SCENARIO_NAMES = ("so3-bang-bang", "classical-tm-lq", "wong-so3-r2")


# ---------------------------------------------------------------------------
# so(3) bang-bang
# ---------------------------------------------------------------------------

def build_so3_bang_bang_system(a, b) -> ControlSystem:
    """Rotation at unit cost about the axis a + u b, u in {-1, +1}."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    alg = so3_algebra()
    return ControlSystem(
        alg=alg,
        f=lambda x, u: a + u[0] * b,
        L=lambda x, u: 1.0,
        control_space=FiniteSet(([-1.0], [1.0])),
        f_jacobian=lambda x, u: np.zeros((3, 0)),
        L_gradient=lambda x, u: np.zeros(0),
    )


@dataclass(frozen=True)
class So3ScenarioResult:
    flow: PmpFlow
    audit: ExtremalAudit
    switching_violations: int
    casimir_drift: float
    costate_residual: float
    singular: bool

    def checks(self, tol: float) -> list[dict]:
        return [
            _check("maximum_condition", self.audit.max_condition_violation, tol),
            _check("switching_law_violations", float(self.switching_violations), 0.0),
            _check("hamiltonian_zero", self.audit.h_drift, 1e-6),
            _check("casimir_drift", self.casimir_drift, 1e-8),
            _check("costate_equation", self.costate_residual, 1e-6),
        ]


def scenario_so3_bang_bang(a, b, z_init, z0: float = -1.0, horizon: float = 10.0,
                           step: float = 1e-3, tol: float = 1e-5) -> So3ScenarioResult:
    """Run the two-axis time-optimal pipeline and audit the switching law
    u = sgn<z, b>, the zero Hamiltonian level, the conserved |z|, and the
    costate equation zdot_j = c^k_ij (a^i + u b^i) z_k."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    sys = build_so3_bang_bang_system(a, b)
    flow = integrate_pmp_flow(sys, np.zeros(0), z_init, z0, 0.0, horizon, step=step)
    audit = verify_extremal(sys, flow.path, flow.control, flow.costate,
                            mode="free-time", tol=tol, u_nodes=flow.u_nodes)

    nodes = flow.path.grid.nodes
    sigma = flow.costate.z @ b
    bset = set(flow.switch_times)
    violations = 0
    for k, t in enumerate(nodes):
        if t in bset or sigma[k] == 0.0:
            continue
        if flow.u_nodes[k][0] != np.sign(sigma[k]):
            violations += 1
    singular = bool(np.max(np.abs(sigma)) < 1e-12)

    norms = np.linalg.norm(flow.costate.z, axis=1)
    casimir_drift = float(np.abs(norms - norms[0]).max())

    eps = so3_structure()
    dz = grid_derivative(flow.path.grid, flow.costate.z)
    residual = 0.0
    for i0, i1 in flow.path.grid.segment_bounds:
        for k in range(i0 + 1, i1):
            f = a + flow.u_nodes[k][0] * b
            rhs = np.einsum("kij,i,k->j", eps, f, flow.costate.z[k])
            residual = max(residual, float(np.abs(dz[k] - rhs).max()))

    return So3ScenarioResult(flow, audit, violations, casimir_drift, residual, singular)


# ---------------------------------------------------------------------------
# Wong equations on a trivialized Atiyah chart
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WongFixture:
    """Affine connection and metric data on TM x g over R^base_dim.

    A(x) = connection_const + connection_linear @ x with shape (k, d);
    g(x) = metric_const + metric_linear @ x with shape (d, d).  The curvature

        B^i_ab = d_a A^i_b - d_b A^i_a - c^i_jk A^j_a A^k_b

    is skew in (a, b); its structure-constant term carries the sign for which
    the reduced momentum equation closes along extremals of the energy cost
    (measured against the dual-transport flow; see the momentum residual in
    :func:`scenario_wong`).
    """

    algebra: np.ndarray                       # (k, k, k)
    connection_const: np.ndarray              # (k, d)
    connection_linear: np.ndarray = None      # (k, d, d)
    metric_const: np.ndarray = None           # (d, d)
    metric_linear: np.ndarray = None          # (d, d, d)

    def __post_init__(self):
        algebra = np.asarray(self.algebra, dtype=float)
        A0 = np.asarray(self.connection_const, dtype=float)
        k, d = A0.shape
        A1 = (np.zeros((k, d, d)) if self.connection_linear is None
              else np.asarray(self.connection_linear, dtype=float))
        g0 = (np.eye(d) if self.metric_const is None
              else np.asarray(self.metric_const, dtype=float))
        g1 = (np.zeros((d, d, d)) if self.metric_linear is None
              else np.asarray(self.metric_linear, dtype=float))
        if algebra.shape != (k, k, k):
            raise ValueError("algebra table shape does not match the connection")
        if A1.shape != (k, d, d) or g0.shape != (d, d) or g1.shape != (d, d, d):
            raise ValueError("fixture coefficient shapes are inconsistent")
        for name, val in (("algebra", algebra), ("connection_const", A0),
                          ("connection_linear", A1), ("metric_const", g0),
                          ("metric_linear", g1)):
            object.__setattr__(self, name, val)

    @property
    def base_dim(self) -> int:
        return self.connection_const.shape[1]

    @property
    def algebra_dim(self) -> int:
        return self.connection_const.shape[0]

    def connection(self, x) -> np.ndarray:
        return self.connection_const + self.connection_linear @ np.asarray(x, dtype=float)

    def connection_jac(self, x) -> np.ndarray:
        """dA[i, b, c] = d A^i_b / d x^c."""
        return self.connection_linear

    def metric(self, x) -> np.ndarray:
        return self.metric_const + self.metric_linear @ np.asarray(x, dtype=float)

    def metric_jac(self, x) -> np.ndarray:
        """dg[a, c, b] = d g_ac / d x^b."""
        return self.metric_linear

    def curvature(self, x) -> np.ndarray:
        """B[i, a, b] = d_a A^i_b - d_b A^i_a - c^i_jk A^j_a A^k_b."""
        dA = self.connection_jac(x)
        A = self.connection(x)
        out = np.einsum("iba->iab", dA) - dA
        out -= np.einsum("ijk,ja,kb->iab", self.algebra, A, A)
        return out

    def curvature_antisymmetry(self, points) -> float:
        worst = 0.0
        for x in np.atleast_2d(points):
            B = self.curvature(x)
            worst = max(worst, float(np.abs(B + np.swapaxes(B, 1, 2)).max()))
        return worst


def build_wong_system(fixture: WongFixture, u_max: float = 10.0) -> ControlSystem:
    """Control system (u, -A(x) u) with kinetic-energy cost 1/2 g(x)(u, u).

    The box carries the closed-form maximizer of the normal case,
    u^b = g^{ab} (p_a - A^i_a xi_i) / (-z0).
    """
    d, k = fixture.base_dim, fixture.algebra_dim
    chart = atiyah_trivial(d, fixture.algebra, name="atiyah-so3" if k == 3 else "atiyah")

    def f(x, u):
        return np.concatenate([u, -fixture.connection(x) @ u])

    def f_jac(x, u):
        out = np.zeros((d + k, d))
        out[d:, :] = -np.einsum("ibc,b->ic", fixture.connection_jac(x), u)
        return out

    def L(x, u):
        return 0.5 * float(u @ fixture.metric(x) @ u)

    def L_grad(x, u):
        return 0.5 * np.einsum("acb,a,c->b", fixture.metric_jac(x), u, u)

    def maximizer(x, z, z0):
        p, xi = z[:d], z[d:]
        ptilde = p - fixture.connection(x).T @ xi
        if z0 < 0:
            return np.linalg.solve(fixture.metric(x), ptilde) / (-z0)
        return np.where(ptilde >= 0, u_max, -u_max)

    box = Box(-u_max * np.ones(d), u_max * np.ones(d), maximizer=maximizer)
    return ControlSystem(chart, f, L, box, f_jacobian=f_jac, L_gradient=L_grad)


@dataclass(frozen=True)
class WongScenarioResult:
    flow: PmpFlow
    audit: ExtremalAudit
    momentum_residual: float
    internal_residual: float
    speed_drift: float
    curvature_antisymmetry: float

    def checks(self, tol: float) -> list[dict]:
        return [
            _check("momentum_equation", self.momentum_residual, 1e-5),
            _check("internal_momentum_equation", self.internal_residual, 1e-5),
            _check("speed_drift", self.speed_drift, 1e-6),
            _check("curvature_antisymmetry", self.curvature_antisymmetry, 1e-10),
            _check("maximum_condition", self.audit.max_condition_violation, tol),
        ]


def scenario_wong(fixture: WongFixture, x0, p_init, xi_init, z0: float = -1.0,
                  horizon: float = 1.0, step: float = 1e-3,
                  tol: float = 1e-5, u_max: float = 10.0) -> WongScenarioResult:
    """Fixed-interval energy-minimizing flow on the Atiyah chart, with the
    residuals of the two reduced equations,

        d/dt ptilde_b + B^i_ab u^a xi_i + (z0/2) d g_ac/dx^b u^a u^c = 0 ,
        d/dt xi_j + c^k_ij A^i_b u^b xi_k = 0 ,

    and the drift of the conserved speed g(u, u).
    """
    d = fixture.base_dim
    x0 = np.asarray(x0, dtype=float)
    g0 = fixture.metric(x0)
    if abs(np.linalg.det(g0)) < 1e-12:
        raise ValueError("metric is singular at the initial point")
    sys = build_wong_system(fixture, u_max=u_max)
    z_init = np.concatenate([np.asarray(p_init, dtype=float),
                             np.asarray(xi_init, dtype=float)])
    flow = integrate_pmp_flow(sys, x0, z_init, z0, 0.0, horizon, step=step)
    audit = verify_extremal(sys, flow.path, flow.control, flow.costate,
                            mode="fixed-time", tol=tol, u_nodes=flow.u_nodes)

    nodes = flow.path.grid.nodes
    N = len(nodes)
    xs = flow.path.base
    ps = flow.costate.z[:, :d]
    xis = flow.costate.z[:, d:]
    us = flow.u_nodes
    ptil = np.array([ps[k] - fixture.connection(xs[k]).T @ xis[k] for k in range(N)])
    dptil = grid_derivative(flow.path.grid, ptil)
    dxi = grid_derivative(flow.path.grid, xis)

    res1 = 0.0
    res2 = 0.0
    for k in range(2, N - 2):
        x, u, xi = xs[k], us[k], xis[k]
        B = fixture.curvature(x)
        r1 = (dptil[k] + np.einsum("iab,a,i->b", B, u, xi)
              + 0.5 * z0 * np.einsum("acb,a,c->b", fixture.metric_jac(x), u, u))
        A = fixture.connection(x)
        r2 = dxi[k] + np.einsum("kij,ib,b,k->j", fixture.algebra, A, u, xi)
        res1 = max(res1, float(np.abs(r1).max()))
        res2 = max(res2, float(np.abs(r2).max()))

    speeds = np.array([us[k] @ fixture.metric(xs[k]) @ us[k] for k in range(N)])
    speed_drift = float(np.abs(speeds - speeds[0]).max())

    rng = np.random.default_rng(0)
    pts = rng.uniform(-1.0, 1.0, size=(25, d))
    curv_skew = fixture.curvature_antisymmetry(pts)

    return WongScenarioResult(flow, audit, res1, res2, speed_drift, curv_skew)


# ---------------------------------------------------------------------------
# Classical tangent-bundle reduction
# ---------------------------------------------------------------------------

def build_lq_system(u_max: float = 10.0) -> ControlSystem:
    """Scalar integrator xdot = u with cost u^2/2 on the tangent bundle of R."""
    chart = tangent_bundle(1)

    def maximizer(x, z, z0):
        if z0 < 0:
            return z / (-z0)
        return np.where(z >= 0, u_max, -u_max)

    return ControlSystem(
        alg=chart,
        f=lambda x, u: u.copy(),
        L=lambda x, u: 0.5 * float(u @ u),
        control_space=Box([-u_max], [u_max], maximizer=maximizer),
        f_jacobian=lambda x, u: np.zeros((1, 1)),
        L_gradient=lambda x, u: np.zeros(1),
    )


def classical_reduction_residual(sys: ControlSystem, samples) -> float:
    """On a tangent-bundle chart the dual-transport equation must agree with
    the textbook adjoint zdot = -(df/dx)^T z - z0 dL/dx, identically.

    ``samples`` is an iterable of (x, u, z, z0) tuples; returns the largest
    absolute difference between the two formulas.
    """
    from .control import costate_rhs

    worst = 0.0
    for x, u, z, z0 in samples:
        x = np.asarray(x, dtype=float)
        u = np.atleast_1d(np.asarray(u, dtype=float))
        z = np.asarray(z, dtype=float)
        general = costate_rhs(sys, x, u, z, z0)
        textbook = -(sys.f_jac_at(x, u).T @ z + z0 * sys.L_grad_at(x, u))
        worst = max(worst, float(np.abs(general - textbook).max()))
    return worst


@dataclass(frozen=True)
class ClassicalScenarioResult:
    flow: PmpFlow
    audit: ExtremalAudit
    closed_form_error: float
    reduction_residual: float

    def checks(self, tol: float) -> list[dict]:
        return [
            _check("closed_form_error", self.closed_form_error, 1e-6),
            _check("reduction_residual", self.reduction_residual, 1e-12),
            _check("hamiltonian_constancy", self.audit.h_drift, 1e-8),
        ]


def scenario_classical(z_init: float = 0.5, x0: float = 0.0, z0: float = -1.0,
                       horizon: float = 1.0, step: float = 1e-3,
                       tol: float = 1e-5, u_max: float = 10.0) -> ClassicalScenarioResult:
    """LQ pipeline with its hand-solvable oracle: the costate is constant,
    u = z, and the state moves on a straight line."""
    sys = build_lq_system(u_max=u_max)
    flow = integrate_pmp_flow(sys, [float(x0)], [float(z_init)], z0, 0.0, horizon,
                              step=step)
    audit = verify_extremal(sys, flow.path, flow.control, flow.costate,
                            mode="fixed-time", tol=tol, u_nodes=flow.u_nodes)

    nodes = flow.path.grid.nodes
    if z0 < 0:
        u_star = float(z_init) / (-z0)
    else:
        u_star = u_max if z_init >= 0 else -u_max
    x_exact = float(x0) + u_star * nodes
    err = max(float(np.abs(flow.path.base[:, 0] - x_exact).max()),
              float(np.abs(flow.costate.z[:, 0] - float(z_init)).max()),
              float(np.abs(flow.u_nodes[:, 0] - u_star).max()))

    rng = np.random.default_rng(1)
    samples = [(rng.normal(size=1), rng.normal(size=1), rng.normal(size=1), z0)
               for _ in range(20)]
    reduction = classical_reduction_residual(sys, samples)
    return ClassicalScenarioResult(flow, audit, err, reduction)


# ---------------------------------------------------------------------------
# Config-driven runner
# ---------------------------------------------------------------------------

def _check(name: str, value: float, tolerance: float) -> dict:
    return {"name": name, "value": float(value), "tolerance": float(tolerance),
            "passed": bool(value <= tolerance)}


def default_config(name: str) -> dict:
    if name == "so3-bang-bang":
        return {
            "scenario": name,
            "z0_mode": "normal",
            "horizon": 10.0,
            "z_init": [0.0, 1.0, 0.2],
            "params": {"a": [1.0, 0.0, 0.0], "b": [0.0, 1.0, 0.0]},
            "solver": {"step": 1e-3, "tol": 1e-5, "seed": 0},
        }
    if name == "classical-tm-lq":
        return {
            "scenario": name,
            "z0_mode": "normal",
            "horizon": 1.0,
            "z_init": [0.5],
            "initial_point": [0.0],
            "params": {"u_max": 10.0},
            "solver": {"step": 1e-3, "tol": 1e-5, "seed": 0},
        }
    if name == "wong-so3-r2":
        return {
            "scenario": name,
            "z0_mode": "normal",
            "horizon": 1.0,
            "z_init": [0.8, 0.5, 0.3, -0.2, 0.4],
            "initial_point": [0.2, -0.1],
            "params": {
                "u_max": 10.0,
                "connection_const": [[0.0, 0.1], [0.1, 0.0], [0.0, 0.0]],
                "connection_linear": [
                    [[0.3, 0.0], [0.0, -0.2]],
                    [[0.0, 0.4], [0.1, 0.0]],
                    [[-0.2, 0.1], [0.3, 0.0]],
                ],
            },
            "solver": {"step": 1e-3, "tol": 1e-5, "seed": 0},
        }
    raise ConfigError("scenario", f"unknown scenario {name!r}; "
                                  f"known: {', '.join(SCENARIO_NAMES)} or 'custom'")


def _label(path: str, key: str) -> str:
    return f"{path}.{key}" if path else key


def _expect(cfg: dict, key: str, kind, path: str, required: bool = True, default=None):
    if key not in cfg:
        if required:
            raise ConfigError(_label(path, key), "missing required field")
        return default
    val = cfg[key]
    if kind is float and isinstance(val, (int, float)) and not isinstance(val, bool):
        return float(val)
    if not isinstance(val, kind) or (isinstance(val, bool) and kind is not bool):
        raise ConfigError(_label(path, key),
                          f"expected {kind.__name__}, got {type(val).__name__}")
    return val


def _vector(cfg: dict, key: str, path: str, length: int | None = None,
            required: bool = True, default=None):
    raw = _expect(cfg, key, list, path, required=required, default=None)
    if raw is None:
        return default
    try:
        vec = np.asarray(raw, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(_label(path, key), "expected a numeric array") from None
    if length is not None and vec.shape != (length,):
        raise ConfigError(_label(path, key), f"expected {length} entries, got shape {vec.shape}")
    return vec


def validate_config(config: dict) -> dict:
    """Normalize a scenario config, raising ConfigError with a field path."""
    if not isinstance(config, dict):
        raise ConfigError("", "config must be a JSON object")
    name = _expect(config, "scenario", str, "")
    if name != "custom" and name not in SCENARIO_NAMES:
        raise ConfigError("scenario", f"unknown scenario {name!r}")
    out = dict(default_config(name)) if name != "custom" else {"scenario": "custom"}
    out.update({k: v for k, v in config.items() if k not in ("solver", "params")})
    solver = dict(out.get("solver", {"step": 1e-3, "tol": 1e-5, "seed": 0}))
    solver.update(config.get("solver", {}) or {})
    params = dict(out.get("params", {}))
    params.update(config.get("params", {}) or {})
    out["solver"], out["params"] = solver, params

    step = _expect(solver, "step", float, "solver", required=False, default=1e-3)
    if not step > 0:
        raise ConfigError("solver.step", "must be positive")
    tol = _expect(solver, "tol", float, "solver", required=False, default=1e-5)
    if not tol > 0:
        raise ConfigError("solver.tol", "must be positive")
    _expect(solver, "seed", int, "solver", required=False, default=0)
    mode = _expect(out, "z0_mode", str, "", required=False, default="normal")
    if mode not in ("normal", "abnormal"):
        raise ConfigError("z0_mode", "must be 'normal' or 'abnormal'")

    if name == "so3-bang-bang":
        _vector(out["params"], "a", "params", 3)
        _vector(out["params"], "b", "params", 3)
        _vector(out, "z_init", "", 3)
    elif name == "classical-tm-lq":
        _vector(out, "z_init", "", 1)
        _vector(out, "initial_point", "", 1)
    elif name == "wong-so3-r2":
        _vector(out, "z_init", "", 5)
        _vector(out, "initial_point", "", 2)
        con = _vector_table(out["params"], "connection_const", "params", (3, 2))
        lin = out["params"].get("connection_linear")
        if lin is not None:
            _vector_table(out["params"], "connection_linear", "params", (3, 2, 2))
        del con, lin
    elif name == "custom":
        if "chart" not in out:
            raise ConfigError("chart", "custom scenarios must supply a chart spec")
        build_chart_from_config(out["chart"])
    if name != "custom":
        horizon = _expect(out, "horizon", float, "", required=False, default=1.0)
        if not horizon > 0:
            raise ConfigError("horizon", "must be positive")
    return out


def _vector_table(cfg: dict, key: str, path: str, shape: tuple):
    raw = _expect(cfg, key, list, path)
    try:
        arr = np.asarray(raw, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(_label(path, key), "expected a numeric table") from None
    if arr.shape != shape:
        raise ConfigError(_label(path, key), f"expected shape {shape}, got {arr.shape}")
    return arr


def _structure_table(spec: dict, key: str = "table") -> np.ndarray:
    table = np.asarray(_expect(spec, key, list, "chart"), dtype=float)
    if table.ndim != 3 or len(set(table.shape)) != 1:
        raise ConfigError(f"chart.{key}", "expected an (m, m, m) table")
    return table


def build_chart_from_config(spec: dict) -> ChartAlgebroid:
    """Chart from a config spec.

    Supported kinds: ``lie-algebra`` (structure-constant table over a point),
    ``tangent`` (dimension), ``atiyah`` (base dimension plus algebra table,
    optionally carrying connection/metric polynomial coefficients for the
    energy pipeline), and ``affine-anchor`` (anchor rho(x) given by constant
    and linear coefficient tables, with a constant structure table).
    """
    kind = _expect(spec, "kind", str, "chart")
    if kind == "lie-algebra":
        try:
            return lie_algebra(_structure_table(spec), name="config-lie-algebra")
        except ValueError as exc:
            raise ConfigError("chart.table", str(exc)) from None
    if kind == "tangent":
        dim = _expect(spec, "dim", int, "chart")
        if dim < 1:
            raise ConfigError("chart.dim", "must be a positive integer")
        return tangent_bundle(dim)
    if kind == "atiyah":
        base_dim = _expect(spec, "base_dim", int, "chart")
        table = _structure_table(spec)
        k = table.shape[0]
        if "connection_const" in spec:
            A0 = np.asarray(spec["connection_const"], dtype=float)
            if A0.shape != (k, base_dim):
                raise ConfigError("chart.connection_const",
                                  f"expected shape {(k, base_dim)}, got {A0.shape}")
        return atiyah_trivial(base_dim, table, name="config-atiyah")
    if kind == "affine-anchor":
        const = np.asarray(_expect(spec, "anchor_const", list, "chart"), dtype=float)
        if const.ndim != 2:
            raise ConfigError("chart.anchor_const", "expected an (n, m) matrix")
        n, m = const.shape
        linear = None
        if spec.get("anchor_linear") is not None:
            linear = np.asarray(spec["anchor_linear"], dtype=float)
            if linear.shape != (n, m, n):
                raise ConfigError("chart.anchor_linear",
                                  f"expected shape {(n, m, n)}, got {linear.shape}")
        table = _structure_table(spec)
        if table.shape[0] != m:
            raise ConfigError("chart.table", "table size does not match the anchor")
        anchor, anchor_jac = affine_matrix_field(const, linear)
        return ChartAlgebroid(n, m, anchor, lambda x: table,
                              anchor_jacobian=anchor_jac, name="config-affine-anchor")
    raise ConfigError("chart.kind", f"unknown chart kind {kind!r}")


def _chart_for_scenario(cfg: dict):
    name = cfg["scenario"]
    if name == "so3-bang-bang":
        return so3_algebra()
    if name == "classical-tm-lq":
        return tangent_bundle(1)
    if name == "wong-so3-r2":
        return atiyah_trivial(2, so3_structure())
    return build_chart_from_config(cfg["chart"])


def validate_chart(cfg: dict, n_points: int = 100, tol: float = 1e-6) -> dict:
    """AL-axiom validation of the scenario's chart on random sample points."""
    cfg = validate_config(cfg)
    chart = _chart_for_scenario(cfg)
    seed = int(cfg.get("solver", {}).get("seed", 0))
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-1.0, 1.0, size=(n_points, chart.base_dim))
    skew = validate_skew(chart, pts, tol)
    morph = validate_anchor_morphism(chart, pts, 1e-5, tol)
    return {
        "schema_version": SCHEMA_VERSION,
        "chart": chart.name,
        "checks": [skew.to_dict(), morph.to_dict()],
        "passed": skew.passed and morph.passed,
    }


def _cone_check_so3(cfg: dict, flow: PmpFlow, n_symbols: int, step: float) -> dict:
    """Sampled support check of the extended covector against needle directions."""
    from .pmp import cone_support_check, make_needle_context, needle_vector, sample_symbols

    p = cfg["params"]
    sys = build_so3_bang_bang_system(p["a"], p["b"])
    ctx = make_needle_context(sys, flow.control, np.zeros(0), step=step)
    nodes = flow.path.grid.nodes
    tau = nodes[len(nodes) // 2]
    if any(abs(tau - s) <= 1e-6 for s in flow.switch_times):
        tau = nodes[len(nodes) // 2 + 5]
    rng = np.random.default_rng(int(cfg["solver"].get("seed", 0)))
    symbols = sample_symbols(rng, ctx, tau, n_symbols)
    needles = [needle_vector(ctx, s) for s in symbols]
    k = int(np.searchsorted(nodes, tau))
    z_ext = np.concatenate([[flow.costate.z0], flow.costate.z[k]])
    rep = cone_support_check(needles, z_ext, tol=1e-6)
    return {"name": "cone_support", "value": rep.max_pairing,
            "tolerance": rep.tol, "passed": rep.passed}


def run_scenario(config: dict, out_dir) -> dict:
    """Validate the chart, run the configured pipeline, write artifacts
    (trajectory.csv, costate.csv, switches.csv, audit.json, invariants.json),
    and return the invariant report."""
    cfg = validate_config(config)
    name = cfg["scenario"]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    step = float(cfg["solver"]["step"])
    tol = float(cfg["solver"]["tol"])
    z0 = 0.0 if cfg.get("z0_mode", "normal") == "abnormal" else -1.0

    chart_report = validate_chart(cfg)
    if name == "custom":
        report = {
            "schema_version": SCHEMA_VERSION,
            "scenario": name,
            "checks": chart_report["checks"],
            "passed": chart_report["passed"],
        }
        write_report_json(out / "invariants.json", report)
        return report

    if name == "so3-bang-bang":
        p = cfg["params"]
        result = scenario_so3_bang_bang(p["a"], p["b"], np.asarray(cfg["z_init"], dtype=float),
                                        z0=z0, horizon=float(cfg["horizon"]),
                                        step=step, tol=tol)
        extra_notes = {"singular": result.singular,
                       "switch_times": list(result.flow.switch_times)}
    elif name == "classical-tm-lq":
        result = scenario_classical(z_init=float(np.asarray(cfg["z_init"])[0]),
                                    x0=float(np.asarray(cfg["initial_point"])[0]),
                                    z0=z0, horizon=float(cfg["horizon"]),
                                    step=step, tol=tol,
                                    u_max=float(cfg["params"].get("u_max", 10.0)))
        extra_notes = {}
    else:
        p = cfg["params"]
        fixture = WongFixture(
            algebra=so3_structure(),
            connection_const=np.asarray(p["connection_const"], dtype=float),
            connection_linear=(np.asarray(p["connection_linear"], dtype=float)
                               if p.get("connection_linear") is not None else None),
        )
        z_init = np.asarray(cfg["z_init"], dtype=float)
        result = scenario_wong(fixture, np.asarray(cfg["initial_point"], dtype=float),
                               z_init[:2], z_init[2:], z0=z0,
                               horizon=float(cfg["horizon"]), step=step, tol=tol,
                               u_max=float(p.get("u_max", 10.0)))
        extra_notes = {}

    flow = result.flow
    write_trajectory_csv(out / "trajectory.csv", flow.path, flow.u_nodes)
    write_costate_csv(out / "costate.csv", flow.costate, flow.h_nodes)
    write_report_json(out / "audit.json", result.audit.to_dict())
    with (out / "switches.csv").open("w") as fh:
        fh.write("t\n")
        for s in flow.switch_times:
            fh.write("%.17g\n" % s)

    checks = list(chart_report["checks"]) + result.checks(tol)
    n_symbols = int(cfg["solver"].get("symbol_samples", 0))
    if n_symbols > 0 and name == "so3-bang-bang":
        checks.append(_cone_check_so3(cfg, flow, n_symbols, step))
    checks.append({"name": "extremal_audit", "value": 0.0 if result.audit.passed else 1.0,
                   "tolerance": 0.0, "passed": result.audit.passed})
    report = {
        "schema_version": SCHEMA_VERSION,
        "scenario": name,
        "config": {k: v for k, v in cfg.items() if k != "params"},
        "checks": checks,
        "notes": extra_notes,
        "passed": all(c["passed"] for c in checks),
    }
    write_report_json(out / "invariants.json", report)
    return report
