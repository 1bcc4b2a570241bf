"""Generalized Pontryagin machinery: the Hamiltonian and its maximization,
closed-loop extremal integration, extremal audits, needle variations with the
reachable-cone support test, group development, endpoint shooting, and the
clock-extension of time-dependent problems.

The Hamiltonian is H(z, u) = <f(x, u), z> + z0 L(x, u) with a constant
multiplier z0 <= 0.  Along an extremal the costate follows the dual transport
flow of :mod:`algopt.control` with the maximizing control inserted.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize

from .control import (Box, ControlSignal, ControlSystem, FiniteSet, Trajectory,
                      costate_rhs, extend_system, simulate_trajectory,
                      transport_frame)
from .core import ChartAlgebroid
from .errors import ChatteringError, IntegrationDivergedError, UnsupportedDimensionError
from .numerics import TimeGrid, grid_derivative, rk4_step
from .paths import EPath

__all__ = [
    "CostatePath",
    "VariationSymbol",
    "ExtremalAudit",
    "PmpFlow",
    "hamiltonian",
    "maximize_hamiltonian",
    "integrate_pmp_flow",
    "verify_extremal",
    "NeedleContext",
    "make_needle_context",
    "needle_vector",
    "sample_symbols",
    "ConeSupportReport",
    "cone_support_check",
    "develop_to_group",
    "ShootingResult",
    "shoot_endpoint",
    "TimeDependentControlSystem",
    "AutonomizedSystem",
    "autonomize",
    "time_dependence_audit",
]

_TIE_GAP = 1e-10


@dataclass(frozen=True)
class CostatePath:
    """Sampled dual curve z(t) with the constant abnormal multiplier z0 <= 0."""

    grid: TimeGrid
    z: np.ndarray  # (N, m)
    z0: float

    def __post_init__(self):
        z = np.atleast_2d(np.asarray(self.z, dtype=float))
        if z.shape[0] != self.grid.n_nodes:
            raise ValueError("costate sample rows do not match grid nodes")
        if self.z0 > 0:
            raise ValueError(f"multiplier must satisfy z0 <= 0, got {self.z0}")
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "z0", float(self.z0))

    @property
    def fiber_dim(self) -> int:
        return self.z.shape[1]


def hamiltonian(sys: ControlSystem, z: np.ndarray, z0: float, x: np.ndarray, u) -> float:
    """H(z, u) = <f(x, u), z> + z0 L(x, u)."""
    z = np.asarray(z, dtype=float)
    if z.shape != (sys.alg.fiber_dim,):
        raise ValueError(f"dual vector has shape {z.shape}, expected {(sys.alg.fiber_dim,)}")
    return float(z @ sys.f_at(x, u) + z0 * sys.L_at(x, u))


def _golden_section(fn, lo: float, hi: float, iters: int = 48) -> float:
    """Deterministic golden-section maximization of a scalar function."""
    phi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - phi * (b - a)
    d = a + phi * (b - a)
    fc, fd = fn(c), fn(d)
    for _ in range(iters):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - phi * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + phi * (b - a)
            fd = fn(d)
    return 0.5 * (a + b)


def _box_argmax(sys: ControlSystem, z, z0, x, box: Box, n_grid: int = 33,
                sweeps: int = 2) -> np.ndarray:
    p = box.dim
    if p > 3:
        raise UnsupportedDimensionError(
            f"numeric maximization over a {p}-dimensional box needs a registered maximizer")
    axes = [np.linspace(box.lower[j], box.upper[j], n_grid) for j in range(p)]
    best_u, best_h = None, -np.inf
    for combo in itertools.product(*axes):
        u = np.array(combo)
        h = hamiltonian(sys, z, z0, x, u)
        if h > best_h:
            best_u, best_h = u, h
    cell = np.array([(box.upper[j] - box.lower[j]) / (n_grid - 1) if n_grid > 1 else 0.0
                     for j in range(p)])
    u = best_u.copy()
    for _ in range(sweeps):
        for j in range(p):
            lo = max(box.lower[j], u[j] - cell[j])
            hi = min(box.upper[j], u[j] + cell[j])
            if hi <= lo:
                continue

            def fn(s, j=j):
                trial = u.copy()
                trial[j] = s
                return hamiltonian(sys, z, z0, x, trial)

            u[j] = _golden_section(fn, lo, hi)
    return u


def _maximize_detailed(sys: ControlSystem, z, z0, x) -> tuple[np.ndarray, float, float]:
    """Returns (maximizer, value, gap to the runner-up; inf when meaningless)."""
    U = sys.control_space
    if isinstance(U, FiniteSet):
        values = [hamiltonian(sys, z, z0, x, v) for v in U.values]
        best = int(np.argmax(values))
        gap = np.inf
        if len(values) > 1:
            others = values[:best] + values[best + 1:]
            gap = values[best] - max(others)
        return U.values[best], values[best], gap
    if U.maximizer is not None:
        u = U.clip(U.maximizer(np.asarray(x, dtype=float), np.asarray(z, dtype=float), z0))
        return u, hamiltonian(sys, z, z0, x, u), np.inf
    u = _box_argmax(sys, z, z0, x, U)
    return u, hamiltonian(sys, z, z0, x, u), np.inf


def maximize_hamiltonian(sys: ControlSystem, z, z0, x) -> tuple[np.ndarray, float]:
    """Pointwise maximization of H over the control space.

    Finite sets are searched exhaustively with ties broken by lowest listing
    index; boxes use a registered closed-form maximizer when present and a
    33-per-axis grid with golden-section refinement otherwise (up to three
    control dimensions).
    """
    u, h, _ = _maximize_detailed(sys, z, z0, x)
    return u, h


# ---------------------------------------------------------------------------
# Closed-loop extremal integration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PmpFlow:
    """Result of closed-loop integration of the maximized Hamiltonian flow."""

    path: EPath
    control: ControlSignal
    costate: CostatePath
    u_nodes: np.ndarray       # (N, p) maximizing control re-evaluated per node
    h_nodes: np.ndarray       # (N,) Hamiltonian values at nodes
    switch_times: tuple[float, ...]
    tie_times: tuple[float, ...]


def _coupled_rhs_fixed(sys: ControlSystem, u, z0: float):
    n = sys.alg.base_dim

    def rhs(t, state):
        x, z = state[:n], state[n:]
        xdot = sys.alg.anchor_at(x) @ sys.f_at(x, u)
        return np.concatenate([xdot, costate_rhs(sys, x, u, z, z0)])

    return rhs


def integrate_pmp_flow(sys: ControlSystem, x0, z_init, z0: float, t0: float,
                       t1: float, step: float = 1e-3, switch_tol: float = 1e-9,
                       max_switches: int = 10_000) -> PmpFlow:
    """Integrate state and costate with the pointwise-maximizing control.

    For a two-element control set, switching times are localized by bisection
    on the Hamiltonian gap to ``switch_tol`` and inserted as grid breakpoints;
    larger finite sets re-evaluate the argmax at nodes only, and boxes use the
    (typically closed-form) maximizer at every integration stage.  Aborts with
    :class:`ChatteringError` after ``max_switches`` switches.
    """
    if z0 > 0:
        raise ValueError("multiplier must satisfy z0 <= 0")
    n = sys.alg.base_dim
    x0 = np.asarray(x0, dtype=float)
    z_init = np.asarray(z_init, dtype=float)
    state = np.concatenate([x0, z_init])
    U = sys.control_space

    if isinstance(U, Box):
        grid = TimeGrid(t0, t1, step)

        def rhs(t, s):
            x, z = s[:n], s[n:]
            u, _, _ = _maximize_detailed(sys, z, z0, x)
            xdot = sys.alg.anchor_at(x) @ sys.f_at(x, u)
            return np.concatenate([xdot, costate_rhs(sys, x, u, z, z0)])

        out = np.empty((grid.n_nodes, state.size))
        out[0] = state
        y = state
        nodes = grid.nodes
        for k in range(len(nodes) - 1):
            y = rk4_step(rhs, nodes[k], y, nodes[k + 1] - nodes[k])
            if not np.all(np.isfinite(y)):
                raise IntegrationDivergedError(nodes[k + 1])
            out[k + 1] = y
        node_list = list(nodes)
        states = list(out)
        switch_times: list[float] = []
        seg_values = None
    else:
        node_list = [t0]
        states = [state.copy()]
        u_cur, _, gap = _maximize_detailed(sys, z_init, z0, x0)
        tie_times = [t0] if gap <= _TIE_GAP else []
        seg_values = [u_cur]
        switch_times = []
        two_valued = len(U.values) == 2
        t, y = t0, state
        while t1 - t > 1e-15:
            remaining = t1 - t
            h = step if remaining > step * (1.0 + 1e-9) else remaining
            t_next = t1 if h == remaining else t + h
            rhs = _coupled_rhs_fixed(sys, u_cur, z0)
            y_next = rk4_step(rhs, t, y, t_next - t)
            if not np.all(np.isfinite(y_next)):
                raise IntegrationDivergedError(t_next)
            u_new, _, gap = _maximize_detailed(sys, y_next[n:], z0, y_next[:n])
            if gap <= _TIE_GAP:
                tie_times.append(t_next)
            if np.array_equal(u_new, u_cur):
                t, y = t_next, y_next
                node_list.append(t)
                states.append(y)
                continue
            if len(switch_times) >= max_switches:
                raise ChatteringError(max_switches, t_next)
            if two_valued:
                other = u_new

                def sigma(s):
                    ys = y if s <= t else rk4_step(rhs, t, y, s - t)
                    return (hamiltonian(sys, ys[n:], z0, ys[:n], other)
                            - hamiltonian(sys, ys[n:], z0, ys[:n], u_cur))

                lo, hi = t, t_next
                if sigma(lo) > 0:
                    hi = min(t_next, lo + max(switch_tol, 1e-12))
                else:
                    while hi - lo > switch_tol:
                        mid = 0.5 * (lo + hi)
                        if sigma(mid) > 0:
                            hi = mid
                        else:
                            lo = mid
                s_star = hi
                y_star = rk4_step(rhs, t, y, s_star - t)
            else:
                s_star, y_star = t_next, y_next
            if t1 - s_star <= 1e-12:
                # switch localized onto the horizon end: no interior segment left
                node_list.append(t_next)
                states.append(y_next)
                t = t_next
                break
            switch_times.append(s_star)
            node_list.append(s_star)
            states.append(y_star)
            u_cur = u_new
            seg_values.append(u_cur)
            t, y = s_star, y_star

    nodes_arr = np.asarray(node_list)
    states_arr = np.asarray(states)
    grid = TimeGrid.from_nodes(nodes_arr, tuple(switch_times), step=step)
    base = states_arr[:, :n]
    zs = states_arr[:, n:]

    if isinstance(U, Box):
        u_nodes = []
        tie_times = []
        for k in range(len(nodes_arr)):
            u, _, gap = _maximize_detailed(sys, zs[k], z0, base[k])
            u_nodes.append(u)
            if gap <= _TIE_GAP:
                tie_times.append(nodes_arr[k])
        u_nodes = np.asarray(u_nodes)
        inner = tuple(nodes_arr[1:-1])
        signal = ControlSignal(t0, t1, inner, tuple(u_nodes[:-1]))
    else:
        u_nodes = np.array([_maximize_detailed(sys, zs[k], z0, base[k])[0]
                            for k in range(len(nodes_arr))])
        signal = ControlSignal(t0, t1, tuple(switch_times), tuple(seg_values))

    fiber = np.array([sys.f_at(base[k], u_nodes[k]) for k in range(len(nodes_arr))])
    path = EPath(grid, base, fiber)
    costate = CostatePath(grid, zs, z0)
    h_nodes = np.array([hamiltonian(sys, zs[k], z0, base[k], u_nodes[k])
                        for k in range(len(nodes_arr))])
    return PmpFlow(path, signal, costate, u_nodes, h_nodes,
                   tuple(switch_times), tuple(tie_times))


# ---------------------------------------------------------------------------
# Extremal audits
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExtremalAudit:
    """Outcome of checking the maximum-principle conditions on sampled curves."""

    mode: str
    tol: float
    max_condition_violation: float
    costate_residual: float
    h_drift: float
    covector_min_norm: float
    hamiltonian_values: np.ndarray
    verdicts: dict
    notes: tuple[str, ...]

    @property
    def passed(self) -> bool:
        return all(self.verdicts.values())

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "tol": self.tol,
            "max_condition_violation": self.max_condition_violation,
            "costate_residual": self.costate_residual,
            "h_drift": self.h_drift,
            "covector_min_norm": self.covector_min_norm,
            "verdicts": dict(self.verdicts),
            "notes": list(self.notes),
            "passed": self.passed,
        }


def _candidate_controls(sys: ControlSystem, n_samples: int = 9):
    U = sys.control_space
    if isinstance(U, FiniteSet):
        return list(U.values)
    if U.dim > 3:
        return [0.5 * (U.lower + U.upper)]
    axes = [np.linspace(U.lower[j], U.upper[j], n_samples) for j in range(U.dim)]
    return [np.array(combo) for combo in itertools.product(*axes)]


def verify_extremal(sys: ControlSystem, path: EPath, control: ControlSignal,
                    costate: CostatePath, mode: str = "free-time",
                    tol: float = 1e-5, u_nodes: np.ndarray | None = None) -> ExtremalAudit:
    """Audit the maximum-principle conditions along sampled curves.

    At every non-breakpoint node: (1) H(z, u) must dominate H(z, v) for the
    sampled candidates v up to ``tol``; (2) the costate must satisfy the dual
    flow equation (finite-difference residual); (3) |H| <= tol in free-time
    mode, |H - mean H| <= tol in fixed-time mode; (4) z0 <= 0 holds by
    construction and z must be nowhere-vanishing when z0 = 0.
    """
    if mode not in ("free-time", "fixed-time"):
        raise ValueError(f"unknown mode {mode!r}")
    if not np.array_equal(path.grid.nodes, costate.grid.nodes):
        raise ValueError("trajectory and costate grids do not match")
    nodes = path.grid.nodes
    N = len(nodes)
    bset = set(path.grid.breakpoints)
    z0 = costate.z0
    notes: list[str] = []

    if u_nodes is None:
        u_nodes = np.array([control.value(t) for t in nodes])
    u_nodes = np.atleast_2d(np.asarray(u_nodes, dtype=float))
    if u_nodes.shape[0] != N:
        raise ValueError("u_nodes rows do not match grid nodes")

    h_vals = np.array([hamiltonian(sys, costate.z[k], z0, path.base[k], u_nodes[k])
                       for k in range(N)])

    candidates = _candidate_controls(sys)
    max_violation = 0.0
    n_ties = 0
    for k in range(N):
        if nodes[k] in bset:
            continue
        best = max(hamiltonian(sys, costate.z[k], z0, path.base[k], v) for v in candidates)
        if isinstance(sys.control_space, Box) and sys.control_space.maximizer is not None:
            u_star, h_star = maximize_hamiltonian(sys, costate.z[k], z0, path.base[k])
            best = max(best, h_star)
        max_violation = max(max_violation, best - h_vals[k])
        if isinstance(sys.control_space, FiniteSet):
            _, _, gap = _maximize_detailed(sys, costate.z[k], z0, path.base[k])
            if gap <= _TIE_GAP:
                n_ties += 1
    if n_ties:
        notes.append(f"maximizer tie at {n_ties} node(s); singular arcs are flagged, "
                     "not resolved")

    dz = grid_derivative(path.grid, costate.z)
    costate_residual = 0.0
    for i0, i1 in path.grid.segment_bounds:
        for k in range(i0 + 1, i1):
            rhs = costate_rhs(sys, path.base[k], u_nodes[k], costate.z[k], z0)
            costate_residual = max(costate_residual, float(np.abs(dz[k] - rhs).max()))

    keep = np.array([t not in bset for t in nodes])
    h_kept = h_vals[keep]
    if mode == "free-time":
        h_drift = float(np.abs(h_kept).max())
    else:
        h_drift = float(np.abs(h_kept - h_kept.mean()).max())

    z_norms = np.linalg.norm(costate.z, axis=1)
    covector_min = float(z_norms.min())
    if z0 == 0.0:
        multiplier_ok = covector_min > tol
        notes.append("abnormal multiplier (z0 = 0) accepted; the strict-negativity "
                     "variant of the transversality statement is not enforced")
    else:
        multiplier_ok = True

    verdicts = {
        "maximum_condition": bool(max_violation <= tol),
        "costate_flow": bool(costate_residual <= tol),
        "hamiltonian_profile": bool(h_drift <= tol),
        "multiplier": bool(multiplier_ok),
    }
    return ExtremalAudit(mode, tol, float(max_violation), costate_residual, h_drift,
                         covector_min, h_vals, verdicts, tuple(notes))


# ---------------------------------------------------------------------------
# Needle variations and the reachable cone
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VariationSymbol:
    """Data of a needle variation: spike times and values, the observation
    time, spike widths (per unit deformation), and the horizon change."""

    taus: tuple[float, ...]
    vs: tuple
    tau: float
    dts: tuple[float, ...]
    dt: float

    def __post_init__(self):
        taus = tuple(float(s) for s in self.taus)
        dts = tuple(float(s) for s in self.dts)
        vs = tuple(np.atleast_1d(np.asarray(v, dtype=float)) for v in self.vs)
        if not (len(taus) == len(dts) == len(vs)):
            raise ValueError("taus, vs and dts must have equal length")
        if any(b < a for a, b in zip(taus[:-1], taus[1:])):
            raise ValueError("spike times must be nondecreasing")
        if taus and taus[-1] > self.tau:
            raise ValueError("spike times must not exceed the observation time")
        if any(d < 0 for d in dts):
            raise ValueError("spike widths must be nonnegative")
        object.__setattr__(self, "taus", taus)
        object.__setattr__(self, "dts", dts)
        object.__setattr__(self, "vs", vs)
        object.__setattr__(self, "tau", float(self.tau))


@dataclass(frozen=True)
class NeedleContext:
    """Cost-extended trajectory and transport frame backing needle evaluation."""

    sys: ControlSystem
    esys: ControlSystem
    etraj: Trajectory
    frame_B: np.ndarray  # (N, m+1, m+1), transport from t0 to each node

    @property
    def grid(self) -> TimeGrid:
        return self.etraj.path.grid

    def base_at(self, t: float) -> np.ndarray:
        return self.etraj.path.base_at(t)

    def frame_at(self, t: float) -> np.ndarray:
        nodes = self.grid.nodes
        me = self.frame_B.shape[1]
        flat = self.frame_B.reshape(len(nodes), me * me)
        cols = np.array([np.interp(t, nodes, flat[:, j]) for j in range(me * me)])
        return cols.reshape(me, me)


def make_needle_context(sys: ControlSystem, control: ControlSignal, x0,
                        step: float = 1e-3) -> NeedleContext:
    esys, ext = extend_system(sys)
    xx0 = ext.embed_base(0.0, x0)
    etraj = simulate_trajectory(esys, control, xx0, step=step)
    frame = transport_frame(esys, etraj)
    return NeedleContext(sys, esys, etraj, frame.B)


def needle_vector(ctx: NeedleContext, symbol: VariationSymbol,
                  c_init: np.ndarray | None = None,
                  continuity_guard: float = 1e-9) -> np.ndarray:
    """First-order endpoint direction of the needle variation, in the
    cost-extended fiber over the trajectory point at the observation time:

        d = fext(x(tau), u(tau)) dt + B_{tau t0} c_init
            + sum_i B_{tau tau_i} [fext(x(tau_i), v_i) - fext(x(tau_i), u(tau_i))] dt_i .
    """
    control = ctx.etraj.control
    grid = ctx.grid
    if not (grid.t0 < symbol.tau < grid.t1):
        raise ValueError("observation time must lie strictly inside the interval")
    for s in (*symbol.taus, symbol.tau):
        if s <= grid.t0:
            raise ValueError("spike times must lie strictly inside the interval")
        if any(abs(s - b) <= continuity_guard for b in control.switch_times):
            raise ValueError(f"time {s} is a discontinuity point of the control")
    xx_tau = ctx.base_at(symbol.tau)
    u_tau = control.value(symbol.tau)
    d = symbol.dt * ctx.esys.f_at(xx_tau, u_tau)
    F_tau = ctx.frame_at(symbol.tau)
    if c_init is not None:
        d = d + F_tau @ np.asarray(c_init, dtype=float)
    for s, v, w in zip(symbol.taus, symbol.vs, symbol.dts):
        if w == 0.0:
            continue
        xx = ctx.base_at(s)
        delta = ctx.esys.f_at(xx, v) - ctx.esys.f_at(xx, control.value(s))
        F_s = ctx.frame_at(s)
        d = d + w * (F_tau @ np.linalg.solve(F_s, delta))
    return d


def sample_symbols(rng: np.random.Generator, ctx: NeedleContext, tau: float,
                   n: int, max_spikes: int = 3, guard: float = 1e-6) -> list[VariationSymbol]:
    """Random variation symbols with spike times drawn from grid nodes."""
    control = ctx.etraj.control
    grid = ctx.grid
    nodes = grid.nodes
    ok = (nodes > grid.t0) & (nodes < tau)
    for b in control.switch_times:
        ok &= np.abs(nodes - b) > guard
    pool = nodes[ok]
    if pool.size == 0:
        raise ValueError("no admissible spike times below the observation time")
    U = ctx.sys.control_space
    out = []
    for _ in range(n):
        s = int(rng.integers(1, max_spikes + 1))
        taus = np.sort(pool[rng.integers(0, pool.size, size=s)])
        if isinstance(U, FiniteSet):
            vs = [U.values[int(rng.integers(0, len(U.values)))] for _ in range(s)]
        else:
            vs = [U.lower + (U.upper - U.lower) * rng.random(U.dim) for _ in range(s)]
        dts = rng.random(s)
        dt = float(rng.uniform(-1.0, 1.0))
        out.append(VariationSymbol(tuple(taus), tuple(vs), tau, tuple(dts), dt))
    return out


@dataclass(frozen=True)
class ConeSupportReport:
    max_pairing: float
    tol: float
    passed: bool
    n_needles: int

    def to_dict(self) -> dict:
        return {"max_pairing": self.max_pairing, "tol": self.tol,
                "passed": self.passed, "n_needles": self.n_needles}


def cone_support_check(needles: Sequence[np.ndarray], z_ext: np.ndarray,
                       tol: float = 1e-6) -> ConeSupportReport:
    """Certify empirically that the extended covector supports the sampled
    needle directions: max <d, z> <= tol."""
    if len(needles) == 0:
        raise ValueError("need at least one needle direction")
    z_ext = np.asarray(z_ext, dtype=float)
    worst = max(float(np.dot(d, z_ext)) for d in needles)
    return ConeSupportReport(worst, tol, worst <= tol, len(needles))


# ---------------------------------------------------------------------------
# Group development and endpoint shooting
# ---------------------------------------------------------------------------

def develop_to_group(alg: ChartAlgebroid, path: EPath, rep,
                     bracket_tol: float = 1e-10,
                     reorthonormalize_every: int = 100) -> np.ndarray:
    """Development of a fiber path over a point into the matrix group:
    solves gdot = g rep(a(t)) from the identity and returns g(t1).

    ``rep`` maps fiber vectors linearly to square matrices and must intertwine
    the bracket with the commutator on basis pairs (checked to ``bracket_tol``).
    For skew-symmetric representations the running product is re-projected
    onto the orthogonal group every ``reorthonormalize_every`` steps.
    """
    if alg.base_dim != 0:
        raise ValueError("development requires a chart over a point (zero anchor)")
    m = alg.fiber_dim
    basis = np.eye(m)
    mats = np.array([np.asarray(rep(basis[i]), dtype=float) for i in range(m)])
    if mats.ndim != 3 or mats.shape[1] != mats.shape[2]:
        raise ValueError("rep must produce square matrices")
    x = np.zeros(0)
    for i in range(m):
        for j in range(m):
            lhs = np.tensordot(alg.bracket(x, basis[i], basis[j]), mats, axes=(0, 0))
            rhs = mats[i] @ mats[j] - mats[j] @ mats[i]
            if np.abs(lhs - rhs).max() > bracket_tol:
                raise ValueError("rep is not bracket-compatible on the basis")
    skew = all(np.abs(Mi + Mi.T).max() <= 1e-12 for Mi in mats)

    def R(v):
        return np.tensordot(v, mats, axes=(0, 0))

    nodes = path.grid.nodes
    g = np.eye(mats.shape[1])
    steps_done = 0
    for i0, i1 in path.grid.segment_bounds:
        for k in range(i0, i1):
            h = nodes[k + 1] - nodes[k]
            A_l = R(path.fiber[k])
            A_r = R(path.fiber[k + 1])
            A_m = 0.5 * (A_l + A_r)
            k1 = g @ A_l
            k2 = (g + (h / 2.0) * k1) @ A_m
            k3 = (g + (h / 2.0) * k2) @ A_m
            k4 = (g + h * k3) @ A_r
            g = g + h * ((k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0)
            steps_done += 1
            if skew and steps_done % reorthonormalize_every == 0:
                uu, _, vv = np.linalg.svd(g)
                g = uu @ vv
    if skew:
        uu, _, vv = np.linalg.svd(g)
        g = uu @ vv
    return g


@dataclass(frozen=True)
class ShootingResult:
    z_init: np.ndarray
    t1: float
    residual: float
    converged: bool
    n_evaluations: int


def shoot_endpoint(sys: ControlSystem, rep, target: np.ndarray, z_guess,
                   z0: float = -1.0, t0: float = 0.0, t1: float | None = None,
                   duration_guess: float = 1.0, step: float = 1e-3,
                   residual_tol: float = 1e-4, max_evals: int = 2000) -> ShootingResult:
    """Find an initial covector (and, when ``t1`` is None, a horizon) whose
    extremal develops to the target group element.

    Derivative-free Nelder-Mead search on the Frobenius endpoint mismatch;
    the result is flagged not-converged when the residual stays above
    ``residual_tol``.
    """
    if sys.alg.base_dim != 0:
        raise ValueError("endpoint shooting requires a chart over a point")
    target = np.asarray(target, dtype=float)
    z_guess = np.asarray(z_guess, dtype=float)
    m = sys.alg.fiber_dim
    free_time = t1 is None
    x0 = np.zeros(0)

    def endpoint(z, duration):
        if duration <= 1e-9:
            return np.eye(target.shape[0])
        eff_step = min(step, duration / 4.0)
        flow = integrate_pmp_flow(sys, x0, z, z0, t0, t0 + duration, step=eff_step)
        return develop_to_group(sys.alg, flow.path, rep)

    def objective(params):
        z = params[:m]
        duration = abs(params[m]) if free_time else (t1 - t0)
        try:
            g = endpoint(z, duration)
        except (ChatteringError, IntegrationDivergedError):
            return 1e6
        return float(np.linalg.norm(g - target, ord="fro"))

    params0 = np.concatenate([z_guess, [duration_guess]]) if free_time else z_guess
    res = minimize(objective, params0, method="Nelder-Mead",
                   options={"maxfev": max_evals, "xatol": 1e-10, "fatol": 1e-12})
    best = res.x
    z_best = best[:m]
    t1_best = (t0 + abs(best[m])) if free_time else t1
    residual = objective(best)
    return ShootingResult(z_best, float(t1_best), residual,
                          residual < residual_tol, int(res.nfev))


# ---------------------------------------------------------------------------
# Time-dependent problems via the clock extension
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TimeDependentControlSystem:
    """Control data with explicit C1 time dependence: f(x, t, u), L(x, t, u)."""

    alg: ChartAlgebroid
    f: Callable
    L: Callable
    control_space: object
    f_time_derivative: Callable | None = None  # (x, t, u) -> (m,)
    L_time_derivative: Callable | None = None  # (x, t, u) -> float

    def f_t_at(self, x, t, u, fd_step: float = 1e-6) -> np.ndarray:
        if self.f_time_derivative is not None:
            return np.asarray(self.f_time_derivative(x, t, u), dtype=float)
        fp = np.asarray(self.f(x, t + fd_step, u), dtype=float)
        fm = np.asarray(self.f(x, t - fd_step, u), dtype=float)
        return (fp - fm) / (2.0 * fd_step)

    def L_t_at(self, x, t, u, fd_step: float = 1e-6) -> float:
        if self.L_time_derivative is not None:
            return float(self.L_time_derivative(x, t, u))
        return (float(self.L(x, t + fd_step, u)) - float(self.L(x, t - fd_step, u))) / (2.0 * fd_step)


@dataclass(frozen=True)
class AutonomizedSystem:
    """Time-independent equivalent on the chart with an appended clock.

    Base coordinate ``clock_index`` is the clock (unit dynamics); the appended
    fiber coordinate is the constant clock rate 1.
    """

    system: ControlSystem
    source: TimeDependentControlSystem
    clock_index: int

    def initial_point(self, x0, t0: float) -> np.ndarray:
        return np.concatenate([np.asarray(x0, dtype=float), [float(t0)]])


def autonomize(tdsys: TimeDependentControlSystem) -> AutonomizedSystem:
    """Append a clock coordinate with unit dynamics so the problem becomes
    time-independent; the control map gains a constant unit component."""
    alg = tdsys.alg
    n, m = alg.base_dim, alg.fiber_dim

    def anchor(xe):
        out = np.zeros((n + 1, m + 1))
        out[:n, :m] = alg.anchor_at(xe[:n])
        out[n, m] = 1.0
        return out

    def structure(xe):
        out = np.zeros((m + 1, m + 1, m + 1))
        out[:m, :m, :m] = alg.structure_at(xe[:n])
        return out

    chart = ChartAlgebroid(n + 1, m + 1, anchor, structure,
                           name=f"clock-extended({alg.name})" if alg.name else "clock-extended")

    def f_ext(xe, u):
        return np.concatenate([np.asarray(tdsys.f(xe[:n], float(xe[n]), u), dtype=float),
                               [1.0]])

    def L_ext(xe, u):
        return float(tdsys.L(xe[:n], float(xe[n]), u))

    system = ControlSystem(chart, f_ext, L_ext, tdsys.control_space)
    return AutonomizedSystem(system, tdsys, n)


def time_dependence_audit(auto: AutonomizedSystem, flow: PmpFlow,
                          tol: float = 1e-5) -> dict:
    """Runtime checks specific to clock-extended flows.

    Verifies that the clock coordinate reproduces t exactly, that the clock
    costate compensates the Hamiltonian (H + xi constant), and that the
    sampled dH/dt matches  z_i df^i/dt + z0 dL/dt.
    """
    tdsys = auto.source
    clock = auto.clock_index
    m = tdsys.alg.fiber_dim
    nodes = flow.path.grid.nodes
    clock_error = float(np.abs(flow.path.base[:, clock] - nodes).max())

    xi = flow.costate.z[:, m]
    z = flow.costate.z[:, :m]
    z0 = flow.costate.z0
    x = flow.path.base[:, :clock]
    H = np.array([float(z[k] @ np.asarray(tdsys.f(x[k], nodes[k], flow.u_nodes[k]), dtype=float))
                  + z0 * float(tdsys.L(x[k], nodes[k], flow.u_nodes[k]))
                  for k in range(len(nodes))])
    dH = grid_derivative(flow.path.grid, H.reshape(-1, 1))[:, 0]
    residual = 0.0
    for i0, i1 in flow.path.grid.segment_bounds:
        for k in range(i0 + 1, i1):
            expected = float(z[k] @ tdsys.f_t_at(x[k], nodes[k], flow.u_nodes[k])
                             + z0 * tdsys.L_t_at(x[k], nodes[k], flow.u_nodes[k]))
            residual = max(residual, abs(dH[k] - expected))

    h_plus_xi = H + xi
    return {
        "clock_error": clock_error,
        "dhdt_residual": residual,
        "h_plus_xi_drift": float(np.abs(h_plus_xi - h_plus_xi[0]).max()),
        "xi_drift": float(np.abs(xi - xi[0]).max()),
        "h_drift": float(np.abs(H - H[0]).max()),
        "passed": clock_error == 0.0 and residual <= tol,
    }
