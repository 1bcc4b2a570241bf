"""Control systems on a chart: trajectory simulation, the cost-absorbing
extension, and the two parallel-transport operators with their pairing law.

Transport along a trajectory x(t) integrates, jointly with the base,

    fiber flow      ydot^i = df^i/dx^a rho^a_k y^k + c^i_jk y^j f^k ,
    dual flow       zdot_k = -rho^a_k (df^i/dx^a z_i + dL/dx^a z0)
                             + c^i_jk f^j z_i ,          z0dot = 0.

The two flows preserve the fiber/dual pairing exactly when the structure
functions are skew; :func:`pairing_drift` measures the numerical defect.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .core import ChartAlgebroid, ExtendedAlgebroid, product_with_time
from .numerics import TimeGrid, finite_difference_jacobian, integrate_segmented
from .paths import EPath

__all__ = [
    "FiniteSet",
    "Box",
    "ControlSpace",
    "ControlSignal",
    "ControlSystem",
    "Trajectory",
    "TransportFrame",
    "simulate_trajectory",
    "extend_system",
    "transport_B",
    "transport_Bbar",
    "transport_frame",
    "pairing_drift",
]

_DEFAULT_FD_STEP = 1e-5


def _as_control(u) -> np.ndarray:
    return np.atleast_1d(np.asarray(u, dtype=float))


@dataclass(frozen=True)
class FiniteSet:
    """Finite control set; values are kept in listing order for tie-breaking."""

    values: tuple

    def __post_init__(self):
        vals = tuple(_as_control(v) for v in self.values)
        if not vals:
            raise ValueError("finite control set must be nonempty")
        if len({v.shape for v in vals}) != 1:
            raise ValueError("control values must share one dimension")
        object.__setattr__(self, "values", vals)

    @property
    def dim(self) -> int:
        return self.values[0].size

    def contains(self, u) -> bool:
        u = _as_control(u)
        return any(np.allclose(u, v, atol=1e-12) for v in self.values)


@dataclass(frozen=True)
class Box:
    """Axis-aligned box of controls, with an optional closed-form maximizer
    ``maximizer(x, z, z0) -> u`` registered by a scenario."""

    lower: np.ndarray
    upper: np.ndarray
    maximizer: Callable | None = None

    def __post_init__(self):
        lo = _as_control(self.lower)
        hi = _as_control(self.upper)
        if lo.shape != hi.shape or np.any(lo > hi):
            raise ValueError("box bounds must satisfy lower <= upper componentwise")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return self.lower.size

    def contains(self, u) -> bool:
        u = _as_control(u)
        return bool(np.all(u >= self.lower - 1e-12) and np.all(u <= self.upper + 1e-12))

    def clip(self, u) -> np.ndarray:
        return np.clip(_as_control(u), self.lower, self.upper)


ControlSpace = Union[FiniteSet, Box]


@dataclass(frozen=True)
class ControlSignal:
    """Piecewise-constant control; right-continuous at its switch times."""

    t0: float
    t1: float
    switch_times: tuple[float, ...]
    values: tuple

    def __post_init__(self):
        st = tuple(float(s) for s in self.switch_times)
        if any(not (self.t0 < s < self.t1) for s in st):
            raise ValueError("switch times must lie strictly inside the interval")
        if any(b >= a for a, b in zip(st[1:], st[:-1])):
            raise ValueError("switch times must be strictly increasing")
        vals = tuple(_as_control(v) for v in self.values)
        if len(vals) != len(st) + 1:
            raise ValueError(f"{len(st)} switch times need {len(st) + 1} segment values")
        object.__setattr__(self, "switch_times", st)
        object.__setattr__(self, "values", vals)

    @classmethod
    def constant(cls, u, t0: float, t1: float) -> "ControlSignal":
        return cls(t0, t1, (), (u,))

    def value(self, t: float) -> np.ndarray:
        idx = int(np.searchsorted(self.switch_times, t, side="right"))
        return self.values[idx]

    def segment_value(self, seg_index: int) -> np.ndarray:
        return self.values[seg_index]


@dataclass(frozen=True)
class ControlSystem:
    """Control map f(x, u) into the fiber and running cost L(x, u)."""

    alg: ChartAlgebroid
    f: Callable[[np.ndarray, np.ndarray], np.ndarray]
    L: Callable[[np.ndarray, np.ndarray], float]
    control_space: ControlSpace
    f_jacobian: Callable | None = None   # (x, u) -> (m, n)
    L_gradient: Callable | None = None   # (x, u) -> (n,)

    def f_at(self, x, u) -> np.ndarray:
        out = np.asarray(self.f(np.asarray(x, dtype=float), _as_control(u)), dtype=float)
        if out.shape != (self.alg.fiber_dim,):
            raise ValueError(f"f returned shape {out.shape}, expected {(self.alg.fiber_dim,)}")
        return out

    def L_at(self, x, u) -> float:
        return float(self.L(np.asarray(x, dtype=float), _as_control(u)))

    def f_jac_at(self, x, u, fd_step: float = _DEFAULT_FD_STEP) -> np.ndarray:
        if self.f_jacobian is not None:
            return np.asarray(self.f_jacobian(np.asarray(x, dtype=float), _as_control(u)),
                              dtype=float)
        if self.alg.base_dim == 0:
            return np.zeros((self.alg.fiber_dim, 0))
        u = _as_control(u)
        return finite_difference_jacobian(lambda p: self.f_at(p, u), x, fd_step)

    def L_grad_at(self, x, u, fd_step: float = _DEFAULT_FD_STEP) -> np.ndarray:
        if self.L_gradient is not None:
            return np.asarray(self.L_gradient(np.asarray(x, dtype=float), _as_control(u)),
                              dtype=float)
        if self.alg.base_dim == 0:
            return np.zeros(0)
        u = _as_control(u)
        return finite_difference_jacobian(lambda p: self.L_at(p, u), x, fd_step)[0]


@dataclass(frozen=True)
class Trajectory:
    """An admissible path together with the control that produced it."""

    path: EPath
    control: ControlSignal


def _signal_grid(signal: ControlSignal, t0: float, t1: float, step: float) -> TimeGrid:
    inner = tuple(s for s in signal.switch_times if t0 < s < t1)
    return TimeGrid(t0, t1, step, inner)


def simulate_trajectory(sys: ControlSystem, signal: ControlSignal, x0: np.ndarray,
                        t0: float | None = None, t1: float | None = None,
                        step: float = 1e-3) -> Trajectory:
    """Integrate xdot = rho(x) f(x, u(t)) and attach fiber samples a = f(x, u)."""
    for v in signal.values:
        if not sys.control_space.contains(v):
            raise ValueError(f"control value {v} outside the control space")
    t0 = signal.t0 if t0 is None else t0
    t1 = signal.t1 if t1 is None else t1
    grid = _signal_grid(signal, t0, t1, step)

    def make_rhs(seg, lo, hi):
        u = signal.value(0.5 * (lo + hi))

        def rhs(t, x):
            return sys.alg.anchor_at(x) @ sys.f_at(x, u)

        return rhs

    base = integrate_segmented(make_rhs, grid, np.asarray(x0, dtype=float))
    fiber = np.array([sys.f_at(base[k], signal.value(tk))
                      for k, tk in enumerate(grid.nodes)])
    return Trajectory(EPath(grid, base, fiber), signal)


def extend_system(sys: ControlSystem) -> tuple[ControlSystem, ExtendedAlgebroid]:
    """Absorb the cost: on the time-extended chart the control map becomes
    (L(x, u), f(x, u)), the extra base coordinate integrates the running cost,
    and the cost of the extended system is identically zero."""
    ext = product_with_time(sys.alg)
    n, m = sys.alg.base_dim, sys.alg.fiber_dim

    def f_ext(xx, u):
        x = xx[1:]
        return np.concatenate(([sys.L_at(x, u)], sys.f_at(x, u)))

    def f_jac_ext(xx, u):
        x = xx[1:]
        out = np.zeros((m + 1, n + 1))
        out[0, 1:] = sys.L_grad_at(x, u)
        out[1:, 1:] = sys.f_jac_at(x, u)
        return out

    return ControlSystem(
        alg=ext.inner,
        f=f_ext,
        L=lambda xx, u: 0.0,
        control_space=sys.control_space,
        f_jacobian=f_jac_ext,
        L_gradient=lambda xx, u: np.zeros(n + 1),
    ), ext


def _fiber_flow_matrix(sys: ControlSystem, x: np.ndarray, u: np.ndarray) -> np.ndarray:
    """M with ydot = M y along the lifted section: M = df/dx rho + c[., f]."""
    rho = sys.alg.anchor_at(x)
    jf = sys.f_jac_at(x, u)
    c = sys.alg.structure_at(x)
    f = sys.f_at(x, u)
    return jf @ rho + np.einsum("ijk,k->ij", c, f)


def transport_B(sys: ControlSystem, traj: Trajectory, y0: np.ndarray) -> np.ndarray:
    """Transport the fiber vector y0 along the trajectory; returns samples (N, m)."""
    path, signal = traj.path, traj.control
    n, m = sys.alg.base_dim, sys.alg.fiber_dim
    y0 = np.asarray(y0, dtype=float)
    if y0.shape != (m,):
        raise ValueError(f"fiber vector has shape {y0.shape}, expected {(m,)}")

    def make_rhs(seg, lo, hi):
        u = signal.value(0.5 * (lo + hi))

        def rhs(t, state):
            x, y = state[:n], state[n:]
            xdot = sys.alg.anchor_at(x) @ sys.f_at(x, u)
            ydot = _fiber_flow_matrix(sys, x, u) @ y
            return np.concatenate([xdot, ydot])

        return rhs

    state0 = np.concatenate([path.base[0], y0])
    out = integrate_segmented(make_rhs, path.grid, state0)
    return out[:, n:]


def costate_rhs(sys: ControlSystem, x: np.ndarray, u: np.ndarray, z: np.ndarray,
                z0: float) -> np.ndarray:
    """zdot_k = -rho^a_k (df^i/dx^a z_i + dL/dx^a z0) + c^i_jk f^j z_i."""
    rho = sys.alg.anchor_at(x)
    jf = sys.f_jac_at(x, u)
    c = sys.alg.structure_at(x)
    f = sys.f_at(x, u)
    zdot = np.einsum("ijk,j,i->k", c, f, z)
    if sys.alg.base_dim:
        zdot -= rho.T @ (jf.T @ z + z0 * sys.L_grad_at(x, u))
    return zdot


def transport_Bbar(sys: ControlSystem, traj: Trajectory, z0_pair) -> tuple[np.ndarray, float]:
    """Transport a dual vector along the trajectory.

    ``z0_pair`` is (z, z0); the multiplier z0 is a constant parameter of the
    flow and is never integrated.  The plain dual transport is the z0 = 0
    case.  Returns (samples (N, m), z0).
    """
    z_init, z0 = z0_pair
    path, signal = traj.path, traj.control
    n, m = sys.alg.base_dim, sys.alg.fiber_dim
    z_init = np.asarray(z_init, dtype=float)
    if z_init.shape != (m,):
        raise ValueError(f"dual vector has shape {z_init.shape}, expected {(m,)}")
    z0 = float(z0)

    def make_rhs(seg, lo, hi):
        u = signal.value(0.5 * (lo + hi))

        def rhs(t, state):
            x, z = state[:n], state[n:]
            xdot = sys.alg.anchor_at(x) @ sys.f_at(x, u)
            return np.concatenate([xdot, costate_rhs(sys, x, u, z, z0)])

        return rhs

    state0 = np.concatenate([path.base[0], z_init])
    out = integrate_segmented(make_rhs, path.grid, state0)
    return out[:, n:], z0


@dataclass(frozen=True)
class TransportFrame:
    """Linear transport maps from t0 to every grid node, for the fiber flow (B)
    and the dual flow at z0 = 0 (Bbar); B[0] and Bbar[0] are identities."""

    grid: TimeGrid
    B: np.ndarray     # (N, m, m)
    Bbar: np.ndarray  # (N, m, m)


def transport_frame(sys: ControlSystem, traj: Trajectory) -> TransportFrame:
    """Materialize both transports by flowing full bases along the trajectory."""
    path, signal = traj.path, traj.control
    n, m = sys.alg.base_dim, sys.alg.fiber_dim

    def make_rhs(seg, lo, hi):
        u = signal.value(0.5 * (lo + hi))

        def rhs(t, state):
            x = state[:n]
            Bmat = state[n:n + m * m].reshape(m, m)
            Cmat = state[n + m * m:].reshape(m, m)
            xdot = sys.alg.anchor_at(x) @ sys.f_at(x, u)
            M = _fiber_flow_matrix(sys, x, u)
            Bdot = M @ Bmat
            Cdot = np.column_stack([costate_rhs(sys, x, u, Cmat[:, j], 0.0)
                                    for j in range(m)])
            return np.concatenate([xdot, Bdot.ravel(), Cdot.ravel()])

        return rhs

    eye = np.eye(m)
    state0 = np.concatenate([path.base[0], eye.ravel(), eye.ravel()])
    out = integrate_segmented(make_rhs, path.grid, state0)
    N = path.grid.n_nodes
    B = out[:, n:n + m * m].reshape(N, m, m)
    Bbar = out[:, n + m * m:].reshape(N, m, m)
    return TransportFrame(path.grid, B, Bbar)


def pairing_drift(sys: ControlSystem, traj: Trajectory, y0: np.ndarray,
                  xi0: np.ndarray) -> float:
    """Max over the grid of |<B y0, Bbar xi0> - <y0, xi0>|."""
    ys = transport_B(sys, traj, y0)
    zs, _ = transport_Bbar(sys, traj, (xi0, 0.0))
    pairing = np.einsum("ni,ni->n", ys, zs)
    return float(np.abs(pairing - pairing[0]).max())
