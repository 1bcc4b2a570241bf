"""Deterministic fixed-step ODE integration with discontinuity-aware time grids.

All flow computations in the library go through :func:`integrate` /
:func:`integrate_segmented`, which apply classical fourth-order Runge-Kutta
segment-wise between declared breakpoints and never step across one.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from .errors import IntegrationDivergedError

__all__ = [
    "TimeGrid",
    "OdeRhs",
    "integrate",
    "integrate_segmented",
    "rk4_step",
    "finite_difference_jacobian",
    "grid_derivative",
]

# Relative slack when deciding whether a remaining interval still fits one step.
_STEP_SLACK = 1e-9


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid on [t0, t1] refined so that every breakpoint is a node.

    Nodes are accumulated segment-by-segment (t += step) so that repeated
    unit-rate integration reproduces node times bitwise.  The final interval
    of each segment may be shorter than ``step``.  ``nodes_override`` carries
    explicit nodes for grids obtained by path composition, where spacing is
    no longer uniform; ``step`` is then the nominal (maximal) spacing.
    """

    t0: float
    t1: float
    step: float
    breakpoints: tuple[float, ...] = ()
    nodes_override: tuple[float, ...] | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if not (self.t0 < self.t1):
            raise ValueError(f"need t0 < t1, got [{self.t0}, {self.t1}]")
        if not (self.step > 0):
            raise ValueError(f"step must be positive, got {self.step}")
        bps = tuple(float(b) for b in np.unique(np.asarray(self.breakpoints, dtype=float)))
        for b in bps:
            if not (self.t0 < b < self.t1):
                raise ValueError(f"breakpoint {b} outside open interval ({self.t0}, {self.t1})")
        object.__setattr__(self, "breakpoints", bps)

    @classmethod
    def from_nodes(cls, nodes: Sequence[float], breakpoints: Sequence[float] = (),
                   step: float | None = None) -> "TimeGrid":
        nodes = tuple(float(t) for t in nodes)
        if len(nodes) < 2:
            raise ValueError("need at least two nodes")
        diffs = np.diff(nodes)
        if np.any(diffs <= 0):
            raise ValueError("nodes must be strictly increasing")
        node_set = set(nodes)
        for b in breakpoints:
            if float(b) not in node_set:
                raise ValueError(f"breakpoint {b} is not a node")
        if step is None:
            step = float(diffs.max())
        return cls(nodes[0], nodes[-1], step, tuple(breakpoints), nodes_override=nodes)

    @cached_property
    def nodes(self) -> np.ndarray:
        if self.nodes_override is not None:
            out = np.asarray(self.nodes_override, dtype=float)
        else:
            bounds = (self.t0, *self.breakpoints, self.t1)
            acc = []
            for lo, hi in zip(bounds[:-1], bounds[1:]):
                t = lo
                acc.append(t)
                while hi - t > self.step * (1.0 + _STEP_SLACK):
                    t = t + self.step
                    acc.append(t)
            acc.append(self.t1)
            out = np.asarray(acc, dtype=float)
        out.flags.writeable = False
        return out

    @cached_property
    def segment_bounds(self) -> tuple[tuple[int, int], ...]:
        """Index ranges (start, stop inclusive) of the smooth segments."""
        nodes = self.nodes
        cuts = [0]
        for b in self.breakpoints:
            cuts.append(int(np.searchsorted(nodes, b)))
        cuts.append(len(nodes) - 1)
        return tuple((cuts[k], cuts[k + 1]) for k in range(len(cuts) - 1))

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)


@dataclass(frozen=True)
class OdeRhs:
    """Right-hand side of an ODE, smooth on each inter-breakpoint segment."""

    dimension: int
    eval: Callable[[float, np.ndarray], np.ndarray]


def rk4_step(fn, t: float, y: np.ndarray, h: float) -> np.ndarray:
    """One classical RK4 step.

    The increment is written as ``h * (combo / 6)`` so that a unit-rate RHS
    advances the state by exactly ``h`` in floating point.
    """
    k1 = fn(t, y)
    k2 = fn(t + h / 2.0, y + (h / 2.0) * k1)
    k3 = fn(t + h / 2.0, y + (h / 2.0) * k2)
    k4 = fn(t + h, y + h * k3)
    return y + h * ((k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0)


def integrate_segmented(make_rhs, grid: TimeGrid, y0: np.ndarray) -> np.ndarray:
    """RK4 over ``grid``, with a per-segment RHS factory.

    ``make_rhs(seg_index, t_lo, t_hi)`` returns the RHS callable used on that
    segment, so piecewise-defined fields (e.g. held controls) are evaluated on
    the correct side of each breakpoint, including at the closing stage point.
    Returns an array of shape (n_nodes, dim).
    """
    y = np.array(y0, dtype=float)
    if not np.all(np.isfinite(y)):
        raise ValueError("initial state must be finite")
    nodes = grid.nodes
    out = np.empty((len(nodes), y.size))
    out[0] = y
    for seg_index, (i0, i1) in enumerate(grid.segment_bounds):
        fn = make_rhs(seg_index, nodes[i0], nodes[i1])
        for k in range(i0, i1):
            h = nodes[k + 1] - nodes[k]
            y = rk4_step(fn, nodes[k], y, h)
            if not np.all(np.isfinite(y)):
                raise IntegrationDivergedError(nodes[k + 1])
            out[k + 1] = y
    return out


def integrate(rhs, grid: TimeGrid, y0: np.ndarray) -> np.ndarray:
    """RK4 integration of ``rhs`` at every node of ``grid``.

    ``rhs`` is an :class:`OdeRhs` or a plain callable ``(t, y) -> dy``.  It is
    evaluated segment-wise and must be well defined at segment closures.
    """
    fn = rhs.eval if isinstance(rhs, OdeRhs) else rhs
    dim = rhs.dimension if isinstance(rhs, OdeRhs) else np.asarray(y0).size
    if np.asarray(y0, dtype=float).size != dim:
        raise ValueError(f"state dimension {np.asarray(y0).size} does not match rhs dimension {dim}")
    return integrate_segmented(lambda seg, lo, hi: fn, grid, y0)


def finite_difference_jacobian(fn, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central-difference Jacobian of ``fn`` at ``x``; column j uses x +/- h e_j."""
    if not (h > 0):
        raise ValueError("finite-difference step must be positive")
    x = np.asarray(x, dtype=float)
    f0 = np.atleast_1d(np.asarray(fn(x), dtype=float))
    jac = np.empty((f0.size, x.size))
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        fp = np.atleast_1d(np.asarray(fn(x + e), dtype=float))
        fm = np.atleast_1d(np.asarray(fn(x - e), dtype=float))
        jac[:, j] = (fp - fm) / (2.0 * h)
    return jac


def grid_derivative(grid: TimeGrid, values: np.ndarray) -> np.ndarray:
    """Time derivative of node samples, segment-wise (never across breakpoints).

    Uses second-order central differences inside each segment and one-sided
    differences at segment edges.  At a breakpoint node the derivative of the
    right segment wins, matching the convention that samples stored at a
    breakpoint carry the right-hand limit.
    """
    values = np.asarray(values, dtype=float)
    nodes = grid.nodes
    if values.shape[0] != len(nodes):
        raise ValueError("sample count does not match grid nodes")
    out = np.empty_like(values)
    for i0, i1 in grid.segment_bounds:
        seg_t = nodes[i0:i1 + 1]
        seg_v = values[i0:i1 + 1]
        edge = 2 if len(seg_t) >= 3 else 1
        out[i0:i1 + 1] = np.gradient(seg_v, seg_t, axis=0, edge_order=edge)
    return out
