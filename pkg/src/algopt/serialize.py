"""CSV and JSON artifact formats.

Column layouts (all tables row-major, one sample per line):

  path CSV        t, x_1..x_n, a_1..a_m
  homotopy CSV    t, eps, x_1..x_n, a_1..a_m, b_1..b_m
  trajectory CSV  t, x_1..x_n, a_1..a_m, u_1..u_p
  costate CSV     t, z_1..z_m, z0, H
  frame CSV       t, B_11..B_mm, Bbar_11..Bbar_mm
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .control import TransportFrame
from .numerics import TimeGrid
from .paths import EPath, HomotopyField
from .pmp import CostatePath

__all__ = [
    "write_path_csv",
    "read_path_csv",
    "write_homotopy_csv",
    "write_trajectory_csv",
    "read_trajectory_csv",
    "write_costate_csv",
    "read_costate_csv",
    "write_frame_csv",
    "write_report_json",
]

_FMT = "%.17g"


def _fmt(x: float) -> str:
    return _FMT % x


def _write_rows(file, header: list[str], rows) -> None:
    path = Path(file)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _grid_from_csv(ts: np.ndarray, breakpoints) -> TimeGrid:
    return TimeGrid.from_nodes(ts, tuple(breakpoints))


def write_path_csv(file, path: EPath) -> None:
    n, m = path.base_dim, path.fiber_dim
    header = ["t"] + [f"x_{j+1}" for j in range(n)] + [f"a_{j+1}" for j in range(m)]
    rows = (np.concatenate(([t], path.base[k], path.fiber[k]))
            for k, t in enumerate(path.grid.nodes))
    _write_rows(file, header, rows)


def read_path_csv(file, breakpoints=()) -> EPath:
    data = np.genfromtxt(file, delimiter=",", names=True)
    names = data.dtype.names
    n = sum(1 for c in names if c.startswith("x_"))
    m = sum(1 for c in names if c.startswith("a_"))
    ts = np.atleast_1d(data["t"])
    base = np.column_stack([np.atleast_1d(data[f"x_{j+1}"]) for j in range(n)]) \
        if n else np.zeros((len(ts), 0))
    fiber = np.column_stack([np.atleast_1d(data[f"a_{j+1}"]) for j in range(m)])
    return EPath(_grid_from_csv(ts, breakpoints), base, fiber)


def write_homotopy_csv(file, field: HomotopyField) -> None:
    if field.b is None:
        raise ValueError("homotopy field has no b component")
    T, E, m = field.a.shape
    n = field.base.shape[2]
    header = (["t", "eps"] + [f"x_{j+1}" for j in range(n)]
              + [f"a_{j+1}" for j in range(m)] + [f"b_{j+1}" for j in range(m)])

    def rows():
        for it, t in enumerate(field.t_grid.nodes):
            for ie, e in enumerate(field.eps_nodes):
                yield np.concatenate(([t, e], field.base[it, ie],
                                      field.a[it, ie], field.b[it, ie]))

    _write_rows(file, header, rows())


def write_trajectory_csv(file, path: EPath, u_nodes: np.ndarray) -> None:
    u_nodes = np.atleast_2d(np.asarray(u_nodes, dtype=float))
    n, m, p = path.base_dim, path.fiber_dim, u_nodes.shape[1]
    header = (["t"] + [f"x_{j+1}" for j in range(n)] + [f"a_{j+1}" for j in range(m)]
              + [f"u_{j+1}" for j in range(p)])
    rows = (np.concatenate(([t], path.base[k], path.fiber[k], u_nodes[k]))
            for k, t in enumerate(path.grid.nodes))
    _write_rows(file, header, rows)


def read_trajectory_csv(file, breakpoints=()) -> tuple[EPath, np.ndarray]:
    data = np.genfromtxt(file, delimiter=",", names=True)
    names = data.dtype.names
    n = sum(1 for c in names if c.startswith("x_"))
    m = sum(1 for c in names if c.startswith("a_"))
    p = sum(1 for c in names if c.startswith("u_"))
    ts = np.atleast_1d(data["t"])
    base = np.column_stack([np.atleast_1d(data[f"x_{j+1}"]) for j in range(n)]) \
        if n else np.zeros((len(ts), 0))
    fiber = np.column_stack([np.atleast_1d(data[f"a_{j+1}"]) for j in range(m)])
    u_nodes = np.column_stack([np.atleast_1d(data[f"u_{j+1}"]) for j in range(p)])
    return EPath(_grid_from_csv(ts, breakpoints), base, fiber), u_nodes


def infer_breakpoints(ts: np.ndarray, u_nodes: np.ndarray) -> tuple[float, ...]:
    """Interior node times where the sampled control changes value; used to
    reconstruct segment structure when auditing CSV artifacts."""
    u_nodes = np.atleast_2d(np.asarray(u_nodes, dtype=float))
    out = []
    for k in range(1, len(ts) - 1):
        if not np.array_equal(u_nodes[k], u_nodes[k - 1]):
            out.append(float(ts[k]))
    return tuple(out)


def write_costate_csv(file, costate: CostatePath, h_nodes: np.ndarray) -> None:
    m = costate.fiber_dim
    header = ["t"] + [f"z_{j+1}" for j in range(m)] + ["z0", "H"]
    rows = (np.concatenate(([t], costate.z[k], [costate.z0, h_nodes[k]]))
            for k, t in enumerate(costate.grid.nodes))
    _write_rows(file, header, rows)


def read_costate_csv(file, breakpoints=()) -> tuple[CostatePath, np.ndarray]:
    data = np.genfromtxt(file, delimiter=",", names=True)
    names = data.dtype.names
    m = sum(1 for c in names if c.startswith("z_"))
    ts = np.atleast_1d(data["t"])
    z = np.column_stack([np.atleast_1d(data[f"z_{j+1}"]) for j in range(m)])
    z0 = float(np.atleast_1d(data["z0"])[0])
    h = np.atleast_1d(data["H"])
    return CostatePath(_grid_from_csv(ts, breakpoints), z, z0), h


def write_frame_csv(file, frame: TransportFrame) -> None:
    m = frame.B.shape[1]
    header = (["t"] + [f"B_{i+1}{j+1}" for i in range(m) for j in range(m)]
              + [f"Bbar_{i+1}{j+1}" for i in range(m) for j in range(m)])
    rows = (np.concatenate(([t], frame.B[k].ravel(), frame.Bbar[k].ravel()))
            for k, t in enumerate(frame.grid.nodes))
    _write_rows(file, header, rows)


def write_report_json(file, report: dict) -> None:
    path = Path(file)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    raise TypeError(f"cannot serialize {type(obj)!r}")
