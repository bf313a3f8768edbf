"""Deterministic serialization: series CSV, JSON reports, binary snapshots."""

from __future__ import annotations

import json
import math
import struct
from pathlib import Path
from typing import Any, NamedTuple

import numpy as np

from .grid import Field, Grid
from .solver import Trajectory
from .theorems import lower_bound
from .problem import ProblemSpec

__all__ = [
    "SERIES_COLUMNS",
    "SNAPSHOT_MAGIC",
    "SnapshotHeader",
    "write_series_csv",
    "read_series_csv",
    "write_json",
    "to_jsonable",
    "write_snapshot",
    "read_snapshot",
]

SERIES_COLUMNS = ("t", "M", "lower_bound", "min_u", "max_u", "L1", "L2", "picard_iters")
SNAPSHOT_MAGIC = b"FMSNAP01"
_HEADER = struct.Struct("<8sIIdd")  # magic, d, n, L, t: 32 bytes


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_series_csv(path: str | Path, traj: Trajectory, spec: ProblemSpec) -> None:
    lb = lower_bound(spec, traj.t)
    cols = [traj.t, traj.M, lb, traj.series("min_u"), traj.series("max_u"), traj.series("l1"), traj.series("l2")]
    lines = [",".join(SERIES_COLUMNS)]
    for i in range(len(traj.times)):
        lines.append(",".join([_fmt(c[i]) for c in cols] + [str(int(traj.picard_iters[i]))]))
    Path(path).write_text("\n".join(lines) + "\n")


def read_series_csv(path: str | Path) -> dict[str, np.ndarray]:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return {name: data[:, i] for i, name in enumerate(SERIES_COLUMNS)}


def to_jsonable(obj: Any) -> Any:
    """Plain JSON types; non-finite floats become null."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if obj is None or isinstance(obj, str):
        return obj
    if hasattr(obj, "describe"):
        return to_jsonable(obj.describe())
    return str(obj)


def write_json(path: str | Path, obj: Any) -> None:
    text = json.dumps(to_jsonable(obj), sort_keys=True, indent=2, allow_nan=False)
    Path(path).write_text(text + "\n")


class SnapshotHeader(NamedTuple):
    d: int
    n: int
    L: float
    t: float


def write_snapshot(path: str | Path, f: Field, t: float) -> None:
    g = f.grid
    head = _HEADER.pack(SNAPSHOT_MAGIC, g.d, g.n, float(g.L), float(t))
    Path(path).write_bytes(head + np.ascontiguousarray(f.values, dtype="<f8").tobytes())


def read_snapshot(path: str | Path) -> tuple[SnapshotHeader, Field]:
    raw = Path(path).read_bytes()
    magic, d, n, L, t = _HEADER.unpack_from(raw)
    if magic != SNAPSHOT_MAGIC:
        raise ValueError(f"{path}: not a snapshot file")
    grid = Grid(d, n, L)
    vals = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    if vals.size != grid.size:
        raise ValueError(f"{path}: expected {grid.size} values, found {vals.size}")
    return SnapshotHeader(d, n, L, t), Field(grid, vals.reshape(grid.shape))
