"""File writers. All numbers are written with 10 significant digits so
output is byte-stable for a fixed configuration."""
from __future__ import annotations

from pathlib import Path
from typing import Iterable

import numpy as np

from .analysis import diagonal_profile

TIMESERIES_COLUMNS = (
    "t", "l2_M", "l2_F", "l2_Ms", "int_M", "int_F", "int_Ms", "min_M", "min_F", "min_Ms", "cg_iter",
)
SPECIES_TAGS = {"M": "M", "F": "F", "M_S": "Ms"}


def fmt(x: float) -> str:
    s = f"{float(x):.10g}"
    return "0" if s == "-0" else s


def write_timeseries(path: Path, records: Iterable) -> None:
    lines = [",".join(TIMESERIES_COLUMNS)]
    for r in records:
        vals = [r.t, *r.l2, *r.integral, *r.minimum]
        lines.append(",".join(fmt(v) for v in vals) + f",{int(r.cg_iterations)}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_timeseries(path: Path) -> dict[str, np.ndarray]:
    data = np.genfromtxt(path, delimiter=",", names=True)
    return {name: np.atleast_1d(data[name]) for name in data.dtype.names}


def write_profile(path: Path, u: np.ndarray, mesh) -> None:
    prof = diagonal_profile(u, mesh)
    lines = ["x,value"] + [f"{fmt(x)},{fmt(v)}" for x, v in zip(prof.x, prof.values)]
    Path(path).write_text("\n".join(lines) + "\n")


def write_field_csv(path: Path, u: np.ndarray, mesh) -> None:
    """One row per grid line y = j/n, one column per x = i/n (lexicographic order)."""
    grid = np.asarray(u).reshape(mesh.n + 1, mesh.n + 1)
    Path(path).write_text("\n".join(",".join(fmt(v) for v in row) for row in grid) + "\n")


def write_vtk(path: Path, u: np.ndarray, mesh, name: str = "value") -> None:
    """Legacy ASCII VTK, STRUCTURED_GRID with one point scalar.

    Layout::

        # vtk DataFile Version 3.0
        <title line>
        ASCII
        DATASET STRUCTURED_GRID
        DIMENSIONS n+1 n+1 1
        POINTS (n+1)^2 double
        x y 0            (one line per node, lexicographic order)
        POINT_DATA (n+1)^2
        SCALARS <name> double 1
        LOOKUP_TABLE default
        value            (one line per node)
    """
    N = mesh.num_nodes
    out = [
        "# vtk DataFile Version 3.0",
        f"sitfem {name}",
        "ASCII",
        "DATASET STRUCTURED_GRID",
        f"DIMENSIONS {mesh.n + 1} {mesh.n + 1} 1",
        f"POINTS {N} double",
    ]
    out += [f"{fmt(x)} {fmt(y)} 0" for x, y in mesh.nodes]
    out += [f"POINT_DATA {N}", f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
    out += [fmt(v) for v in u]
    Path(path).write_text("\n".join(out) + "\n")


def read_vtk_scalars(path: Path) -> np.ndarray:
    lines = Path(path).read_text().splitlines()
    k = lines.index("LOOKUP_TABLE default")
    return np.array([float(v) for v in lines[k + 1:]])


def write_snapshot(directory: Path, label: str, state, mesh, profiles: bool, fields: bool) -> list[Path]:
    written = []
    for sp, u in zip(("M", "F", "M_S"), state.species()):
        tag = SPECIES_TAGS[sp]
        if profiles:
            p = directory / f"profile_{tag}_t{label}.csv"
            write_profile(p, u, mesh)
            written.append(p)
        if fields:
            p = directory / f"field_{tag}_t{label}.csv"
            write_field_csv(p, u, mesh)
            q = directory / f"field_{tag}_t{label}.vtk"
            write_vtk(q, u, mesh, tag)
            written += [p, q]
    return written
