"""Artifact writers: legacy VTK ASCII and the CSV table formats.

All writers format floats with ``repr`` so identical inputs produce
byte-identical files.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Sequence

import numpy as np

from .geometry import Mesh

__all__ = [
    "write_mesh_vtk",
    "write_field_vtk",
    "write_structured_vtk",
    "write_csv",
    "fmt",
]


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path, header: Sequence[str], rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])
    return path


def _vtk_header(fh, title: str) -> None:
    fh.write("# vtk DataFile Version 3.0\n")
    fh.write(f"{title}\n")
    fh.write("ASCII\n")


def write_mesh_vtk(path, mesh: Mesh, title: str = "nimlab mesh") -> Path:
    """Legacy UNSTRUCTURED_GRID with region and inclusion tags as cell data."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        _vtk_header(fh, title)
        fh.write("DATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {mesh.num_vertices} double\n")
        for x, y in mesh.vertices:
            fh.write(f"{fmt(x)} {fmt(y)} 0.0\n")
        nt = mesh.num_triangles
        fh.write(f"CELLS {nt} {4 * nt}\n")
        for a, b, c in mesh.triangles:
            fh.write(f"3 {a} {b} {c}\n")
        fh.write(f"CELL_TYPES {nt}\n")
        fh.write("5\n" * nt)
        fh.write(f"CELL_DATA {nt}\n")
        fh.write("SCALARS region_tag int 1\nLOOKUP_TABLE default\n")
        fh.write("\n".join(str(int(t)) for t in mesh.region_tag) + "\n")
        fh.write("SCALARS inclusion_tag int 1\nLOOKUP_TABLE default\n")
        fh.write("\n".join(str(int(t)) for t in mesh.inclusion_tag) + "\n")
    return path


def write_field_vtk(path, mesh: Mesh, values: np.ndarray, name: str = "u") -> Path:
    """Mesh plus complex nodal field as point data (real, imag, magnitude)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        _vtk_header(fh, f"nimlab field {name}")
        fh.write("DATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {mesh.num_vertices} double\n")
        for x, y in mesh.vertices:
            fh.write(f"{fmt(x)} {fmt(y)} 0.0\n")
        nt = mesh.num_triangles
        fh.write(f"CELLS {nt} {4 * nt}\n")
        for a, b, c in mesh.triangles:
            fh.write(f"3 {a} {b} {c}\n")
        fh.write(f"CELL_TYPES {nt}\n")
        fh.write("5\n" * nt)
        fh.write(f"POINT_DATA {mesh.num_vertices}\n")
        for label, data in (
            (f"{name}_real", values.real),
            (f"{name}_imag", values.imag),
            (f"{name}_abs", np.abs(values)),
        ):
            fh.write(f"SCALARS {label} double 1\nLOOKUP_TABLE default\n")
            fh.write("\n".join(fmt(v) for v in data) + "\n")
    return path


def write_structured_vtk(path, h: float, fields: dict[str, np.ndarray]) -> Path:
    """Legacy STRUCTURED_POINTS snapshot of 3D scalar fields (cell samples)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    shapes = {a.shape for a in fields.values()}
    if len(shapes) != 1:
        raise ValueError("all snapshot fields must share one shape")
    nx, ny, nz = shapes.pop()
    with path.open("w") as fh:
        _vtk_header(fh, "nimlab snapshot")
        fh.write("DATASET STRUCTURED_POINTS\n")
        fh.write(f"DIMENSIONS {nx} {ny} {nz}\n")
        fh.write("ORIGIN 0 0 0\n")
        fh.write(f"SPACING {fmt(h)} {fmt(h)} {fmt(h)}\n")
        fh.write(f"POINT_DATA {nx * ny * nz}\n")
        for name, arr in fields.items():
            fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
            flat = np.transpose(arr, (2, 1, 0)).ravel()  # VTK is x-fastest
            fh.write("\n".join(fmt(v) for v in flat) + "\n")
    return path
