"""CSV, legacy VTK and JSON outputs of a solve."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .mesh import MeshTopology, TriMesh


def _fmt(x) -> str:
    return format(float(x), ".17g")


def write_potential_csv(path, mesh: TriMesh, nu) -> None:
    c = mesh.centroids
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["patch", "x", "y", "phi"])
        for i, (xy, v) in enumerate(zip(c, np.asarray(nu))):
            w.writerow([i, _fmt(xy[0]), _fmt(xy[1]), _fmt(v)])


def read_potential_csv(path):
    """Return ``(patch indices, centroids, phi)`` from :func:`write_potential_csv` output."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    idx = np.array([int(r["patch"]) for r in rows], dtype=np.int64)
    xy = np.array([[float(r["x"]), float(r["y"])] for r in rows]).reshape(-1, 2)
    phi = np.array([float(r["phi"]) for r in rows])
    return idx, xy, phi


def write_dfield_csv(path, topology: MeshTopology, coeffs) -> None:
    """One row per mesh edge: midpoint and normal flux density of D.

    Interior edges are oriented from their plus (lower index) patch to the
    minus patch, boundary edges outward.
    """
    v = topology.mesh.vertices
    mid = 0.5 * (v[topology.edges[:, 0]] + v[topology.edges[:, 1]])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["edge", "x", "y", "coefficient"])
        for i, (xy, c) in enumerate(zip(mid, np.asarray(coeffs))):
            w.writerow([i, _fmt(xy[0]), _fmt(xy[1]), _fmt(c)])


def write_vtk(path, mesh: TriMesh, nu, title: str = "treepoisson potential") -> None:
    """Legacy ASCII VTK unstructured grid with cell scalar ``phi``."""
    n, m = mesh.n_vertices, mesh.n_triangles
    lines = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {n} double"]
    lines += [f"{_fmt(x)} {_fmt(y)} 0" for x, y in mesh.vertices]
    lines.append(f"CELLS {m} {4 * m}")
    lines += [f"3 {a} {b} {c}" for a, b, c in mesh.triangles]
    lines.append(f"CELL_TYPES {m}")
    lines += ["5"] * m
    lines += [f"CELL_DATA {m}", "SCALARS phi double 1", "LOOKUP_TABLE default"]
    lines += [_fmt(x) for x in np.asarray(nu)]
    Path(path).write_text("\n".join(lines) + "\n")


def write_report(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
