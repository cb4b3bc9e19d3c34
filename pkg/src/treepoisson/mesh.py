"""Triangular meshes: construction, Triangle-format I/O and edge topology."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph


class MeshError(ValueError):
    """Invalid mesh geometry or topology."""


class MeshParseError(MeshError):
    """Malformed Triangle .node/.ele input."""

    def __init__(self, source: str, lineno: int, message: str):
        self.source = source
        self.lineno = lineno
        super().__init__(f"{source}, line {lineno}: {message}")


class LocationError(ValueError):
    """A query point lies outside every triangle of the mesh."""


def signed_areas(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """Shoelace signed area of each triangle (positive when counterclockwise)."""
    p0 = vertices[triangles[:, 0]]
    p1 = vertices[triangles[:, 1]]
    p2 = vertices[triangles[:, 2]]
    return 0.5 * ((p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1])
                  - (p2[:, 0] - p0[:, 0]) * (p1[:, 1] - p0[:, 1]))


@dataclass(frozen=True, eq=False)
class TriMesh:
    """A planar triangulation with counterclockwise triangles.

    Clockwise triangles are flipped on construction so that every stored
    triangle has positive signed area.

    Parameters
    ----------
    vertices : array_like, shape (n_vertices, 2)
    triangles : array_like of int, shape (n_triangles, 3)
        0-based vertex indices.
    vertex_markers, triangle_attributes : array_like, optional
        Tags carried through from the input files, unused by the solver.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    vertex_markers: Optional[np.ndarray] = None
    triangle_attributes: Optional[np.ndarray] = None

    def __post_init__(self):
        v = np.ascontiguousarray(self.vertices, dtype=float)
        t = np.ascontiguousarray(self.triangles, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != 2:
            raise MeshError(f"vertices must have shape (n, 2), got {v.shape}")
        t = t.reshape(-1, 3) if t.size == 0 else t
        if t.ndim != 2 or t.shape[1] != 3:
            raise MeshError(f"triangles must have shape (m, 3), got {t.shape}")
        if t.size and (t.min() < 0 or t.max() >= len(v)):
            bad = int(np.flatnonzero((t < 0) | (t >= len(v))).min() // 3)
            raise MeshError(f"triangle {bad} references a vertex index out of range")
        degenerate = (t[:, 0] == t[:, 1]) | (t[:, 1] == t[:, 2]) | (t[:, 0] == t[:, 2])
        if degenerate.any():
            raise MeshError(f"triangle {int(np.flatnonzero(degenerate)[0])} repeats a vertex")

        area = signed_areas(v, t)
        scale = np.ptp(v, axis=0).max() if len(v) else 1.0
        tiny = np.abs(area) <= 1e-14 * scale ** 2
        if tiny.any():
            raise MeshError(f"triangle {int(np.flatnonzero(tiny)[0])} has zero area")
        cw = area < 0
        if cw.any():
            t = t.copy()
            t[cw] = t[cw][:, [0, 2, 1]]

        if len(t):
            key = np.sort(t, axis=1)
            _, counts = np.unique(key, axis=0, return_counts=True)
            if (counts > 1).any():
                raise MeshError("mesh contains duplicate triangles")

        v.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def areas(self) -> np.ndarray:
        return signed_areas(self.vertices, self.triangles)

    @property
    def centroids(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    def locate(self, points, tol: float = 1e-12) -> np.ndarray:
        """Index of the triangle containing each point.

        Points on a shared edge or vertex resolve to the lowest triangle
        index.  Raises :class:`LocationError` for points outside the mesh.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        v = self.vertices
        p0 = v[self.triangles[:, 0]]
        e1 = v[self.triangles[:, 1]] - p0
        e2 = v[self.triangles[:, 2]] - p0
        det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
        out = np.empty(len(pts), dtype=np.int64)
        chunk = max(1, 2_000_000 // max(1, self.n_triangles))
        for start in range(0, len(pts), chunk):
            q = pts[start:start + chunk, None, :] - p0[None, :, :]
            b1 = (q[..., 0] * e2[:, 1] - q[..., 1] * e2[:, 0]) / det
            b2 = (e1[:, 0] * q[..., 1] - e1[:, 1] * q[..., 0]) / det
            inside = (b1 >= -tol) & (b2 >= -tol) & (b1 + b2 <= 1 + tol)
            found = inside.any(axis=1)
            if not found.all():
                i = start + int(np.flatnonzero(~found)[0])
                raise LocationError(f"point {tuple(pts[i])} lies outside the mesh")
            out[start:start + chunk] = inside.argmax(axis=1)
        return out


def generate_structured_square(n: int) -> TriMesh:
    """Uniform triangulation of the unit square with ``2 n**2`` triangles.

    Each grid cell is split along its lower-left to upper-right diagonal.
    Vertices are numbered row by row from the origin.
    """
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    n = int(n)
    x = np.linspace(0.0, 1.0, n + 1)
    xx, yy = np.meshgrid(x, x)
    vertices = np.column_stack([xx.ravel(), yy.ravel()])
    i, j = np.meshgrid(np.arange(n), np.arange(n))
    ll = (j * (n + 1) + i).ravel()
    lr, ul = ll + 1, ll + n + 1
    ur = ul + 1
    lower = np.column_stack([ll, lr, ur])
    upper = np.column_stack([ll, ur, ul])
    triangles = np.stack([lower, upper], axis=1).reshape(-1, 3)
    return TriMesh(vertices, triangles)


# ---------------------------------------------------------------------------
# Triangle .node / .ele files

def _data_lines(text: str):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line.split()


def parse_triangle_files(node_text: str, ele_text: str,
                         node_name: str = ".node", ele_name: str = ".ele") -> TriMesh:
    """Build a mesh from the contents of a Triangle ``.node`` / ``.ele`` pair.

    The index base (0 or 1) is taken from the first vertex record, as
    Triangle itself does.
    """
    lines = _data_lines(node_text)
    try:
        lineno, header = next(lines)
    except StopIteration:
        raise MeshParseError(node_name, 1, "missing header") from None
    try:
        n_nodes, dim, n_attr, n_mark = (int(tok) for tok in (header + ["0", "0"])[:4])
    except ValueError:
        raise MeshParseError(node_name, lineno, f"malformed header {' '.join(header)!r}") from None
    if n_nodes < 0 or dim != 2 or n_mark not in (0, 1) or n_attr < 0:
        raise MeshParseError(node_name, lineno, f"unsupported header {' '.join(header)!r}")

    vertices = np.empty((n_nodes, 2))
    markers = np.zeros(n_nodes, dtype=np.int64) if n_mark else None
    ids = np.empty(n_nodes, dtype=np.int64)
    width = 3 + n_attr + n_mark
    for k in range(n_nodes):
        try:
            lineno, tok = next(lines)
        except StopIteration:
            raise MeshParseError(node_name, lineno, f"expected {n_nodes} vertices, found {k}") from None
        if len(tok) < width:
            raise MeshParseError(node_name, lineno, f"expected {width} columns, found {len(tok)}")
        try:
            ids[k] = int(tok[0])
            vertices[k] = float(tok[1]), float(tok[2])
            if n_mark:
                markers[k] = int(tok[3 + n_attr])
        except ValueError:
            raise MeshParseError(node_name, lineno, "non-numeric vertex record") from None
    base = int(ids[0]) if n_nodes else 0
    if base not in (0, 1) or not np.array_equal(ids, np.arange(base, base + n_nodes)):
        raise MeshParseError(node_name, 2, "vertex indices must be consecutive from 0 or 1")

    lines = _data_lines(ele_text)
    try:
        lineno, header = next(lines)
    except StopIteration:
        raise MeshParseError(ele_name, 1, "missing header") from None
    try:
        n_tri, per_tri, n_tattr = (int(tok) for tok in (header + ["3", "0"])[:3])
    except ValueError:
        raise MeshParseError(ele_name, lineno, f"malformed header {' '.join(header)!r}") from None
    if n_tri < 0 or per_tri != 3 or n_tattr < 0:
        raise MeshParseError(ele_name, lineno, f"unsupported header {' '.join(header)!r}")

    triangles = np.empty((n_tri, 3), dtype=np.int64)
    tattr = np.empty((n_tri, n_tattr)) if n_tattr else None
    origins = np.empty(n_tri, dtype=np.int64)
    for k in range(n_tri):
        try:
            lineno, tok = next(lines)
        except StopIteration:
            raise MeshParseError(ele_name, lineno, f"expected {n_tri} triangles, found {k}") from None
        if len(tok) < 4 + n_tattr:
            raise MeshParseError(ele_name, lineno, f"expected {4 + n_tattr} columns, found {len(tok)}")
        try:
            tri = [int(s) - base for s in tok[1:4]]
            if n_tattr:
                tattr[k] = [float(s) for s in tok[4:4 + n_tattr]]
        except ValueError:
            raise MeshParseError(ele_name, lineno, "non-numeric triangle record") from None
        for vid in tri:
            if not 0 <= vid < n_nodes:
                raise MeshParseError(ele_name, lineno, f"vertex index {vid + base} out of range")
        if len(set(tri)) < 3:
            raise MeshParseError(ele_name, lineno, "triangle repeats a vertex")
        triangles[k] = tri
        origins[k] = lineno

    if n_tri:
        area = signed_areas(vertices, triangles)
        scale = np.ptp(vertices, axis=0).max()
        tiny = np.abs(area) <= 1e-14 * scale ** 2
        if tiny.any():
            raise MeshParseError(ele_name, int(origins[np.argmax(tiny)]), "zero-area triangle")
    return TriMesh(vertices, triangles, markers, tattr)


def read_triangle(prefix) -> TriMesh:
    """Read ``<prefix>.node`` and ``<prefix>.ele``."""
    prefix = str(prefix)
    node, ele = Path(prefix + ".node"), Path(prefix + ".ele")
    return parse_triangle_files(node.read_text(), ele.read_text(), str(node), str(ele))


def write_triangle(mesh: TriMesh, prefix) -> None:
    """Write ``mesh`` as a 0-based Triangle ``.node`` / ``.ele`` pair."""
    prefix = str(prefix)
    rows = [f"{mesh.n_vertices} 2 0 0"]
    rows += [f"{i} {x:.17g} {y:.17g}" for i, (x, y) in enumerate(mesh.vertices)]
    Path(prefix + ".node").write_text("\n".join(rows) + "\n")
    rows = [f"{mesh.n_triangles} 3 0"]
    rows += [f"{i} {a} {b} {c}" for i, (a, b, c) in enumerate(mesh.triangles)]
    Path(prefix + ".ele").write_text("\n".join(rows) + "\n")


# ---------------------------------------------------------------------------
# Topology

@dataclass(frozen=True, eq=False)
class MeshTopology:
    """Edge and adjacency structure derived from a :class:`TriMesh`.

    Attributes
    ----------
    edges : (n_edges, 2) int
        Vertex pairs, sorted within each row; rows in lexicographic order.
    edge_patches : (n_edges, 2) int
        Adjacent triangles in ascending order; ``-1`` in column 1 for
        boundary edges.  Column 0 is the plus patch of an interior edge.
    triangle_edges : (n_triangles, 3) int
        Edge opposite each local vertex of each triangle.
    interior_edges, boundary_edges : int arrays of edge ids
    interior_vertices : int array
        Vertices used by the mesh that touch no boundary edge.
    areas, lengths : float arrays
    dual : csr_matrix
        Patch adjacency; entry ``(p, q)`` holds ``1 + edge id`` of the
        shared edge.
    """

    mesh: TriMesh
    edges: np.ndarray
    edge_patches: np.ndarray
    triangle_edges: np.ndarray
    interior_edges: np.ndarray
    boundary_edges: np.ndarray
    interior_vertices: np.ndarray
    areas: np.ndarray
    lengths: np.ndarray
    dual: sparse.csr_matrix = field(repr=False)

    @property
    def n_patches(self) -> int:
        return self.mesh.n_triangles

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def is_simply_connected(self) -> bool:
        return len(self.interior_edges) == self.n_patches - 1 + len(self.interior_vertices)

    def neighbors(self, patch: int) -> np.ndarray:
        lo, hi = self.dual.indptr[patch], self.dual.indptr[patch + 1]
        return self.dual.indices[lo:hi]


def build_topology(mesh: TriMesh) -> MeshTopology:
    """Deduplicate edges, classify them and build the patch adjacency graph."""
    tri = mesh.triangles
    n_tri = len(tri)
    if n_tri == 0:
        raise MeshError("mesh has no triangles")
    half = np.stack([tri[:, [1, 2]], tri[:, [2, 0]], tri[:, [0, 1]]], axis=1).reshape(-1, 2)
    half = np.sort(half, axis=1)
    edges, inverse, counts = np.unique(half, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.ravel()
    if (counts > 2).any():
        e = edges[np.argmax(counts > 2)]
        raise MeshError(f"non-manifold edge {tuple(int(i) for i in e)} shared by more than two triangles")

    owner = np.repeat(np.arange(n_tri), 3)
    order = np.lexsort((owner, inverse))
    first = np.ones(len(order), dtype=bool)
    first[1:] = inverse[order][1:] != inverse[order][:-1]
    edge_patches = np.full((len(edges), 2), -1, dtype=np.int64)
    edge_patches[inverse[order][first], 0] = owner[order][first]
    edge_patches[inverse[order][~first], 1] = owner[order][~first]

    interior = np.flatnonzero(counts == 2)
    boundary = np.flatnonzero(counts == 1)
    on_boundary = np.zeros(mesh.n_vertices, dtype=bool)
    on_boundary[edges[boundary].ravel()] = True
    used = np.zeros(mesh.n_vertices, dtype=bool)
    used[tri.ravel()] = True
    interior_vertices = np.flatnonzero(used & ~on_boundary)

    p, q = edge_patches[interior, 0], edge_patches[interior, 1]
    dual = sparse.coo_matrix(
        (np.concatenate([interior, interior]) + 1, (np.concatenate([p, q]), np.concatenate([q, p]))),
        shape=(n_tri, n_tri)).tocsr()
    dual.sort_indices()
    n_comp, _ = csgraph.connected_components(dual, directed=False)
    if n_comp > 1:
        raise MeshError(f"dual graph is disconnected ({n_comp} components)")

    d = mesh.vertices[edges[:, 1]] - mesh.vertices[edges[:, 0]]
    lengths = np.hypot(d[:, 0], d[:, 1])
    arrays = [edges, edge_patches, inverse.reshape(n_tri, 3), interior, boundary,
              interior_vertices, mesh.areas, lengths]
    for a in arrays:
        a.setflags(write=False)
    return MeshTopology(mesh, *arrays, dual)
