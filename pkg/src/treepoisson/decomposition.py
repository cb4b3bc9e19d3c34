"""Edge (RWG-type) basis, dual-graph spanning tree and loop basis."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .mesh import MeshError, MeshTopology

ROLES = ("tree", "loop", "edge", "potential", "charge")


@dataclass(frozen=True, eq=False)
class FieldCoeffs:
    """Coefficient vector tagged with the basis it expands in."""

    role: str
    values: np.ndarray

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"unknown coefficient role {self.role!r}")
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))

    def __len__(self):
        return len(self.values)

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


@dataclass(frozen=True, eq=False)
class EdgeBasisSet:
    """One divergence-conforming basis function per interior edge.

    On its plus patch the function is ``(l / 2A+) (r - free_plus)``, on the
    minus patch ``-(l / 2A-) (r - free_minus)``.  Its normal component on the
    shared edge is one, pointing from plus to minus.
    """

    topology: MeshTopology
    edge_ids: np.ndarray
    plus: np.ndarray
    minus: np.ndarray
    length: np.ndarray
    free_plus: np.ndarray
    free_minus: np.ndarray
    div_plus: np.ndarray
    div_minus: np.ndarray
    index_of_edge: np.ndarray  # topology edge id -> basis index, -1 on the boundary

    def __len__(self):
        return len(self.edge_ids)

    def divergence_matrix(self) -> sparse.csr_matrix:
        """Patch-integrated divergence: ``(n_patches, N)`` with ``+l`` / ``-l``."""
        n = len(self)
        rows = np.concatenate([self.plus, self.minus])
        cols = np.concatenate([np.arange(n), np.arange(n)])
        vals = np.concatenate([self.length, -self.length])
        return sparse.csr_matrix((vals, (rows, cols)), shape=(self.topology.n_patches, n))


def _free_vertex(topology: MeshTopology, patches, edge_ids):
    tri_edges = topology.triangle_edges[patches]
    local = np.argmax(tri_edges == edge_ids[:, None], axis=1)
    return topology.mesh.triangles[patches, local]


def build_edge_basis(topology: MeshTopology) -> EdgeBasisSet:
    ids = topology.interior_edges
    plus = topology.edge_patches[ids, 0]
    minus = topology.edge_patches[ids, 1]
    length = topology.lengths[ids]
    index_of_edge = np.full(topology.n_edges, -1, dtype=np.int64)
    index_of_edge[ids] = np.arange(len(ids))
    return EdgeBasisSet(
        topology, ids, plus, minus, length,
        _free_vertex(topology, plus, ids), _free_vertex(topology, minus, ids),
        length / topology.areas[plus], -length / topology.areas[minus],
        index_of_edge,
    )


@dataclass(frozen=True, eq=False)
class DualTree:
    """Breadth-first spanning tree of the patch adjacency graph.

    ``order`` lists patches root first, each after its parent; reversing it
    gives a children-before-parent sequence.  ``parent_edge[p]`` is the basis
    index of the edge joining ``p`` to its parent (-1 at the root),
    ``parent_column[p]`` its position in ``tree_edges`` and
    ``parent_length[p]`` its length, negated when ``p`` is the minus patch.
    """

    root: int
    parent: np.ndarray
    parent_edge: np.ndarray
    order: np.ndarray
    depth: np.ndarray
    tree_edges: np.ndarray
    cotree_edges: np.ndarray
    parent_column: np.ndarray
    parent_length: np.ndarray

    @property
    def postorder(self) -> np.ndarray:
        return self.order[::-1]

    @property
    def n_tree(self) -> int:
        return len(self.tree_edges)

    def children(self, patch: int) -> np.ndarray:
        return np.flatnonzero(self.parent == patch)


def build_dual_tree(topology: MeshTopology, basis: EdgeBasisSet, root: int = 0) -> DualTree:
    n = topology.n_patches
    if not 0 <= root < n:
        raise ValueError(f"root patch {root} out of range [0, {n})")
    indptr = topology.dual.indptr.tolist()
    nbrs = topology.dual.indices.tolist()
    edge_of = (topology.dual.data - 1).tolist()
    to_basis = basis.index_of_edge.tolist()

    parent = [-1] * n
    parent_edge = [-1] * n
    depth = [0] * n
    seen = [False] * n
    seen[root] = True
    order = [root]
    queue = deque([root])
    while queue:
        p = queue.popleft()
        for k in range(indptr[p], indptr[p + 1]):
            q = nbrs[k]
            if not seen[q]:
                seen[q] = True
                parent[q] = p
                parent_edge[q] = to_basis[edge_of[k]]
                depth[q] = depth[p] + 1
                order.append(q)
                queue.append(q)
    if len(order) != n:
        raise MeshError("dual graph is disconnected")

    parent_edge = np.array(parent_edge, dtype=np.int64)
    in_tree = np.zeros(len(basis), dtype=bool)
    in_tree[parent_edge[parent_edge >= 0]] = True
    tree_edges = np.flatnonzero(in_tree)

    has = parent_edge >= 0
    pe = parent_edge[has]
    column = np.full(n, -1, dtype=np.int64)
    column[has] = np.searchsorted(tree_edges, pe)
    slen = np.zeros(n)
    slen[has] = np.where(basis.plus[pe] == np.flatnonzero(has), 1.0, -1.0) * basis.length[pe]
    return DualTree(root, np.array(parent, dtype=np.int64), parent_edge,
                    np.array(order, dtype=np.int64), np.array(depth, dtype=np.int64),
                    tree_edges, np.flatnonzero(~in_tree), column, slen)


@dataclass(frozen=True, eq=False)
class LoopSet:
    """Divergence-free loop functions, one per interior vertex.

    Loop ``i`` is the rotated gradient of the hat function of
    ``vertices[i]``; ``coefficients[:, i]`` expands it in the edge basis.
    """

    vertices: np.ndarray
    coefficients: sparse.csc_matrix

    def __len__(self):
        return len(self.vertices)

    def loop(self, i: int):
        """List of ``(basis index, coefficient)`` pairs of loop ``i``."""
        col = self.coefficients[:, [i]].tocoo()
        return sorted(zip(col.row.tolist(), col.data.tolist()))


def build_loop_set(topology: MeshTopology, basis: EdgeBasisSet) -> LoopSet:
    """Loop basis from the rotated hat-function gradients.

    The field ``z x grad(hat_v)`` is constant on each triangle around ``v``
    with normal component ``±1/l`` on the edges through ``v`` and zero on the
    opposite edges, so its edge coefficients are exactly ``±1/l``.
    """
    verts = topology.mesh.vertices
    col_of = np.full(topology.mesh.n_vertices, -1, dtype=np.int64)
    col_of[topology.interior_vertices] = np.arange(len(topology.interior_vertices))

    ids = basis.edge_ids
    ends = topology.edges[ids]
    rows, cols, vals = [], [], []
    for side in (0, 1):
        v = ends[:, side]
        keep = col_of[v] >= 0
        e = np.flatnonzero(keep)
        v = v[keep]
        w = ends[keep, 1 - side]
        c = basis.free_plus[keep]
        p = basis.plus[keep]
        # gradient of hat(v) on the plus patch, rotated by +90 degrees
        a = verts[w] - verts[c]
        two_area = 2.0 * topology.areas[p]
        orient = np.sign((verts[w, 0] - verts[v, 0]) * (verts[c, 1] - verts[v, 1])
                         - (verts[w, 1] - verts[v, 1]) * (verts[c, 0] - verts[v, 0]))
        grad = orient[:, None] * np.column_stack([a[:, 1], -a[:, 0]]) / two_area[:, None]
        rot = np.column_stack([-grad[:, 1], grad[:, 0]])
        # unit normal of the edge pointing out of the plus patch
        t = verts[w] - verts[v]
        n = np.column_stack([t[:, 1], -t[:, 0]])
        n *= np.sign(np.einsum("ij,ij->i", n, verts[v] - verts[c]))[:, None]
        rows.append(e)
        cols.append(col_of[v])
        vals.append(np.sign(np.einsum("ij,ij->i", rot, n)) / basis.length[keep])
    coeffs = sparse.csc_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(len(basis), len(topology.interior_vertices)))
    coeffs.sort_indices()
    return LoopSet(topology.interior_vertices, coeffs)
