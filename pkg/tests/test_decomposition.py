import numpy as np
import pytest

from treepoisson.decomposition import (FieldCoeffs, build_dual_tree, build_edge_basis,
                                       build_loop_set)
from treepoisson.mesh import TriMesh, build_topology, generate_structured_square

from oracles import loop_field


def _build(mesh, root=0):
    topo = build_topology(mesh)
    basis = build_edge_basis(topo)
    return topo, basis, build_dual_tree(topo, basis, root), build_loop_set(topo, basis)


def test_two_triangle_edge_basis(unit_square):
    topo, basis, tree, loops = _build(unit_square)
    assert len(basis) == 1
    assert np.isclose(basis.length[0], np.sqrt(2))
    assert np.isclose(basis.div_plus[0], 2 * np.sqrt(2))
    assert np.isclose(basis.div_minus[0], -2 * np.sqrt(2))
    assert (basis.plus[0], basis.minus[0]) == (0, 1)
    assert unit_square.vertices[basis.free_plus[0]].tolist() == [1.0, 0.0]
    assert unit_square.vertices[basis.free_minus[0]].tolist() == [0.0, 1.0]
    # divergence integrates to +-l over each patch
    assert np.isclose(basis.div_plus[0] * topo.areas[0], basis.length[0])
    assert tree.parent.tolist() == [-1, 0] and tree.n_tree == 1
    assert len(loops) == 0


def test_single_triangle_has_empty_basis():
    topo, basis, tree, loops = _build(TriMesh([[0, 0], [1, 0], [0, 1]], [[0, 1, 2]]))
    assert len(basis) == 0 and tree.n_tree == 0 and len(loops) == 0


def test_n2_square_tree_and_loop():
    topo, basis, tree, loops = _build(generate_structured_square(2))
    assert len(basis) == 8
    assert tree.n_tree == 7 and len(tree.cotree_edges) == 1
    assert loops.vertices.tolist() == [4]
    touched = sorted(topo.edges[basis.edge_ids[e]].tolist() for e, _ in loops.loop(0))
    through_center = sorted(e.tolist() for e in topo.edges[basis.edge_ids] if 4 in e)
    assert len(touched) == 6 and touched == through_center


def test_loop_coefficients_match_rotated_gradient(jittered_square):
    topo, basis, tree, loops = _build(jittered_square)
    verts = jittered_square.vertices
    for i in (0, len(loops) // 2, len(loops) - 1):
        field = loop_field(jittered_square, loops.vertices[i])
        for e, c in loops.loop(i):
            a, b = topo.edges[basis.edge_ids[e]]
            t = verts[b] - verts[a]
            n = np.array([t[1], -t[0]]) / np.hypot(*t)
            # orient out of the plus patch
            if n @ (verts[a] - verts[basis.free_plus[e]]) < 0:
                n = -n
            assert np.isclose(c, field[basis.plus[e]] @ n, rtol=1e-12)
            assert np.isclose(c, field[basis.minus[e]] @ n, rtol=1e-12)


@pytest.mark.parametrize("mesh_name", ["n8", "jittered", "dipole"])
def test_loops_are_patchwise_divergence_free(mesh_name, jittered_square, dipole_mesh):
    mesh = {"n8": generate_structured_square(8), "jittered": jittered_square,
            "dipole": dipole_mesh}[mesh_name]
    topo, basis, tree, loops = _build(mesh)
    div = basis.divergence_matrix() @ loops.coefficients
    assert abs(div).max() <= 1e-12


@pytest.mark.parametrize("root", [0, 5, 17, 31])
def test_tree_structure(root):
    topo, basis, tree, loops = _build(generate_structured_square(4), root)
    n_p = topo.n_patches
    assert tree.root == root and tree.parent[root] == -1
    assert tree.n_tree == n_p - 1
    assert len(basis) == tree.n_tree + len(loops)
    assert sorted(tree.order.tolist()) == list(range(n_p))
    pos = np.empty(n_p, dtype=int)
    pos[tree.order] = np.arange(n_p)
    for p in range(n_p):
        if p != root:
            assert pos[tree.parent[p]] < pos[p]
            e = tree.parent_edge[p]
            assert {basis.plus[e], basis.minus[e]} == {p, tree.parent[p]}
            assert tree.depth[p] == tree.depth[tree.parent[p]] + 1
    assert len(set(tree.tree_edges) | set(tree.cotree_edges)) == len(basis)


def test_bfs_tie_break_is_ascending():
    topo, basis, tree, _ = _build(generate_structured_square(2))
    assert tree.order[:4].tolist() == [0] + sorted(topo.neighbors(0).tolist()) + [tree.order[3]]
    assert tree.order[1:3].tolist() == sorted(topo.neighbors(0).tolist())


def test_field_coeffs_roles():
    c = FieldCoeffs("tree", [1, 2])
    assert len(c) == 2 and np.asarray(c).dtype == float
    with pytest.raises(ValueError):
        FieldCoeffs("bogus", [])
