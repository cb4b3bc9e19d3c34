"""Discrete operators and right-hand sides of the two solution stages."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import sparse

from .decomposition import DualTree, EdgeBasisSet, LoopSet
from .mesh import LocationError, MeshTopology

# Symmetric triangle rules as (barycentric coordinates, weights); weights sum to one.
_S15 = math.sqrt(15.0)
_a, _b = (6.0 - _S15) / 21.0, (6.0 + _S15) / 21.0
TRIANGLE_RULES = {
    3: (np.array([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]]),
        np.full(3, 1 / 3)),
    7: (np.array([[1 / 3, 1 / 3, 1 / 3],
                  [1 - 2 * _a, _a, _a], [_a, 1 - 2 * _a, _a], [_a, _a, 1 - 2 * _a],
                  [1 - 2 * _b, _b, _b], [_b, 1 - 2 * _b, _b], [_b, _b, 1 - 2 * _b]]),
        np.array([9 / 40] + [(155 - _S15) / 1200] * 3 + [(155 + _S15) / 1200] * 3)),
}

# 3-point Gauss-Legendre on [0, 1]
_GL_X = 0.5 + 0.5 * np.array([-math.sqrt(0.6), 0.0, math.sqrt(0.6)])
_GL_W = np.array([5 / 18, 8 / 18, 5 / 18])


@dataclass
class ProblemSpec:
    """A Neumann problem ``lap(phi) = -rho / eps`` with ``dphi/dn = g``.

    Parameters
    ----------
    epsilon_r : float
        Constant relative permittivity.
    epsilon_0 : float
        Vacuum permittivity.  Defaults to 1 (normalized units).
    density : callable, optional
        Charge density ``rho(x, y)``, vectorized over arrays.
    point_charges : sequence of (x, y, q)
        Line charges per unit length.
    neumann : callable, optional
        Normal derivative ``g(x, y)`` on the boundary; ``None`` means zero.
    reference, reference_value
        The potential is shifted so that it equals ``reference_value`` in the
        patch containing ``reference``.
    """

    epsilon_r: float = 1.0
    epsilon_0: float = 1.0
    density: Optional[Callable] = None
    point_charges: Sequence[tuple] = field(default_factory=list)
    neumann: Optional[Callable] = None
    reference: tuple = (0.0, 0.0)
    reference_value: float = 0.0

    def __post_init__(self):
        if not self.epsilon_r > 0 or not self.epsilon_0 > 0:
            raise ValueError("permittivities must be positive")
        self.point_charges = [tuple(float(c) for c in pc) for pc in self.point_charges]

    @property
    def epsilon(self) -> float:
        return self.epsilon_r * self.epsilon_0


def _integrate_patches(topology: MeshTopology, fn: Callable, rule: int = 3) -> np.ndarray:
    bary, w = TRIANGLE_RULES[rule]
    corners = topology.mesh.vertices[topology.mesh.triangles]
    pts = np.einsum("qk,tkd->tqd", bary, corners)
    vals = np.asarray(fn(pts[..., 0], pts[..., 1]), dtype=float)
    return topology.areas * (np.broadcast_to(vals, pts.shape[:2]) @ w)


def edge_gram(topology: MeshTopology, rule: int = 3) -> sparse.csr_matrix:
    """Gram matrix of all edge functions, indexed by topology edge id.

    Boundary edges carry a half function living on their single patch with
    unit outward normal component; interior edges carry the full basis
    function.  Entries are integrated with the given triangle rule.
    """
    bary, w = TRIANGLE_RULES[rule]
    mesh = topology.mesh
    corners = mesh.vertices[mesh.triangles]                       # (T, 3, 2)
    areas = topology.areas
    te = topology.triangle_edges                                   # (T, 3)
    sign = np.where(topology.edge_patches[te, 0] == np.arange(len(te))[:, None], 1.0, -1.0)
    scale = sign * topology.lengths[te] / (2.0 * areas[:, None])
    pts = np.einsum("qk,tkd->tqd", bary, corners)                  # (T, Q, 2)
    # phi[t, k, q] = scale[t, k] * (pts[t, q] - corners[t, k])
    phi = scale[:, :, None, None] * (pts[:, None, :, :] - corners[:, :, None, :])
    local = areas[:, None, None] * np.einsum("tiqd,tjqd,q->tij", phi, phi, w)
    rows = np.repeat(te, 3, axis=1).ravel()
    cols = np.tile(te, (1, 3)).ravel()
    gram = sparse.csr_matrix((local.ravel(), (rows, cols)), shape=(topology.n_edges,) * 2)
    gram.sum_duplicates()
    return gram


def assemble_K(tree: DualTree, basis: EdgeBasisSet) -> sparse.csr_matrix:
    """Pulse-tested divergence of the tree functions, ``(n_patches, N_t)``."""
    e = tree.tree_edges
    n_t = len(e)
    cols = np.arange(n_t)
    return sparse.csr_matrix(
        (np.concatenate([basis.length[e], -basis.length[e]]),
         (np.concatenate([basis.plus[e], basis.minus[e]]), np.concatenate([cols, cols]))),
        shape=(basis.topology.n_patches, n_t))


def boundary_flux(spec: ProblemSpec, topology: MeshTopology) -> np.ndarray:
    """Outward normal component of D on each boundary edge, ``-eps * mean(g)``.

    Returned over all topology edges; interior entries are zero.
    """
    out = np.zeros(topology.n_edges)
    if spec.neumann is None or len(topology.boundary_edges) == 0:
        return out
    b = topology.boundary_edges
    p0 = topology.mesh.vertices[topology.edges[b, 0]]
    p1 = topology.mesh.vertices[topology.edges[b, 1]]
    pts = p0[:, None, :] + _GL_X[None, :, None] * (p1 - p0)[:, None, :]
    g = np.broadcast_to(np.asarray(spec.neumann(pts[..., 0], pts[..., 1]), dtype=float), pts.shape[:2])
    out[b] = -spec.epsilon * (g @ _GL_W)
    return out


def assemble_charge_rhs(spec: ProblemSpec, topology: MeshTopology):
    """Patch charges minus prescribed boundary outflux.

    Returns
    -------
    v : ndarray, shape (n_patches,)
    residual : float
        ``sum(v)``; zero for a compatible Neumann problem.
    """
    v = np.zeros(topology.n_patches)
    if spec.density is not None:
        v += _integrate_patches(topology, spec.density)
    if spec.point_charges:
        pts = np.array([pc[:2] for pc in spec.point_charges])
        try:
            where = topology.mesh.locate(pts)
        except LocationError as exc:
            raise LocationError(f"point charge outside the mesh: {exc}") from None
        np.add.at(v, where, [pc[2] for pc in spec.point_charges])
    if spec.neumann is not None:
        b = topology.boundary_edges
        outflux = boundary_flux(spec, topology)[b] * topology.lengths[b]
        np.add.at(v, topology.edge_patches[b, 0], -outflux)
    return v, math.fsum(v)


def _loop_rows(loops: LoopSet, basis: EdgeBasisSet) -> sparse.csr_matrix:
    """Loop coefficients as ``(N_l, n_edges)`` over topology edge ids."""
    c = loops.coefficients.T.tocoo()
    return sparse.csr_matrix((c.data, (c.row, basis.edge_ids[c.col])),
                             shape=(len(loops), basis.topology.n_edges))


def assemble_loop_gram(loops: LoopSet, basis: EdgeBasisSet, gram=None) -> sparse.csr_matrix:
    """``G[i, j] = integral of L_i . L_j``; exactly symmetric."""
    if len(loops) == 0:
        return sparse.csr_matrix((0, 0))
    if gram is None:
        gram = edge_gram(basis.topology)
    c = _loop_rows(loops, basis)
    g = (c @ gram @ c.T).tocsr()
    g = ((g + g.T) * 0.5).tocsr()
    g.sort_indices()
    return g


def full_edge_field(basis: EdgeBasisSet, d, boundary=None) -> np.ndarray:
    """Edge coefficients over all topology edges (interior ``d`` plus boundary flux)."""
    out = np.zeros(basis.topology.n_edges) if boundary is None else np.array(boundary, dtype=float)
    out[basis.edge_ids] = np.asarray(d, dtype=float)
    return out


def scatter_tree(tree: DualTree, basis: EdgeBasisSet, t) -> np.ndarray:
    d = np.zeros(len(basis))
    d[tree.tree_edges] = np.asarray(t, dtype=float)
    return d


def assemble_loop_projection_rhs(loops: LoopSet, tree: DualTree, t, basis: EdgeBasisSet,
                                 gram=None, boundary=None) -> np.ndarray:
    """``V_d[i] = integral of L_i . D_tree`` for tree coefficients ``t``."""
    if len(t) != tree.n_tree:
        raise ValueError(f"expected {tree.n_tree} tree coefficients, got {len(t)}")
    if gram is None:
        gram = edge_gram(basis.topology)
    dfull = full_edge_field(basis, scatter_tree(tree, basis, t), boundary)
    return _loop_rows(loops, basis) @ (gram @ dfull)


def assemble_potential_rhs(basis: EdgeBasisSet, tree: DualTree, d, spec: ProblemSpec,
                           gram=None, boundary=None) -> np.ndarray:
    """``V_phi[i] = integral of T_i . D / eps`` over the tree functions.

    With ``K`` the pulse-tested divergence, testing ``grad(phi) = -D/eps``
    against ``T_i`` and integrating by parts yields ``K^T nu = V_phi`` with
    this (positive) sign.
    """
    if len(d) != len(basis):
        raise ValueError(f"expected {len(basis)} edge coefficients, got {len(d)}")
    if gram is None:
        gram = edge_gram(basis.topology)
    dfull = full_edge_field(basis, d, boundary)
    rows = gram[basis.edge_ids[tree.tree_edges]]
    return (rows @ dfull) / spec.epsilon
