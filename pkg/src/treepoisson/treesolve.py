"""Direct O(N) solves of ``K t = v`` and ``K^T nu = w`` on the dual tree.

Both solves walk the tree once.  Plain Python lists are used for the walk:
each step touches a single patch and numpy scalar indexing would dominate.
"""

from __future__ import annotations

import math

import numpy as np

from .decomposition import DualTree, EdgeBasisSet, FieldCoeffs


class IncompatibleProblemError(ValueError):
    """Total charge does not balance the prescribed boundary flux."""

    def __init__(self, total: float, scale: float):
        self.total = total
        super().__init__(
            f"incompatible Neumann problem: net source {total:.6g} "
            f"(relative {total / scale if scale else float('inf'):.3g}) does not vanish")


def solve_divergence(tree: DualTree, basis: EdgeBasisSet, v, tol: float = 1e-8):
    """Solve ``K t = v`` by accumulating subtree sums from the leaves.

    For the tree edge joining patch ``c`` to its parent,
    ``s * l * t = sum of v over the subtree of c`` where ``s = +1`` if ``c``
    is the plus patch of the edge.

    Returns
    -------
    t : FieldCoeffs
        Tree coefficients, ordered as ``tree.tree_edges``.
    residual : float
        ``|sum(v)|``, the unmatched equation at the root.

    Raises
    ------
    IncompatibleProblemError
        If ``|sum(v)| > tol * ||v||_1``.
    """
    v = np.asarray(v, dtype=float)
    if len(v) != len(tree.parent):
        raise ValueError(f"expected {len(tree.parent)} patch values, got {len(v)}")
    total = math.fsum(v)
    scale = float(np.abs(v).sum())
    if abs(total) > tol * scale:
        raise IncompatibleProblemError(total, scale)

    col, slen = tree.parent_column, tree.parent_length
    acc = v.tolist()
    parent = tree.parent.tolist()
    for p in tree.order[:0:-1].tolist():
        acc[parent[p]] += acc[p]
    acc = np.asarray(acc)
    t = np.empty(tree.n_tree)
    nonroot = tree.parent >= 0
    t[col[nonroot]] = acc[nonroot] / slen[nonroot]
    return FieldCoeffs("tree", t), abs(total)


def solve_gradient(tree: DualTree, basis: EdgeBasisSet, v_phi, ref_patch: int,
                   ref_value: float = 0.0) -> FieldCoeffs:
    """Solve ``K^T nu = v_phi`` by propagating from the root outwards.

    Across tree edge ``e`` with plus patch ``p`` and minus patch ``m`` the
    equation reads ``l_e (nu_p - nu_m) = v_phi[e]``.  The constant null
    space is fixed afterwards by shifting ``nu[ref_patch]`` to ``ref_value``.
    """
    v_phi = np.asarray(v_phi, dtype=float)
    n = len(tree.parent)
    if len(v_phi) != tree.n_tree:
        raise ValueError(f"expected {tree.n_tree} tree values, got {len(v_phi)}")
    if not 0 <= int(ref_patch) < n:
        raise ValueError(f"reference patch {ref_patch} out of range [0, {n})")

    col, slen = tree.parent_column, tree.parent_length
    # step from parent to child: nu_child = nu_parent + v / (s * l)
    step = np.zeros(n)
    nonroot = tree.parent >= 0
    step[nonroot] = v_phi[col[nonroot]] / slen[nonroot]
    step = step.tolist()
    nu = [0.0] * n
    parent = tree.parent.tolist()
    for p in tree.order[1:].tolist():
        nu[p] = nu[parent[p]] + step[p]
    nu = np.asarray(nu)
    nu += ref_value - nu[int(ref_patch)]
    nu[int(ref_patch)] = ref_value  # exact despite rounding in the shift
    return FieldCoeffs("potential", nu)
