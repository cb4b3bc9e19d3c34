"""Independent reference solutions used to validate the tree solver."""

from __future__ import annotations

import math

import numpy as np
from scipy import sparse

from .assembly import _GL_W, _GL_X, TRIANGLE_RULES, ProblemSpec
from .krylov import IterSettings, cg_solve
from .mesh import TriMesh, build_topology, generate_structured_square

DENSE_LIMIT = 5000


def analytic_case():
    """The unit-square benchmark with ``phi = (cos(pi x) + cos(pi y)) / pi``.

    Returns the problem (zero Neumann data, potential ``2/pi`` at the origin)
    and the exact solution as a vectorized callable.
    """
    def density(x, y):
        return np.pi * (np.cos(np.pi * x) + np.cos(np.pi * y))

    def exact(x, y):
        return (np.cos(np.pi * np.asarray(x)) + np.cos(np.pi * np.asarray(y))) / np.pi

    spec = ProblemSpec(epsilon_r=1.0, epsilon_0=1.0, density=density,
                       reference=(0.0, 0.0), reference_value=2.0 / np.pi)
    return spec, exact


def p1_gradients(mesh: TriMesh):
    """Constant hat-function gradients per triangle, shape (T, 3, 2), and areas."""
    p = mesh.vertices[mesh.triangles]
    area = 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                  - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))
    opp = np.roll(p, -1, axis=1) - np.roll(p, -2, axis=1)        # edge opposite each vertex
    grads = np.stack([opp[..., 1], -opp[..., 0]], axis=-1) / (2.0 * area[:, None, None])
    return grads, area


def p1_stiffness(mesh: TriMesh) -> sparse.csr_matrix:
    grads, area = p1_gradients(mesh)
    local = area[:, None, None] * np.einsum("tid,tjd->tij", grads, grads)
    t = mesh.triangles
    rows = np.repeat(t, 3, axis=1).ravel()
    cols = np.tile(t, (1, 3)).ravel()
    a = sparse.csr_matrix((local.ravel(), (rows, cols)), shape=(mesh.n_vertices,) * 2)
    a.sum_duplicates()
    return a


def p1_load(mesh: TriMesh, spec: ProblemSpec, point_charges: str = "delta") -> np.ndarray:
    """Right-hand side ``int (rho/eps) hat_i + int_boundary g hat_i``.

    ``point_charges="delta"`` loads line charges as point sources;
    ``"patch"`` spreads each uniformly over its containing triangle, which is
    how the pulse discretization represents them.
    """
    if point_charges not in ("delta", "patch"):
        raise ValueError(f"unknown point charge mode {point_charges!r}")
    b = np.zeros(mesh.n_vertices)
    t = mesh.triangles
    if spec.density is not None:
        bary, w = TRIANGLE_RULES[3]
        corners = mesh.vertices[t]
        pts = np.einsum("qk,tkd->tqd", bary, corners)
        f = np.broadcast_to(np.asarray(spec.density(pts[..., 0], pts[..., 1]), float), pts.shape[:2])
        area = mesh.areas
        contrib = area[:, None] * np.einsum("tq,qk,q->tk", f, bary, w) / spec.epsilon
        np.add.at(b, t.ravel(), contrib.ravel())
    for x, y, q in spec.point_charges:
        k = int(mesh.locate([(x, y)])[0])
        p = mesh.vertices[t[k]]
        if point_charges == "patch":
            lam = np.full(3, 1.0 / 3.0)
        else:
            lam = np.linalg.solve(np.vstack([p.T, np.ones(3)]), [x, y, 1.0])
        np.add.at(b, t[k], q * lam / spec.epsilon)
    if spec.neumann is not None:
        topo = build_topology(mesh)
        e = topo.edges[topo.boundary_edges]
        p0, p1 = mesh.vertices[e[:, 0]], mesh.vertices[e[:, 1]]
        pts = p0[:, None, :] + _GL_X[None, :, None] * (p1 - p0)[:, None, :]
        g = np.broadcast_to(np.asarray(spec.neumann(pts[..., 0], pts[..., 1]), float), pts.shape[:2])
        length = topo.lengths[topo.boundary_edges]
        np.add.at(b, e[:, 0], length * (g @ (_GL_W * (1 - _GL_X))))
        np.add.at(b, e[:, 1], length * (g @ (_GL_W * _GL_X)))
    return b


def interpolate_p1(mesh: TriMesh, values, points) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    tri = mesh.locate(pts)
    out = np.empty(len(pts))
    for i, (k, pt) in enumerate(zip(tri, pts)):
        p = mesh.vertices[mesh.triangles[k]]
        lam = np.linalg.solve(np.vstack([p.T, np.ones(3)]), [pt[0], pt[1], 1.0])
        out[i] = lam @ values[mesh.triangles[k]]
    return out


def _shift_to_reference(mesh, phi, spec):
    return phi + (spec.reference_value - interpolate_p1(mesh, phi, [spec.reference])[0])


def fem_reference_solve(mesh: TriMesh, spec: ProblemSpec, point_charges: str = "delta") -> np.ndarray:
    """Nodal P1 potentials by dense factorization with vertex 0 pinned.

    See :func:`p1_load` for ``point_charges``.
    """
    n = mesh.n_vertices
    if n > DENSE_LIMIT:
        raise ValueError(f"dense oracle limited to {DENSE_LIMIT} vertices, mesh has {n}")
    a = p1_stiffness(mesh).toarray()
    b = p1_load(mesh, spec, point_charges)
    phi = np.zeros(n)
    phi[1:] = dense_solve(a[1:, 1:], b[1:])
    return _shift_to_reference(mesh, phi, spec)


def fem_cg_solve(mesh: TriMesh, spec: ProblemSpec, settings=None):
    """Sparse P1 solve with CG, the conventional baseline for timing.

    Returns nodal potentials and the CG stats.
    """
    settings = settings or IterSettings()
    a = p1_stiffness(mesh)[1:, 1:].tocsr()
    b = p1_load(mesh, spec)
    phi = np.zeros(mesh.n_vertices)
    phi[1:], stats = cg_solve(a, b[1:], settings)
    return _shift_to_reference(mesh, phi, spec), stats


def patch_average(mesh: TriMesh, nodal) -> np.ndarray:
    """Mean of a P1 field over each triangle."""
    return np.asarray(nodal)[mesh.triangles].mean(axis=1)


def dense_solve(A, b) -> np.ndarray:
    """Direct solve; minimum-norm least squares for rectangular ``A``.

    Raises ``numpy.linalg.LinAlgError`` when ``A`` has less than full rank in
    its smaller dimension.
    """
    A = np.asarray(A.toarray() if sparse.issparse(A) else A, dtype=float)
    b = np.asarray(b, dtype=float)
    m, n = A.shape
    if m == n:
        return np.linalg.solve(A, b)
    x, _, rank, _ = np.linalg.lstsq(A, b, rcond=None)
    if rank < min(m, n):
        raise np.linalg.LinAlgError(f"rank {rank} below {min(m, n)}")
    return x


def analytic_mesh_error(nu, mesh: TriMesh, exact) -> tuple:
    """Max and area-weighted L2 error of patch values against centroid values."""
    c = mesh.centroids
    err = np.asarray(nu) - exact(c[:, 0], c[:, 1])
    return float(np.abs(err).max()), float(math.sqrt(np.sum(mesh.areas * err ** 2)))


def square_case(n: int):
    spec, exact = analytic_case()
    return generate_structured_square(n), spec, exact
