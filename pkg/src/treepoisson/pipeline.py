"""Two-stage Neumann solve: tree solve, loop removal, transposed tree solve."""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .assembly import (ProblemSpec, _loop_rows, assemble_charge_rhs, assemble_loop_gram,
                       assemble_loop_projection_rhs, assemble_potential_rhs, boundary_flux,
                       edge_gram, full_edge_field, scatter_tree)
from .decomposition import (DualTree, EdgeBasisSet, FieldCoeffs, LoopSet, build_dual_tree,
                            build_edge_basis, build_loop_set)
from .krylov import IterSettings, SolverStats, cg_solve, gmres_solve
from .mesh import MeshError, MeshTopology, TriMesh, build_topology
from .treesolve import solve_divergence, solve_gradient

SOLVERS = {"cg": cg_solve, "gmres": gmres_solve}


@dataclass(frozen=True, eq=False)
class Discretization:
    """Everything geometric a solve needs, reusable across problems."""

    mesh: TriMesh
    topology: MeshTopology
    basis: EdgeBasisSet
    tree: DualTree
    loops: LoopSet
    gram: object  # edge Gram matrix over topology edges


def discretize(mesh: TriMesh, root: int = 0) -> Discretization:
    topology = build_topology(mesh)
    if not topology.is_simply_connected:
        raise MeshError(
            "mesh is not simply connected: "
            f"{len(topology.interior_edges)} interior edges != "
            f"{topology.n_patches - 1} tree edges + {len(topology.interior_vertices)} loops")
    basis = build_edge_basis(topology)
    tree = build_dual_tree(topology, basis, root)
    loops = build_loop_set(topology, basis)
    return Discretization(mesh, topology, basis, tree, loops, edge_gram(topology))


@dataclass
class SolveReport:
    n_edges: int
    n_tree: int
    n_loops: int
    n_patches: int
    solver: str
    tol: float
    restart: int
    compatibility_residual: float
    divergence_residual: float
    projection_iterations: int
    projection_residual: float
    loop_projection_max: float
    displacement_norm: float
    gradient_residual: float
    time_stage1: float
    time_removal: float
    time_stage2: float
    time_tree1: float
    time_tree2: float

    @property
    def time_total(self) -> float:
        return self.time_stage1 + self.time_removal + self.time_stage2

    def to_dict(self) -> dict:
        out = asdict(self)
        out["time_total"] = self.time_total
        return out


@dataclass(eq=False)
class Solution:
    """Products of :func:`solve_poisson`.

    ``potential`` holds one value per patch; ``displacement`` the interior
    edge coefficients of D; ``boundary`` the prescribed normal D on boundary
    edges (indexed by topology edge id, zero on interior edges).
    """

    potential: FieldCoeffs
    displacement: FieldCoeffs
    report: SolveReport
    discretization: Discretization
    boundary: np.ndarray
    charge: np.ndarray
    tree_coeffs: FieldCoeffs
    loop_coeffs: FieldCoeffs
    v_phi: np.ndarray
    ref_patch: int

    def edge_field(self) -> np.ndarray:
        """D coefficients over all topology edges."""
        return full_edge_field(self.discretization.basis, self.displacement.values, self.boundary)


def remove_divergence_free(t, tree: DualTree, loops: LoopSet, loop_gram, basis: EdgeBasisSet,
                           settings: Optional[IterSettings] = None, solver: str = "cg",
                           gram=None, boundary=None):
    """Subtract the loop-space projection from the tree field.

    Solves ``G_l l = V_d`` iteratively and returns ``d = t - C l`` as edge
    coefficients, together with the loop coefficients and solver stats.
    """
    settings = settings or IterSettings()
    d = scatter_tree(tree, basis, t)
    if len(loops) == 0:
        return FieldCoeffs("edge", d), FieldCoeffs("loop", np.zeros(0)), SolverStats(solver, 0, 0.0, [])
    if gram is None:
        gram = edge_gram(basis.topology)
    v_d = assemble_loop_projection_rhs(loops, tree, t, basis, gram, boundary)
    try:
        solve = SOLVERS[solver]
    except KeyError:
        raise ValueError(f"unknown solver {solver!r}; choose from {sorted(SOLVERS)}") from None
    l, stats = solve(loop_gram, v_d, settings)
    d -= loops.coefficients @ l
    return FieldCoeffs("edge", d), FieldCoeffs("loop", l), stats


def solve_poisson(mesh: TriMesh, spec: ProblemSpec, settings: Optional[IterSettings] = None,
                  solver: str = "cg", root: int = 0, compat_tol: float = 1e-8,
                  discretization: Optional[Discretization] = None) -> Solution:
    """Solve the Neumann problem ``spec`` on ``mesh``.

    Parameters
    ----------
    settings : IterSettings, optional
        Stopping rule of the loop projection solve.
    solver : {"cg", "gmres"}
    root : int
        Root patch of the dual spanning tree.
    compat_tol : float
        Allowed ``|sum V_rho| / ||V_rho||_1`` before the problem is rejected
        as incompatible.
    discretization : Discretization, optional
        Prebuilt geometry for ``mesh``; built here when omitted.
    """
    settings = settings or IterSettings()
    if solver not in SOLVERS:
        raise ValueError(f"unknown solver {solver!r}; choose from {sorted(SOLVERS)}")
    disc = discretization or discretize(mesh, root)
    topo, basis, tree, loops, gram = disc.topology, disc.basis, disc.tree, disc.loops, disc.gram
    ref_patch = int(mesh.locate([spec.reference])[0])

    clock = time.perf_counter
    t0 = clock()
    v_rho, compat = assemble_charge_rhs(spec, topo)
    bflux = boundary_flux(spec, topo)
    t1 = clock()
    t, _ = solve_divergence(tree, basis, v_rho, tol=compat_tol)
    t2 = clock()

    loop_gram = assemble_loop_gram(loops, basis, gram)
    d, l, stats = remove_divergence_free(t, tree, loops, loop_gram, basis, settings, solver,
                                         gram, bflux)
    t3 = clock()

    v_phi = assemble_potential_rhs(basis, tree, d.values, spec, gram, bflux)
    t4 = clock()
    nu = solve_gradient(tree, basis, v_phi, ref_patch, spec.reference_value)
    t5 = clock()

    # audits, outside the timed region
    div = basis.divergence_matrix() @ d.values
    scale = max(np.abs(v_rho).max(), 1e-300)
    full = full_edge_field(basis, d.values, bflux)
    gd = gram @ full
    proj = _loop_rows(loops, basis) @ gd if len(loops) else np.zeros(0)
    k_nu = nu.values[basis.plus[tree.tree_edges]] - nu.values[basis.minus[tree.tree_edges]]
    k_nu *= basis.length[tree.tree_edges]
    report = SolveReport(
        n_edges=len(basis), n_tree=tree.n_tree, n_loops=len(loops), n_patches=topo.n_patches,
        solver=solver, tol=settings.tol, restart=settings.restart,
        compatibility_residual=compat,
        divergence_residual=float(np.abs(div - v_rho).max() / scale),
        projection_iterations=stats.iterations, projection_residual=stats.residual,
        loop_projection_max=float(np.abs(proj).max()) if len(proj) else 0.0,
        displacement_norm=float(np.sqrt(max(full @ gd, 0.0))),
        gradient_residual=float(np.linalg.norm(k_nu - v_phi)),
        time_stage1=t2 - t0, time_removal=t3 - t2, time_stage2=t5 - t3,
        time_tree1=t2 - t1, time_tree2=t5 - t4,
    )
    return Solution(nu, d, report, disc, bflux, v_rho, t, l, v_phi, ref_patch)


def evaluate_potential(nu, mesh: TriMesh, points) -> np.ndarray:
    """Piecewise-constant potential at ``points`` (lowest patch index on ties)."""
    return np.asarray(nu)[mesh.locate(points)]
