"""Enriched Galerkin space: vector P1 plus one constant per facet.

DoF layout is vertex-major for the continuous block, then one enrichment
DoF per facet: component c of vertex v is DoF d*v + c, facet f is DoF
n_cg + f.  The enrichment value on a facet approximates the average of
u . n_e over that facet and corrects the normal trace of the P1 part.

Field callables follow a vectorized convention throughout the package:
they accept arrays of points of shape (..., d) and return values of shape
(..., d) (or (...,) for scalars).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .mesh import DIRICHLET, Mesh
from .quadrature import facet_rule, map_points


@dataclass(frozen=True)
class DofMap:
    """Global DoF numbering for one mesh.

    n_cg continuous DoFs (d per vertex, vertex-major), n_eg = n_facets
    enrichment DoFs.  `cell_dofs` gathers the d*(d+1) vertex DoFs followed
    by the d+1 facet DoFs of each cell.  `constrained` lists the DoFs
    fixed by Dirichlet facets: all vertex components on those facets plus
    their enrichment DoFs.
    """

    mesh: Mesh
    n_cg: int
    n_eg: int
    total: int
    cell_dofs: np.ndarray
    constrained: np.ndarray
    constrained_mask: np.ndarray

    @property
    def free_mask(self) -> np.ndarray:
        return ~self.constrained_mask


def build_dof_map(mesh: Mesh) -> DofMap:
    """Number DoFs and derive the constrained set from Dirichlet tags."""
    d = mesh.dim
    n_cg = d * mesh.n_vertices
    n_eg = mesh.n_facets
    total = n_cg + n_eg

    vertex_dofs = (d * mesh.cells[:, :, None] + np.arange(d)).reshape(mesh.n_cells, -1)
    cell_dofs = np.concatenate([vertex_dofs, n_cg + mesh.cell_facets], axis=1)

    dir_facets = np.nonzero(mesh.boundary_tags == DIRICHLET)[0]
    dir_vertices = np.unique(mesh.facets[dir_facets])
    cg_constrained = (d * dir_vertices[:, None] + np.arange(d)).ravel()
    constrained = np.concatenate([cg_constrained, n_cg + dir_facets]).astype(np.int64)
    constrained = np.unique(constrained)
    mask = np.zeros(total, dtype=bool)
    mask[constrained] = True

    return DofMap(
        mesh=mesh,
        n_cg=n_cg,
        n_eg=n_eg,
        total=total,
        cell_dofs=cell_dofs,
        constrained=constrained,
        constrained_mask=mask,
    )


@dataclass
class EGFunction:
    """One discrete field over a DofMap: coefficients for {u_0, u_b}."""

    dofmap: DofMap
    coeffs: np.ndarray

    def __post_init__(self):
        if self.coeffs.shape != (self.dofmap.total,):
            raise ValueError("coefficient vector length mismatch")

    @property
    def u0(self) -> np.ndarray:
        """Continuous part as an (n_vertices, d) array (a view)."""
        d = self.dofmap.mesh.dim
        return self.coeffs[: self.dofmap.n_cg].reshape(-1, d)

    @property
    def ub(self) -> np.ndarray:
        """Enrichment part as an (n_facets,) array (a view)."""
        return self.coeffs[self.dofmap.n_cg:]

    def cell_coefficients(self) -> np.ndarray:
        """Local coefficient vectors, shape (n_cells, d*(d+1) + d+1)."""
        return self.coeffs[self.dofmap.cell_dofs]

    def u0_at(self, cells: np.ndarray, bary: np.ndarray) -> np.ndarray:
        """Evaluate u_0 at barycentric points on the given cells.

        bary has shape (nq, d+1); the result is (len(cells), nq, d).
        """
        nodal = self.u0[self.dofmap.mesh.cells[cells]]  # (nc, d+1, d)
        return np.einsum("qj,cjd->cqd", bary, nodal)


def zero_function(dofmap: DofMap) -> EGFunction:
    return EGFunction(dofmap, np.zeros(dofmap.total))


def lift_cg(nodal_values: np.ndarray, dofmap: DofMap) -> EGFunction:
    """Lift a continuous P1 field into the EG space.

    The enrichment on each facet is set to (facet average of v_0) . n_e,
    exact for P1 traces as the mean of the facet-vertex values.  Weak
    operators applied to a lifted field coincide with classical ones.
    """
    mesh = dofmap.mesh
    nodal = np.asarray(nodal_values, dtype=float)
    if nodal.shape != (mesh.n_vertices, mesh.dim):
        raise ValueError("expected one %d-vector per vertex" % mesh.dim)
    coeffs = np.empty(dofmap.total)
    coeffs[: dofmap.n_cg] = nodal.ravel()
    facet_means = nodal[mesh.facets].mean(axis=1)
    coeffs[dofmap.n_cg:] = np.einsum("fd,fd->f", facet_means, mesh.facet_normals)
    return EGFunction(dofmap, coeffs)


def facet_normal_averages(u: Callable, mesh: Mesh, degree: int,
                          facets: np.ndarray | None = None) -> np.ndarray:
    """Facet averages (1/|e|) int_e u . n_e ds by Gauss quadrature."""
    if facets is None:
        facets = np.arange(mesh.n_facets)
    bary, w = facet_rule(mesh.dim, degree)
    pts = map_points(bary, mesh.vertices[mesh.facets[facets]])
    vals = np.asarray(u(pts))
    un = np.einsum("fqd,fd->fq", vals, mesh.facet_normals[facets])
    return un @ w


def interpolate_exact(u: Callable, dofmap: DofMap,
                      facet_quadrature_degree: int = 4) -> EGFunction:
    """Interpolate a displacement field into the EG space.

    The continuous part takes the vertex values of u (first-order Lagrange
    interpolation); the enrichment takes the quadrature average of u . n_e
    on each facet.
    """
    mesh = dofmap.mesh
    coeffs = np.empty(dofmap.total)
    coeffs[: dofmap.n_cg] = np.asarray(u(mesh.vertices), dtype=float).ravel()
    coeffs[dofmap.n_cg:] = facet_normal_averages(u, mesh, facet_quadrature_degree)
    return EGFunction(dofmap, coeffs)
