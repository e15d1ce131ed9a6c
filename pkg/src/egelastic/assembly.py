"""Global assembly of the symmetric EG elasticity system.

The bilinear form is

    a(w, v) = 2 mu sum_T (eps_w(w), eps_w(v))_T
              + lam sum_T (div_w w, div_w v)_T + s(w, v)

with the parameter-free facet stabilization s.  The load functional is
F(v) = (f, v_0) plus, on Neumann facets, |e| (gbar . n_e) for the
enrichment and int_e [g . phi - (g . n)(phi . n)] for the continuous
basis functions (the tangential pairing written via the cross-product
identity).  Dirichlet constraints are eliminated symmetrically: the
matrix keeps its full size with identity rows/columns on constrained
DoFs and prescribed values moved to the right-hand side.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Mapping

import numpy as np
import scipy.sparse as sp

from .mesh import DIRICHLET, NEUMANN, Mesh
from .quadrature import cell_rule, facet_rule, map_points
from .space import DofMap, facet_normal_averages
from .weakops import element_kernels


class ConfigurationError(RuntimeError):
    """A boundary condition or problem field required by the mesh is missing."""


def lame_from_young_poisson(young: float, poisson: float) -> tuple[float, float]:
    """(mu, lam) from Young's modulus and Poisson ratio (plane strain / 3D)."""
    mu = young / (2.0 * (1.0 + poisson))
    lam = young * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson))
    return mu, lam


@dataclass
class ProblemSpec:
    """Material parameters, data fields and quadrature degrees.

    Callables follow the vectorized point convention of `space`.
    `neumann_data` maps facet region ids to traction callables; every
    Neumann-tagged region of the mesh must be covered.
    """

    mu: float
    lam: float
    body_force: Callable | None = None
    dirichlet_data: Callable | None = None
    neumann_data: Mapping[int, Callable] | None = None
    exact: Any = None
    cell_deg: int = 4
    facet_deg: int = 4

    def __post_init__(self):
        if self.mu <= 0.0 or self.lam <= 0.0:
            raise ValueError("Lame parameters must be positive")

    @classmethod
    def from_young_poisson(cls, young: float, poisson: float, **kwargs) -> "ProblemSpec":
        mu, lam = lame_from_young_poisson(young, poisson)
        return cls(mu=mu, lam=lam, **kwargs)


@dataclass
class SparseSystem:
    """Constrained symmetric system ready for the solver.

    The matrix keeps the full DoF count; constrained rows/columns hold the
    identity and `rhs` holds the prescribed values there, so the solution
    vector carries the boundary data directly.
    """

    matrix: sp.csr_matrix
    rhs: np.ndarray
    constrained: np.ndarray
    values: np.ndarray
    free_mask: np.ndarray


def assemble_matrix(mesh: Mesh, dofmap: DofMap, spec: ProblemSpec) -> sp.csr_matrix:
    """Assemble the unconstrained global matrix by cell scatter."""
    k = element_kernels(mesh)
    a_loc = k.stiffness(spec.mu, spec.lam)
    nl = k.n_local
    rows = np.broadcast_to(dofmap.cell_dofs[:, :, None], a_loc.shape)
    cols = np.broadcast_to(dofmap.cell_dofs[:, None, :], a_loc.shape)
    mat = sp.coo_matrix(
        (a_loc.ravel(), (rows.ravel(), cols.ravel())),
        shape=(dofmap.total, dofmap.total),
    )
    return mat.tocsr()


def assemble_divergence_matrix(mesh: Mesh, dofmap: DofMap) -> sp.csr_matrix:
    """The lam-proportional part alone: sum_T |T| (div_w w)(div_w v)."""
    k = element_kernels(mesh)
    rows = np.broadcast_to(dofmap.cell_dofs[:, :, None], k.Adiv.shape)
    cols = np.broadcast_to(dofmap.cell_dofs[:, None, :], k.Adiv.shape)
    mat = sp.coo_matrix(
        (k.Adiv.ravel(), (rows.ravel(), cols.ravel())),
        shape=(dofmap.total, dofmap.total),
    )
    return mat.tocsr()


def assemble_load(mesh: Mesh, dofmap: DofMap, spec: ProblemSpec) -> np.ndarray:
    """Assemble F(v): body force plus Neumann tractions."""
    d = mesh.dim
    b = np.zeros(dofmap.total)

    if spec.body_force is not None:
        bary, w = cell_rule(d, spec.cell_deg)
        pts = map_points(bary, mesh.vertices[mesh.cells])        # (nc, nq, d)
        fv = np.asarray(spec.body_force(pts))
        contrib = np.einsum("c,q,cqk,qj->cjk", mesh.cell_volumes, w, fv, bary)
        cg_dofs = (d * mesh.cells[:, :, None] + np.arange(d)).ravel()
        np.add.at(b, cg_dofs, contrib.ravel())

    neumann = np.nonzero(mesh.boundary_tags == NEUMANN)[0]
    if neumann.size:
        if spec.neumann_data is None:
            raise ConfigurationError("mesh has Neumann facets but no traction data")
        bary, w = facet_rule(d, spec.facet_deg)
        for region in np.unique(mesh.facet_regions[neumann]):
            g = spec.neumann_data.get(int(region))
            if g is None:
                raise ConfigurationError(
                    "no traction for Neumann region %d" % region)
            idx = neumann[mesh.facet_regions[neumann] == region]
            fverts = mesh.facets[idx]                            # (nf, d)
            pts = map_points(bary, mesh.vertices[fverts])        # (nf, nq, d)
            gv = np.asarray(g(pts))
            ne = mesh.facet_normals[idx]
            area = _facet_areas(mesh, idx)
            gbar_n = np.einsum("q,fqk,fk->f", w, gv, ne)
            b[dofmap.n_cg + idx] += area * gbar_n
            gn = np.einsum("fqk,fk->fq", gv, ne)
            tang = gv - gn[:, :, None] * ne[:, None, :]
            contrib = np.einsum("f,q,fqk,qj->fjk", area, w, tang, bary)
            np.add.at(b, (d * fverts[:, :, None] + np.arange(d)).ravel(),
                      contrib.ravel())
    return b


def _facet_areas(mesh: Mesh, facets: np.ndarray) -> np.ndarray:
    """|e| for the given global facets (taken from the owning cell cache)."""
    owner = mesh.facet_cells[facets, 0]
    local = np.argmax(mesh.cell_facets[owner] == facets[:, None], axis=1)
    return mesh.cell_facet_areas[owner, local]


def dirichlet_values(mesh: Mesh, dofmap: DofMap, spec: ProblemSpec) -> np.ndarray:
    """Prescribed values for every constrained DoF, in `constrained` order."""
    if dofmap.constrained.size and spec.dirichlet_data is None:
        raise ConfigurationError("mesh has Dirichlet facets but no boundary data")
    d = mesh.dim
    full = np.zeros(dofmap.total)
    dir_facets = np.nonzero(mesh.boundary_tags == DIRICHLET)[0]
    if dir_facets.size:
        verts = np.unique(mesh.facets[dir_facets])
        vals = np.asarray(spec.dirichlet_data(mesh.vertices[verts]), dtype=float)
        full[(d * verts[:, None] + np.arange(d)).ravel()] = vals.ravel()
        full[dofmap.n_cg + dir_facets] = facet_normal_averages(
            spec.dirichlet_data, mesh, spec.facet_deg, dir_facets)
    return full[dofmap.constrained]


def apply_dirichlet(A: sp.csr_matrix, b: np.ndarray, dofmap: DofMap,
                    spec: ProblemSpec) -> SparseSystem:
    """Symmetric elimination of the constrained DoFs."""
    values = dirichlet_values(dofmap.mesh, dofmap, spec)
    x_c = np.zeros(dofmap.total)
    x_c[dofmap.constrained] = values
    rhs = b - A @ x_c
    rhs[dofmap.constrained] = values

    keep = sp.diags(dofmap.free_mask.astype(float))
    pin = sp.diags(dofmap.constrained_mask.astype(float))
    matrix = (keep @ A @ keep + pin).tocsr()
    return SparseSystem(
        matrix=matrix,
        rhs=rhs,
        constrained=dofmap.constrained,
        values=values,
        free_mask=dofmap.free_mask,
    )


def assemble_system(mesh: Mesh, dofmap: DofMap, spec: ProblemSpec) -> SparseSystem:
    """Matrix, load and constraints in one call."""
    A = assemble_matrix(mesh, dofmap, spec)
    b = assemble_load(mesh, dofmap, spec)
    return apply_dirichlet(A, b, dofmap, spec)
