"""Per-element kernels: weak gradient, weak divergence, stabilization.

The weak gradient of an EG function v = {v_0, v_b} on a cell T is the
constant tensor

    grad_w v = (1/|T|) sum_e |e| [ vbar_0 (x) n
                                   + (v_b sigma_e - vbar_0 . n) n (x) n ],

where the sum runs over the facets of T, n is the outward unit normal,
sigma_e relates it to the assigned facet normal, and vbar_0 is the exact
facet average of the P1 trace (mean of the facet-vertex values).  The weak
divergence is its trace, (1/|T|) sum_e |e| sigma_e v_b, which only sees
the enrichment.  Tangential pairings use the identity
(n x a) . (n x b) = a . b - (a . n)(b . n), valid in 2D and 3D, so both
dimensions share one code path.

All kernels are linear in the local coefficients, so they are stored as
dense per-cell maps over the local DoF order of DofMap.cell_dofs.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import Mesh
from .space import EGFunction


class ElementKernels:
    """Vectorized per-cell linear maps from local coefficients.

    Attributes
    ----------
    G : (nc, d, d, nl) array
        grad_w entries per local basis vector.
    D : (nc, nl) array
        weak divergence per local basis vector.
    Eps : (nc, d, d, nl) array
        symmetrized G (weak strain).
    J : (nc, d+1, nl) array
        facet jump j_e(v) = vbar_0 . n_e - v_b per local facet.
    S : (nc, nl, nl) array
        stabilization matrix h_T^{-1} sum_e |e| j_e j_e.
    P1G : (nc, d, d+1) array
        classical P1 basis gradients (grad phi_j), for lift checks and
        the conforming strain in diagnostics.
    """

    def __init__(self, mesh: Mesh):
        d = mesh.dim
        nc = mesh.n_cells
        nl = d * (d + 1) + (d + 1)
        self.mesh = mesh
        self.n_local = nl

        vol = mesh.cell_volumes
        G = np.zeros((nc, d, d, nl))
        D = np.zeros((nc, nl))
        J = np.zeros((nc, d + 1, nl))
        for e in range(d + 1):
            a = mesh.cell_facet_areas[:, e] / vol          # (nc,)
            n = mesh.cell_facet_normals[:, e, :]           # (nc, d)
            sgn = mesh.cell_facet_signs[:, e]
            nn = n[:, :, None] * n[:, None, :]             # (nc, d, d)
            col_b = d * (d + 1) + e
            G[:, :, :, col_b] += (a * sgn)[:, None, None] * nn
            D[:, col_b] = a * sgn
            J[:, e, col_b] = -1.0
            ne = (sgn[:, None] * n)                        # assigned normal n_e
            for j in range(d + 1):
                if j == e:
                    continue
                for c in range(d):
                    col = d * j + c
                    G[:, c, :, col] += a[:, None] * n / d
                    G[:, :, :, col] -= (a / d)[:, None, None] * n[:, c, None, None] * nn
                    J[:, e, col] = ne[:, c] / d
        self.G = G
        self.D = D
        self.J = J
        self.Eps = 0.5 * (G + G.transpose(0, 2, 1, 3))

        areas = mesh.cell_facet_areas
        self.S = np.einsum("c,ce,cel,cem->clm",
                           1.0 / mesh.cell_diameters, areas, J, J)
        # material-independent stiffness parts: A = 2 mu Aeps + lam Adiv + S
        self.Aeps = np.einsum("c,cijl,cijm->clm", vol, self.Eps, self.Eps)
        self.Adiv = np.einsum("c,cl,cm->clm", vol, D, D)

        # classical P1 gradients: grad phi_j = -|e_j| n_j / (d |T|)
        self.P1G = -(mesh.cell_facet_areas[:, None, :]
                     * mesh.cell_facet_normals.transpose(0, 2, 1)
                     / (d * vol[:, None, None]))

    def stiffness(self, mu: float, lam: float) -> np.ndarray:
        """Local matrices of the bilinear form, shape (nc, nl, nl)."""
        return 2.0 * mu * self.Aeps + lam * self.Adiv + self.S

    def apply_gradient(self, v: EGFunction) -> np.ndarray:
        """Weak gradient on every cell, shape (nc, d, d)."""
        return np.einsum("cijl,cl->cij", self.G, v.cell_coefficients())

    def apply_divergence(self, v: EGFunction) -> np.ndarray:
        """Weak divergence on every cell, shape (nc,)."""
        return np.einsum("cl,cl->c", self.D, v.cell_coefficients())

    def apply_strain(self, v: EGFunction) -> np.ndarray:
        return np.einsum("cijl,cl->cij", self.Eps, v.cell_coefficients())

    def apply_jumps(self, v: EGFunction) -> np.ndarray:
        """Facet jumps j_e(v) per cell and local facet, shape (nc, d+1)."""
        return np.einsum("cel,cl->ce", self.J, v.cell_coefficients())

    def apply_cg_gradient(self, v: EGFunction) -> np.ndarray:
        """Classical gradient of the P1 part, shape (nc, d, d)."""
        nodal = v.u0[self.mesh.cells]                      # (nc, d+1, d)
        return np.einsum("cij,cjk->cki", self.P1G, nodal)


def element_kernels(mesh: Mesh) -> ElementKernels:
    """Kernels for a mesh, cached on the mesh object."""
    cached = getattr(mesh, "_element_kernels", None)
    if cached is None:
        cached = ElementKernels(mesh)
        mesh._element_kernels = cached
    return cached


@dataclass(frozen=True)
class ElementKernel:
    """Single-cell view: the local maps and the local stiffness matrix."""

    cell: int
    dofs: np.ndarray
    G: np.ndarray
    D: np.ndarray
    S: np.ndarray
    A_loc: np.ndarray


def local_system(mesh: Mesh, cell: int, mu: float, lam: float) -> ElementKernel:
    """Local stiffness A_loc = 2 mu |T| eps:eps + lam |T| D D + S on one cell."""
    if mu <= 0.0 or lam < 0.0:
        raise ValueError("need mu > 0 and lam >= 0")
    k = element_kernels(mesh)
    d = mesh.dim
    vertex_dofs = (d * mesh.cells[cell, :, None] + np.arange(d)).ravel()
    facet_dofs = d * mesh.n_vertices + mesh.cell_facets[cell]
    return ElementKernel(
        cell=cell,
        dofs=np.concatenate([vertex_dofs, facet_dofs]),
        G=k.G[cell],
        D=k.D[cell],
        S=k.S[cell],
        A_loc=2.0 * mu * k.Aeps[cell] + lam * k.Adiv[cell] + k.S[cell],
    )


def weak_gradient(v: EGFunction, cell: int) -> np.ndarray:
    """Constant tensor grad_w v on one cell."""
    k = element_kernels(v.dofmap.mesh)
    return np.einsum("ijl,l->ij", k.G[cell], v.coeffs[v.dofmap.cell_dofs[cell]])


def weak_divergence(v: EGFunction, cell: int) -> float:
    """Constant scalar div_w v on one cell."""
    k = element_kernels(v.dofmap.mesh)
    return float(k.D[cell] @ v.coeffs[v.dofmap.cell_dofs[cell]])


def weak_strain(v: EGFunction, cell: int) -> np.ndarray:
    """Symmetric part of the weak gradient."""
    g = weak_gradient(v, cell)
    return 0.5 * (g + g.T)


def weak_stress(v: EGFunction, cell: int, mu: float, lam: float) -> np.ndarray:
    """sigma_w = 2 mu eps_w + lam (div_w) I on one cell."""
    if mu <= 0.0 or lam <= 0.0:
        raise ValueError("need mu > 0 and lam > 0")
    d = v.dofmap.mesh.dim
    return 2.0 * mu * weak_strain(v, cell) + lam * weak_divergence(v, cell) * np.eye(d)
