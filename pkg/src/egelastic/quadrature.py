"""Gauss quadrature on reference simplices.

Rules are built as collapsed (Duffy) tensor products of Gauss-Jacobi and
Gauss-Legendre points, so a requested polynomial degree is integrated
exactly without hardcoded tables.  Points are returned in barycentric
coordinates with weights normalised to sum to one; the integral over a
physical simplex S is then |S| * sum(w_q * f(x_q)).
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi


def _gl01(n: int):
    """Gauss-Legendre points/weights on [0, 1], weights summing to 1."""
    t, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (t + 1.0), 0.5 * w


def _gj01(n: int, alpha: int):
    """Gauss-Jacobi points/weights on [0, 1] for the weight (1-u)^alpha.

    Weights absorb the weight function: sum(w * g(u)) = int_0^1 g (1-u)^a du.
    """
    t, w = roots_jacobi(n, alpha, 0.0)
    return 0.5 * (t + 1.0), w / 2.0 ** (alpha + 1)


@lru_cache(maxsize=None)
def simplex_rule(sdim: int, degree: int):
    """Quadrature rule on the reference simplex of dimension sdim.

    Parameters
    ----------
    sdim : 1 (edge), 2 (triangle) or 3 (tetrahedron).
    degree : highest total polynomial degree integrated exactly.

    Returns
    -------
    bary : (nq, sdim+1) array of barycentric coordinates.
    weights : (nq,) array summing to 1.
    """
    if degree < 0:
        raise ValueError("degree must be >= 0")
    n = degree // 2 + 1
    if sdim == 1:
        u, wu = _gl01(n)
        bary = np.stack([1.0 - u, u], axis=1)
        return bary, wu.copy()
    if sdim == 2:
        u, wu = _gj01(n, 1)
        v, wv = _gl01(n)
        uu, vv = np.meshgrid(u, v, indexing="ij")
        x = uu.ravel()
        y = (vv * (1.0 - uu)).ravel()
        w = np.outer(wu, wv).ravel()
        bary = np.stack([1.0 - x - y, x, y], axis=1)
        return bary, w / 0.5
    if sdim == 3:
        u, wu = _gj01(n, 2)
        v, wv = _gj01(n, 1)
        s, ws = _gl01(n)
        uu, vv, ss = np.meshgrid(u, v, s, indexing="ij")
        x = uu.ravel()
        y = (vv * (1.0 - uu)).ravel()
        z = (ss * (1.0 - uu) * (1.0 - vv)).ravel()
        w = np.einsum("i,j,k->ijk", wu, wv, ws).ravel()
        bary = np.stack([1.0 - x - y - z, x, y, z], axis=1)
        return bary, w / (1.0 / 6.0)
    raise ValueError("sdim must be 1, 2 or 3")


def cell_rule(dim: int, degree: int):
    """Rule on cells (triangles for dim=2, tetrahedra for dim=3)."""
    return simplex_rule(dim, degree)


def facet_rule(dim: int, degree: int):
    """Rule on facets (edges for dim=2, triangles for dim=3)."""
    return simplex_rule(dim - 1, degree)


def map_points(bary: np.ndarray, corner_coords: np.ndarray) -> np.ndarray:
    """Map barycentric points onto physical simplices.

    bary is (nq, k); corner_coords is (..., k, d).  Returns (..., nq, d).
    """
    return np.einsum("qk,...kd->...qd", bary, corner_coords)
