"""Exact solutions, error norms, convergence rates and stress diagnostics.

Exact fields are bundled as vectorized callables (see `space` for the
point convention).  Error norms compare the continuous part u_0 of the
discrete solution against the exact displacement in L2 and H1, and the
cellwise-constant weak stress against the exact stress in the Frobenius
L2 norm.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .assembly import ProblemSpec
from .quadrature import cell_rule, map_points
from .space import EGFunction, facet_normal_averages, zero_function
from .weakops import element_kernels


@dataclass(frozen=True)
class ExactSolution:
    """Closed-form displacement with gradient, divergence and body force."""

    u: Callable
    grad: Callable
    div: Callable
    body_force: Callable


@dataclass(frozen=True)
class ErrorReport:
    """One row of a convergence study."""

    h: float
    dofs: int
    l2: float
    h1: float
    stress: float


def linear_solution(A: np.ndarray, b: np.ndarray) -> ExactSolution:
    """u = A x + b; the patch-test field (zero body force)."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    d = A.shape[0]

    def u(x):
        return x @ A.T + b

    def grad(x):
        return np.broadcast_to(A, x.shape[:-1] + (d, d)).copy()

    def div(x):
        return np.full(x.shape[:-1], float(np.trace(A)))

    def f(x):
        return np.zeros_like(x)

    return ExactSolution(u, grad, div, f)


def smooth2d_solution(lam: float, mu: float = 1.0) -> ExactSolution:
    """Smooth 2D field with divergence 2/lam (shrinks in the locking limit).

    u = (sin x sin y + x/lam, cos x cos y + y/lam); since the divergence
    is constant the body force reduces to -mu * laplace(u).
    """

    def u(x):
        u1 = np.sin(x[..., 0]) * np.sin(x[..., 1]) + x[..., 0] / lam
        u2 = np.cos(x[..., 0]) * np.cos(x[..., 1]) + x[..., 1] / lam
        return np.stack([u1, u2], axis=-1)

    def grad(x):
        sx, cx = np.sin(x[..., 0]), np.cos(x[..., 0])
        sy, cy = np.sin(x[..., 1]), np.cos(x[..., 1])
        g = np.empty(x.shape[:-1] + (2, 2))
        g[..., 0, 0] = cx * sy + 1.0 / lam
        g[..., 0, 1] = sx * cy
        g[..., 1, 0] = -sx * cy
        g[..., 1, 1] = -cx * sy + 1.0 / lam
        return g

    def div(x):
        return np.full(x.shape[:-1], 2.0 / lam)

    def f(x):
        f1 = 2.0 * mu * np.sin(x[..., 0]) * np.sin(x[..., 1])
        f2 = 2.0 * mu * np.cos(x[..., 0]) * np.cos(x[..., 1])
        return np.stack([f1, f2], axis=-1)

    return ExactSolution(u, grad, div, f)


def smooth3d_solution(lam: float, mu: float = 1.0) -> ExactSolution:
    """Smooth 3D field with divergence 3/lam."""

    def u(x):
        sx, sy, sz = (np.sin(x[..., i]) for i in range(3))
        cx, cy, cz = (np.cos(x[..., i]) for i in range(3))
        u1 = 2.0 * sx * sy * sz + x[..., 0] / lam
        u2 = cx * cy * sz + x[..., 1] / lam
        u3 = cx * sy * cz + x[..., 2] / lam
        return np.stack([u1, u2, u3], axis=-1)

    def grad(x):
        sx, sy, sz = (np.sin(x[..., i]) for i in range(3))
        cx, cy, cz = (np.cos(x[..., i]) for i in range(3))
        g = np.empty(x.shape[:-1] + (3, 3))
        g[..., 0, 0] = 2.0 * cx * sy * sz + 1.0 / lam
        g[..., 0, 1] = 2.0 * sx * cy * sz
        g[..., 0, 2] = 2.0 * sx * sy * cz
        g[..., 1, 0] = -sx * cy * sz
        g[..., 1, 1] = -cx * sy * sz + 1.0 / lam
        g[..., 1, 2] = cx * cy * cz
        g[..., 2, 0] = -sx * sy * cz
        g[..., 2, 1] = cx * cy * cz
        g[..., 2, 2] = -cx * sy * sz + 1.0 / lam
        return g

    def div(x):
        return np.full(x.shape[:-1], 3.0 / lam)

    def f(x):
        sx, sy, sz = (np.sin(x[..., i]) for i in range(3))
        cx, cy, cz = (np.cos(x[..., i]) for i in range(3))
        return np.stack([6.0 * mu * sx * sy * sz,
                         3.0 * mu * cx * cy * sz,
                         3.0 * mu * cx * sy * cz], axis=-1)

    return ExactSolution(u, grad, div, f)


SINGULAR_EXPONENT = 0.5444837367
SINGULAR_AMPLITUDE = 0.5430755688


@dataclass(frozen=True)
class LShapeParams:
    """Constants of the corner singularity on the L-shaped domain."""

    gamma: float
    q: float
    k: float
    nu: float


def solve_singular_exponent(tol: float = 1e-14) -> float:
    """Bisection for the root of sin(3 pi g / 2) = g on [0.5, 0.6]."""
    lo, hi = 0.5, 0.6
    flo = np.sin(1.5 * np.pi * lo) - lo
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        fm = np.sin(1.5 * np.pi * mid) - mid
        if (fm > 0.0) == (flo > 0.0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def singular_amplitude(gamma: float) -> float:
    """Mode-mixture coefficient consistent with the stored amplitude."""
    w = 0.75 * np.pi
    return -np.cos((gamma - 1.0) * w) / np.cos((gamma + 1.0) * w)


def lshape_solution(mu: float, lam: float) -> tuple[LShapeParams, ExactSolution]:
    """Corner-singular field r^gamma on the L-shaped domain, zero body force.

    The polar angle is measured from the positive x axis and lifted to
    [0, 3 pi / 2]; evaluation at the corner r = 0 raises.  The Cartesian
    gradient comes from the chain rule with analytic angular derivatives.
    """
    if mu <= 0.0 or lam <= 0.0:
        raise ValueError("Lame parameters must be positive")
    g = SINGULAR_EXPONENT
    q = SINGULAR_AMPLITUDE
    nu = lam / (2.0 * (lam + mu))
    k = 3.0 - 4.0 * nu
    params = LShapeParams(gamma=g, q=q, k=k, nu=nu)
    c = 1.0 / (2.0 * mu)
    gp, gm = 1.0 + g, 1.0 - g

    def polar(x, derivative: bool):
        r = np.hypot(x[..., 0], x[..., 1])
        if derivative and np.any(r == 0.0):
            # the displacement itself extends by 0, its derivatives do not
            raise ValueError("gradient of the exact solution is singular at r = 0")
        th = np.arctan2(x[..., 1], x[..., 0])
        th = np.where(th < 0.0, th + 2.0 * np.pi, th)
        return r, th

    def angular(th):
        a = -gp * np.cos(gp * th) + (k - g) * q * np.cos(gm * th)
        b = gp * np.sin(gp * th) - (k + g) * q * np.sin(gm * th)
        return a, b

    def angular_prime(th):
        ap = gp * gp * np.sin(gp * th) - (k - g) * gm * q * np.sin(gm * th)
        bp = gp * gp * np.cos(gp * th) - (k + g) * gm * q * np.cos(gm * th)
        return ap, bp

    def u(x):
        r, th = polar(x, derivative=False)
        a, b = angular(th)
        ct, st = np.cos(th), np.sin(th)
        scale = c * r ** g
        return np.stack([scale * (ct * a - st * b),
                         scale * (st * a + ct * b)], axis=-1)

    def grad(x):
        r, th = polar(x, derivative=True)
        a, b = angular(th)
        ap, bp = angular_prime(th)
        ct, st = np.cos(th), np.sin(th)
        scale = c * r ** g
        u1 = scale * (ct * a - st * b)
        u2 = scale * (st * a + ct * b)
        du1 = scale * (-st * a + ct * ap - ct * b - st * bp)
        du2 = scale * (ct * a + st * ap - st * b + ct * bp)
        gr = np.empty(x.shape[:-1] + (2, 2))
        gr[..., 0, 0] = ct * (g / r) * u1 - (st / r) * du1
        gr[..., 0, 1] = st * (g / r) * u1 + (ct / r) * du1
        gr[..., 1, 0] = ct * (g / r) * u2 - (st / r) * du2
        gr[..., 1, 1] = st * (g / r) * u2 + (ct / r) * du2
        return gr

    def div(x):
        r, th = polar(x, derivative=True)
        return (2.0 * g * q / (lam + mu)) * r ** (g - 1.0) * np.cos(gm * th)

    def f(x):
        return np.zeros_like(x)

    return params, ExactSolution(u, grad, div, f)


def exact_stress(exact: ExactSolution, mu: float, lam: float) -> Callable:
    """Pointwise stress 2 mu eps(u) + lam (div u) I of an exact field."""
    d_eye = None

    def sigma(x):
        g = exact.grad(x)
        d = g.shape[-1]
        eps = 0.5 * (g + np.swapaxes(g, -1, -2))
        return 2.0 * mu * eps + lam * exact.div(x)[..., None, None] * np.eye(d)

    return sigma


def error_norms(u_h: EGFunction, spec: ProblemSpec, quad_deg: int = 4) -> ErrorReport:
    """L2/H1 errors of u_0 and the Frobenius L2 error of the weak stress."""
    if spec.exact is None:
        raise ValueError("ProblemSpec carries no exact solution")
    if quad_deg < 4:
        raise ValueError("quad_deg must be >= 4")
    exact = spec.exact
    mesh = u_h.dofmap.mesh
    k = element_kernels(mesh)
    bary, w = cell_rule(mesh.dim, quad_deg)
    pts = map_points(bary, mesh.vertices[mesh.cells])
    vol = mesh.cell_volumes

    ue = np.asarray(exact.u(pts))
    uh = u_h.u0_at(np.arange(mesh.n_cells), bary)
    l2 = np.sqrt(np.einsum("c,q,cqd->", vol, w, (ue - uh) ** 2))

    ge = np.asarray(exact.grad(pts))
    gh = k.apply_cg_gradient(u_h)
    h1 = np.sqrt(np.einsum("c,q,cqij->", vol, w, (ge - gh[:, None]) ** 2))

    eps_e = 0.5 * (ge + np.swapaxes(ge, -1, -2))
    sig_e = 2.0 * spec.mu * eps_e \
        + spec.lam * np.asarray(exact.div(pts))[..., None, None] * np.eye(mesh.dim)
    gw = k.apply_gradient(u_h)
    sig_h = 2.0 * spec.mu * 0.5 * (gw + np.swapaxes(gw, -1, -2)) \
        + spec.lam * k.apply_divergence(u_h)[:, None, None] * np.eye(mesh.dim)
    stress = np.sqrt(np.einsum("c,q,cqij->", vol, w, (sig_e - sig_h[:, None]) ** 2))

    return ErrorReport(h=mesh.h, dofs=u_h.dofmap.total,
                       l2=float(l2), h1=float(h1), stress=float(stress))


def discrete_norms(v: EGFunction) -> tuple[float, float]:
    """Energy-type norms (|||v|||, ||v||_{1,h}).

    Both share the scaled facet-jump term; the first uses the weak strain,
    the second the strain of the continuous part.
    """
    mesh = v.dofmap.mesh
    k = element_kernels(mesh)
    vol = mesh.cell_volumes
    jumps = k.apply_jumps(v)
    jump_sq = np.einsum("c,ce,ce->", 1.0 / mesh.cell_diameters,
                        mesh.cell_facet_areas, jumps ** 2)
    eps_w = k.apply_strain(v)
    gc = k.apply_cg_gradient(v)
    eps_c = 0.5 * (gc + np.swapaxes(gc, -1, -2))
    triple = np.sqrt(np.einsum("c,cij->", vol, eps_w ** 2) + jump_sq)
    one_h = np.sqrt(np.einsum("c,cij->", vol, eps_c ** 2) + jump_sq)
    return float(triple), float(one_h)


def convergence_rates(errors: list[tuple[float, float]]) -> list[float | None]:
    """Per-step rates log(e_prev/e)/log(h_prev/h); None where undefined."""
    if len(errors) < 2:
        raise ValueError("need at least two rows")
    hs = [h for h, _ in errors]
    if any(h2 >= h1 for h1, h2 in zip(hs, hs[1:])):
        raise ValueError("mesh sizes must decrease strictly")
    rates: list[float | None] = [None]
    for (h1, e1), (h2, e2) in zip(errors, errors[1:]):
        if e1 <= 0.0 or e2 <= 0.0:
            rates.append(None)
        else:
            rates.append(float(np.log(e1 / e2) / np.log(h1 / h2)))
    return rates


def von_mises(u_h: EGFunction, mu: float, lam: float) -> np.ndarray:
    """Plane-strain Von Mises stress per cell, with sigma_33 = lam div_w u."""
    mesh = u_h.dofmap.mesh
    if mesh.dim != 2:
        raise ValueError("Von Mises output is defined for plane strain (2D) only")
    k = element_kernels(mesh)
    gw = k.apply_gradient(u_h)
    divw = k.apply_divergence(u_h)
    eps = 0.5 * (gw + np.swapaxes(gw, -1, -2))
    s11 = 2.0 * mu * eps[:, 0, 0] + lam * divw
    s22 = 2.0 * mu * eps[:, 1, 1] + lam * divw
    s12 = 2.0 * mu * eps[:, 0, 1]
    s33 = lam * divw
    return np.sqrt(0.5 * (s11 - s22) ** 2 + 0.5 * (s33 - s22) ** 2
                   + 0.5 * (s11 - s33) ** 2 + 3.0 * s12 ** 2)


def commutativity_residual(w: Callable, div_w: Callable, mesh,
                           facet_deg: int = 4, cell_deg: int = 4) -> float:
    """Max over cells of |div_w(interpolated w) - cell average of div w|.

    Interpolation here only needs the facet averages of w . n_e; for
    polynomial w and exact quadrature the residual is machine zero.
    """
    from .space import build_dof_map

    dofmap = build_dof_map(mesh)
    v = zero_function(dofmap)
    v.ub[:] = facet_normal_averages(w, mesh, facet_deg)
    k = element_kernels(mesh)
    weak_div = k.apply_divergence(v)
    bary, wq = cell_rule(mesh.dim, cell_deg)
    pts = map_points(bary, mesh.vertices[mesh.cells])
    avg = np.asarray(div_w(pts)) @ wq
    return float(np.max(np.abs(weak_div - avg)))
