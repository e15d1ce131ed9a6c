"""Simplicial meshes with globally oriented facets.

Triangles in 2D, tetrahedra in 3D.  Every facet (edge or triangular face)
carries one assigned unit normal ``n_e``; each adjacent cell records the
sign ``sigma = n . n_e`` relating its own outward normal ``n`` to the
assigned one.  Interior facets point from the lower-indexed adjacent cell
to the higher-indexed one, boundary facets point outward.

Local facet ``i`` of a cell is the facet opposite local vertex ``i``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

# boundary tags
INTERIOR = 0
DIRICHLET = 1
NEUMANN = 2

# region ids used by the Cook panel builder
REGION_NONE = 0
REGION_LOAD = 1
REGION_FREE = 2


@dataclass
class Mesh:
    """Immutable simplicial mesh with facet orientation and geometry caches.

    Attributes
    ----------
    dim : int
        Spatial dimension, 2 or 3.
    vertices : (nv, dim) float array
        Vertex coordinates.
    cells : (nc, dim+1) int array
        Vertex indices per cell, ordered for positive volume.
    facets : (nf, dim) int array
        Vertex indices per facet, sorted ascending.
    facet_cells : (nf, 2) int array
        Adjacent cell indices, ascending; second entry -1 on the boundary.
    facet_normals : (nf, dim) float array
        Assigned unit normal n_e per facet.
    boundary_tags : (nf,) int array
        INTERIOR, DIRICHLET or NEUMANN.
    facet_regions : (nf,) int array
        Application-defined region id (REGION_NONE by default).
    nominal_h : float
        Nominal mesh size of the generator.
    cell_volumes, cell_diameters : (nc,) float arrays
        |T| and h_T (longest edge).
    cell_facets : (nc, dim+1) int array
        Global facet index of each local facet.
    cell_facet_areas : (nc, dim+1) float array
        |e| per local facet.
    cell_facet_normals : (nc, dim+1, dim) float array
        Outward unit normal n per local facet.
    cell_facet_signs : (nc, dim+1) float array
        sigma = n . n_e, +1 or -1.
    """

    dim: int
    vertices: np.ndarray
    cells: np.ndarray
    facets: np.ndarray
    facet_cells: np.ndarray
    facet_normals: np.ndarray
    boundary_tags: np.ndarray
    facet_regions: np.ndarray
    nominal_h: float
    cell_volumes: np.ndarray = field(repr=False, default=None)
    cell_diameters: np.ndarray = field(repr=False, default=None)
    cell_facets: np.ndarray = field(repr=False, default=None)
    cell_facet_areas: np.ndarray = field(repr=False, default=None)
    cell_facet_normals: np.ndarray = field(repr=False, default=None)
    cell_facet_signs: np.ndarray = field(repr=False, default=None)

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_cells(self) -> int:
        return self.cells.shape[0]

    @property
    def n_facets(self) -> int:
        return self.facets.shape[0]

    @property
    def is_boundary_facet(self) -> np.ndarray:
        """Boolean mask of boundary facets."""
        return self.facet_cells[:, 1] < 0

    @property
    def h(self) -> float:
        """Mesh size max_T h_T."""
        return float(self.cell_diameters.max())

    def validate(self) -> None:
        """Assert the structural invariants; raises AssertionError on defect."""
        nv, nc, nf = self.n_vertices, self.n_cells, self.n_facets
        assert self.cells.min() >= 0 and self.cells.max() < nv
        assert np.all(self.cell_volumes > 0.0), "nonpositive cell volume"
        # adjacency: interior facets have 2 cells, boundary facets 1
        assert np.all(self.facet_cells[:, 0] >= 0)
        interior = ~self.is_boundary_facet
        counts = np.bincount(self.cell_facets.ravel(), minlength=nf)
        assert np.array_equal(counts, np.where(interior, 2, 1))
        # signs are exactly +-1 and consistent with n = sigma * n_e
        assert np.all(np.abs(self.cell_facet_signs) == 1.0)
        ne = self.facet_normals[self.cell_facets]
        recon = self.cell_facet_signs[:, :, None] * ne
        assert np.allclose(recon, self.cell_facet_normals, atol=1e-12)
        # adjacent cells see the facet with opposite signs
        sign_sum = np.zeros(nf)
        np.add.at(sign_sum, self.cell_facets.ravel(), self.cell_facet_signs.ravel())
        assert np.all(sign_sum[interior] == 0.0)
        assert np.all(np.abs(sign_sum[~interior]) == 1.0)
        # closed-surface identity per cell: sum of |e| n over local facets is 0
        closed = np.einsum("ce,ced->cd", self.cell_facet_areas, self.cell_facet_normals)
        scale = self.cell_facet_areas.max(axis=1)
        assert np.all(np.abs(closed).max(axis=1) <= 1e-12 * np.maximum(scale, 1.0))
        # boundary facets are tagged, interior facets are not
        assert np.all(self.boundary_tags[interior] == INTERIOR)
        assert np.all(self.boundary_tags[~interior] != INTERIOR)
        # nominal size within a factor of two of the measured mesh size
        assert 0.5 * self.nominal_h <= self.h <= 2.0 * self.nominal_h

    def with_flipped_facet(self, facet: int) -> "Mesh":
        """Copy of the mesh with the assigned normal of one facet negated.

        The adjacent signs flip with it, so the mesh stays valid.  Used by
        the orientation-invariance checks.
        """
        normals = self.facet_normals.copy()
        normals[facet] = -normals[facet]
        signs = self.cell_facet_signs.copy()
        signs[self.cell_facets == facet] *= -1.0
        return Mesh(
            dim=self.dim,
            vertices=self.vertices,
            cells=self.cells,
            facets=self.facets,
            facet_cells=self.facet_cells,
            facet_normals=normals,
            boundary_tags=self.boundary_tags,
            facet_regions=self.facet_regions,
            nominal_h=self.nominal_h,
            cell_volumes=self.cell_volumes,
            cell_diameters=self.cell_diameters,
            cell_facets=self.cell_facets,
            cell_facet_areas=self.cell_facet_areas,
            cell_facet_normals=self.cell_facet_normals,
            cell_facet_signs=signs,
        )


def _oriented_cells(vertices: np.ndarray, cells: np.ndarray) -> np.ndarray:
    """Reorder cell vertices so all volumes are positive."""
    p = vertices[cells]
    det = np.linalg.det(p[:, 1:] - p[:, :1])
    if np.any(det == 0.0):
        raise ValueError("degenerate cell with zero volume")
    cells = cells.copy()
    flip = det < 0.0
    last = cells[flip, -1].copy()
    cells[flip, -1] = cells[flip, -2]
    cells[flip, -2] = last
    return cells


def _facet_geometry(vertices: np.ndarray, cells: np.ndarray, local: int):
    """Area and outward unit normal of local facet `local` for all cells."""
    d = vertices.shape[1]
    idx = [j for j in range(d + 1) if j != local]
    fp = vertices[cells[:, idx]]          # (nc, d, d) facet vertex coords
    opp = vertices[cells[:, local]]       # (nc, d) opposite vertex
    if d == 2:
        t = fp[:, 1] - fp[:, 0]
        area = np.linalg.norm(t, axis=1)
        n = np.stack([t[:, 1], -t[:, 0]], axis=1) / area[:, None]
    else:
        t = np.cross(fp[:, 1] - fp[:, 0], fp[:, 2] - fp[:, 0])
        norm = np.linalg.norm(t, axis=1)
        area = 0.5 * norm
        n = t / norm[:, None]
    outward = np.einsum("cd,cd->c", n, fp.mean(axis=1) - opp)
    n[outward < 0.0] *= -1.0
    return area, n


def _build_mesh(dim: int, vertices: np.ndarray, cells: np.ndarray,
                nominal_h: float) -> Mesh:
    """Assemble topology and geometry caches from raw vertices and cells.

    Boundary facets are tagged DIRICHLET by default; builders retag
    afterwards where needed (tags are set before validation).
    """
    vertices = np.ascontiguousarray(vertices, dtype=float)
    cells = _oriented_cells(vertices, np.ascontiguousarray(cells, dtype=np.int64))
    nc = cells.shape[0]
    d = dim

    # enumerate facets by sorted vertex tuple
    key_of = {}
    cell_facets = np.empty((nc, d + 1), dtype=np.int64)
    facet_list = []
    adjacency = []
    for local in range(d + 1):
        idx = [j for j in range(d + 1) if j != local]
        keys = np.sort(cells[:, idx], axis=1)
        for c in range(nc):
            key = tuple(keys[c])
            f = key_of.get(key)
            if f is None:
                f = len(facet_list)
                key_of[key] = f
                facet_list.append(key)
                adjacency.append([c])
            else:
                adjacency[f].append(c)
            cell_facets[c, local] = f
    nf = len(facet_list)
    facets = np.array(facet_list, dtype=np.int64)
    facet_cells = np.full((nf, 2), -1, dtype=np.int64)
    for f, adj in enumerate(adjacency):
        if len(adj) > 2:
            raise ValueError("nonmanifold facet")
        facet_cells[f, : len(adj)] = sorted(adj)

    # geometry caches
    p = vertices[cells]
    if d == 2:
        det = np.linalg.det(p[:, 1:] - p[:, :1])
        volumes = 0.5 * det
    else:
        det = np.linalg.det(p[:, 1:] - p[:, :1])
        volumes = det / 6.0
    edges = [(a, b) for a in range(d + 1) for b in range(a + 1, d + 1)]
    elen = np.stack(
        [np.linalg.norm(p[:, b] - p[:, a], axis=1) for a, b in edges], axis=1
    )
    diameters = elen.max(axis=1)

    areas = np.empty((nc, d + 1))
    normals = np.empty((nc, d + 1, d))
    for local in range(d + 1):
        areas[:, local], normals[:, local] = _facet_geometry(vertices, cells, local)

    # assigned normal: outward normal of the lower-indexed adjacent cell
    facet_normals = np.empty((nf, d))
    owner = facet_cells[:, 0]
    local_of_owner = np.argmax(cell_facets[owner] == np.arange(nf)[:, None], axis=1)
    facet_normals[:] = normals[owner, local_of_owner]
    signs_raw = np.einsum("ced,ced->ce", normals, facet_normals[cell_facets])
    signs = np.where(signs_raw >= 0.0, 1.0, -1.0)

    boundary = facet_cells[:, 1] < 0
    tags = np.where(boundary, DIRICHLET, INTERIOR).astype(np.int64)
    regions = np.zeros(nf, dtype=np.int64)

    mesh = Mesh(
        dim=d,
        vertices=vertices,
        cells=cells,
        facets=facets,
        facet_cells=facet_cells,
        facet_normals=facet_normals,
        boundary_tags=tags,
        facet_regions=regions,
        nominal_h=float(nominal_h),
        cell_volumes=volumes,
        cell_diameters=diameters,
        cell_facets=cell_facets,
        cell_facet_areas=areas,
        cell_facet_normals=normals,
        cell_facet_signs=signs,
    )
    return mesh


def build_unit_square_mesh(n: int) -> Mesh:
    """Uniform triangulation of the unit square with n cells per side.

    Each of the n*n squares is split along the lower-left to upper-right
    diagonal: 2 n^2 cells, (n+1)^2 vertices, 3 n^2 + 2 n facets.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    xs = np.linspace(0.0, 1.0, n + 1)
    xx, yy = np.meshgrid(xs, xs, indexing="xy")
    vertices = np.stack([xx.ravel(), yy.ravel()], axis=1)

    def vid(i, j):
        return j * (n + 1) + i

    cells = []
    for j in range(n):
        for i in range(n):
            a, b = vid(i, j), vid(i + 1, j)
            c, dd = vid(i + 1, j + 1), vid(i, j + 1)
            cells.append((a, b, c))
            cells.append((a, c, dd))
    mesh = _build_mesh(2, vertices, np.array(cells), nominal_h=np.sqrt(2.0) / n)
    mesh.validate()
    return mesh


def build_unit_cube_mesh(n: int) -> Mesh:
    """Kuhn triangulation of the unit cube with n cells per side.

    Each of the n^3 cubes is split into 6 tetrahedra along the main
    diagonal (one tet per permutation of the axis order); all volumes are
    1/(6 n^3).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    xs = np.linspace(0.0, 1.0, n + 1)
    grid = np.stack(np.meshgrid(xs, xs, xs, indexing="ij"), axis=-1)
    vertices = grid.reshape(-1, 3)

    def vid(i, j, k):
        return (i * (n + 1) + j) * (n + 1) + k

    perms = list(itertools.permutations(range(3)))
    cells = []
    for i in range(n):
        for j in range(n):
            for k in range(n):
                base = np.array([i, j, k])
                for perm in perms:
                    steps = [base.copy()]
                    for axis in perm:
                        nxt = steps[-1].copy()
                        nxt[axis] += 1
                        steps.append(nxt)
                    cells.append([vid(*s) for s in steps])
    mesh = _build_mesh(3, vertices, np.array(cells), nominal_h=np.sqrt(3.0) / n)
    mesh.validate()
    return mesh


def _lshape_level0() -> Mesh:
    """96-cell uniform mesh of (-1,1)^2 minus the fourth-quadrant square."""
    m = 8  # 8x8 grid of spacing 1/4 over (-1,1)^2
    vid = {}
    points = []
    for j in range(m + 1):
        for i in range(m + 1):
            x, y = -1.0 + i / 4.0, -1.0 + j / 4.0
            if x > 0.0 and y < 0.0:
                continue
            vid[(i, j)] = len(points)
            points.append((x, y))
    cells = []
    for j in range(m):
        for i in range(m):
            # skip sub-squares inside the removed quadrant
            if i >= m // 2 and j < m // 2:
                continue
            a, b = vid[(i, j)], vid[(i + 1, j)]
            c, d = vid[(i + 1, j + 1)], vid[(i, j + 1)]
            cells.append((a, b, c))
            cells.append((a, c, d))
    mesh = _build_mesh(2, np.array(points), np.array(cells),
                       nominal_h=np.sqrt(2.0) / 4.0)
    mesh.validate()
    return mesh


def build_lshape_mesh(level: int) -> Mesh:
    """L-shaped domain (-1,1)^2 minus [0,1]x[-1,0], red-refined `level` times.

    Level 0 covers the three unit squares with a 4x4 grid of split squares
    each: 96 cells.  Every refinement multiplies the cell count by 4.  All
    boundary facets are tagged Dirichlet.
    """
    if level < 0:
        raise ValueError("level must be >= 0")
    mesh = _lshape_level0()
    for _ in range(level):
        mesh = refine_red(mesh)
    return mesh


def build_cook_mesh(level: int) -> Mesh:
    """Cook panel (0,0)-(48,44)-(48,60)-(0,44) on a mapped split-square grid.

    The unit square grid of 2^(level+2) cells per side is mapped bilinearly
    onto the trapezoid; the vertex (48, 52) is always a grid node.  The
    clamped left edge is tagged Dirichlet, the right edge Neumann with
    region REGION_LOAD, top and bottom Neumann with region REGION_FREE.
    """
    if level < 0:
        raise ValueError("level must be >= 0")
    m = 2 ** (level + 2)
    xs = np.linspace(0.0, 1.0, m + 1)
    xi, eta = np.meshgrid(xs, xs, indexing="xy")
    x = 48.0 * xi
    y = 44.0 * xi + eta * (44.0 - 28.0 * xi)
    vertices = np.stack([x.ravel(), y.ravel()], axis=1)

    def vid(i, j):
        return j * (m + 1) + i

    cells = []
    for j in range(m):
        for i in range(m):
            a, b = vid(i, j), vid(i + 1, j)
            c, d = vid(i + 1, j + 1), vid(i, j + 1)
            cells.append((a, b, c))
            cells.append((a, c, d))
    mesh = _build_mesh(2, vertices, np.array(cells), nominal_h=100.5 / m)

    boundary = mesh.is_boundary_facet
    mid = mesh.vertices[mesh.facets].mean(axis=1)
    tags = mesh.boundary_tags
    regions = mesh.facet_regions
    tol = 1e-9
    on_left = boundary & (mid[:, 0] < tol)
    on_right = boundary & (mid[:, 0] > 48.0 - tol)
    other = boundary & ~on_left & ~on_right
    tags[on_left] = DIRICHLET
    tags[on_right] = NEUMANN
    regions[on_right] = REGION_LOAD
    tags[other] = NEUMANN
    regions[other] = REGION_FREE
    mesh.validate()
    return mesh


def refine_red(mesh: Mesh) -> Mesh:
    """Red refinement: split every triangle into 4 via edge midpoints.

    Boundary tags and regions are inherited from the parent facets.  Only
    implemented in 2D; the 3D builders regenerate at higher resolution
    instead.
    """
    if mesh.dim != 2:
        raise NotImplementedError("red refinement is 2D only")
    nv = mesh.n_vertices
    edge_id = {}
    midpoints = []
    for f in range(mesh.n_facets):
        a, b = mesh.facets[f]
        edge_id[(a, b)] = nv + f
        midpoints.append(0.5 * (mesh.vertices[a] + mesh.vertices[b]))
    vertices = np.vstack([mesh.vertices, np.array(midpoints)])

    def mid(a, b):
        return edge_id[(a, b) if a < b else (b, a)]

    cells = []
    for a, b, c in mesh.cells:
        mab, mbc, mca = mid(a, b), mid(b, c), mid(c, a)
        cells.extend([(a, mab, mca), (mab, b, mbc), (mca, mbc, c), (mab, mbc, mca)])
    fine = _build_mesh(2, vertices, np.array(cells), nominal_h=mesh.nominal_h / 2.0)

    # inherit tags: a child boundary facet joins one parent vertex with the
    # midpoint of its parent edge
    boundary = fine.is_boundary_facet
    for f in np.nonzero(boundary)[0]:
        a, b = fine.facets[f]
        m = b if b >= nv else a
        parent = int(m - nv)
        fine.boundary_tags[f] = mesh.boundary_tags[parent]
        fine.facet_regions[f] = mesh.facet_regions[parent]
    fine.validate()
    return fine


def dump_mesh(mesh: Mesh, path) -> None:
    """Write the plain-text mesh dump.

    Format: one line `dim`, one line `nv`, nv vertex coordinate lines, one
    line `nc`, nc cell index lines, then one line per facet with its vertex
    indices, boundary tag and region id (running to end of file).
    """
    lines = [str(mesh.dim), str(mesh.n_vertices)]
    lines += [" ".join("%.17g" % c for c in v) for v in mesh.vertices]
    lines.append(str(mesh.n_cells))
    lines += [" ".join(str(i) for i in cell) for cell in mesh.cells]
    for f in range(mesh.n_facets):
        rec = [str(i) for i in mesh.facets[f]]
        rec += [str(int(mesh.boundary_tags[f])), str(int(mesh.facet_regions[f]))]
        lines.append(" ".join(rec))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")
