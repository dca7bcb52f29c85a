"""Structured crisscross triangulations of the unit square.

Each of the nx*nx axis-aligned squares is split into four triangles through
its center, so a mesh has (nx+1)**2 lattice vertices plus nx**2 center
vertices and 4*nx**2 triangles of diameter h = 1/nx.

Vertex ordering is lattice-first (row-major, y outer), centers appended
(row-major).  All coordinates are computed as integer ratios (i/nx and
(2i+1)/(2nx)), which makes the lattice vertices of mesh(nx) bitwise equal
to every other vertex of mesh(2*nx).  Nested-mesh transfer relies on this.
"""

from __future__ import annotations

from functools import cached_property
from typing import Callable, TextIO

import numpy as np


class OutOfDomainError(ValueError):
    """Raised when a query point lies outside the closed unit square."""


class Mesh:
    """Triangulation of the unit square with boundary markers.

    Attributes
    ----------
    nx : int
        Subdivision count (squares per side); mesh width h = 1/nx.
    vertices : (nv, 2) float array
        Vertex coordinates, lattice nodes first, square centers after.
    triangles : (nt, 3) int array
        Vertex indices per triangle, counterclockwise.
    boundary_mask : (nv,) bool array
        True for vertices on the boundary of the unit square.
    corner_node_count : int
        Number of lattice (non-center) vertices, (nx+1)**2.
    """

    def __init__(self, nx, vertices, triangles, boundary_mask, corner_node_count):
        self.nx = int(nx)
        self.vertices = np.asarray(vertices, dtype=float)
        self.triangles = np.asarray(triangles, dtype=np.int64)
        self.boundary_mask = np.asarray(boundary_mask, dtype=bool)
        self.corner_node_count = int(corner_node_count)

    @property
    def num_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def num_triangles(self) -> int:
        return self.triangles.shape[0]

    @cached_property
    def boundary_indices(self) -> np.ndarray:
        return np.flatnonzero(self.boundary_mask)

    @cached_property
    def corners(self) -> np.ndarray:
        """Vertex coordinates per triangle, shape (nt, 3, 2)."""
        return self.vertices[self.triangles]

    @cached_property
    def areas(self) -> np.ndarray:
        """Signed triangle areas (positive for the required orientation)."""
        p = self.corners
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @cached_property
    def grads(self) -> np.ndarray:
        """Gradients of the three nodal hat functions per triangle, (nt, 3, 2).

        grads[e, i] is constant on element e; for the nodal basis on a
        triangle with vertices p0, p1, p2 the gradient of hat i is the inward
        normal of the opposite edge scaled by 1/(2*area).
        """
        p = self.corners
        g = np.empty((self.num_triangles, 3, 2))
        for i in range(3):
            a = p[:, (i + 1) % 3]
            b = p[:, (i + 2) % 3]
            g[:, i, 0] = a[:, 1] - b[:, 1]
            g[:, i, 1] = b[:, 0] - a[:, 0]
        g /= (2.0 * self.areas)[:, None, None]
        return g

    def __repr__(self):
        return f"Mesh(nx={self.nx}, nv={self.num_vertices}, nt={self.num_triangles})"


def build_crisscross_mesh(nx: int) -> Mesh:
    """Build the crisscross triangulation with nx squares per side.

    Raises ValueError for nx < 1.
    """
    if nx < 1:
        raise ValueError(f"subdivision count must be >= 1, got {nx}")
    nx = int(nx)
    n_lat = (nx + 1) ** 2

    lat_i, lat_j = np.meshgrid(np.arange(nx + 1), np.arange(nx + 1))  # j outer
    lat = np.column_stack([(lat_i / nx).ravel(), (lat_j / nx).ravel()])
    cen_i, cen_j = np.meshgrid(np.arange(nx), np.arange(nx))
    centers = np.column_stack([
        ((2 * cen_i + 1) / (2 * nx)).ravel(),
        ((2 * cen_j + 1) / (2 * nx)).ravel(),
    ])
    vertices = np.vstack([lat, centers])

    boundary = np.zeros(len(vertices), dtype=bool)
    on_edge = (lat_i == 0) | (lat_i == nx) | (lat_j == 0) | (lat_j == nx)
    boundary[:n_lat] = on_edge.ravel()

    # Four triangles per square, counterclockwise, center last:
    # bottom (SW, SE, C), right (SE, NE, C), top (NE, NW, C), left (NW, SW, C).
    sq_i = cen_i.ravel()
    sq_j = cen_j.ravel()
    sw = sq_j * (nx + 1) + sq_i
    se = sw + 1
    nw = sw + (nx + 1)
    ne = nw + 1
    cc = n_lat + sq_j * nx + sq_i
    triangles = np.empty((4 * nx * nx, 3), dtype=np.int64)
    triangles[0::4] = np.column_stack([sw, se, cc])
    triangles[1::4] = np.column_stack([se, ne, cc])
    triangles[2::4] = np.column_stack([ne, nw, cc])
    triangles[3::4] = np.column_stack([nw, sw, cc])

    return Mesh(nx, vertices, triangles, boundary, n_lat)


def boundary_values(mesh: Mesh, g: Callable[[float, float], float]) -> dict[int, float]:
    """Evaluate g at every boundary vertex; returns {vertex index: value}."""
    return {
        int(i): float(g(mesh.vertices[i, 0], mesh.vertices[i, 1]))
        for i in mesh.boundary_indices
    }


def _barycentric(mesh: Mesh, tri: int, x: float, y: float) -> np.ndarray:
    (x0, y0), (x1, y1), (x2, y2) = mesh.vertices[mesh.triangles[tri]]
    # Cramer's rule; evaluates to exact 1/0/0 when (x, y) is a vertex, which
    # nested-mesh transfer relies on for bitwise value preservation.
    det = (y1 - y2) * (x0 - x2) + (x2 - x1) * (y0 - y2)
    l0 = ((y1 - y2) * (x - x2) + (x2 - x1) * (y - y2)) / det
    l1 = ((y2 - y0) * (x - x2) + (x0 - x2) * (y - y2)) / det
    return np.array([l0, l1, 1.0 - l0 - l1])


def locate_point(mesh: Mesh, p) -> tuple[int, np.ndarray]:
    """Find the triangle containing p and its barycentric coordinates.

    Points on shared edges or vertices get the lowest containing triangle
    index.  Raises OutOfDomainError for points outside the closed square.
    """
    x, y = float(p[0]), float(p[1])
    if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
        raise OutOfDomainError(f"point ({x}, {y}) is outside the unit square")
    nx = mesh.nx

    def cell_range(s):
        # Candidate cells along one axis; two when the point sits on a gridline.
        c = int(np.floor(s))
        cands = []
        if s == c and c > 0:
            cands.append(c - 1)
        cands.append(min(c, nx - 1))
        return cands

    tol = 1e-12
    for j in cell_range(y * nx):
        for i in cell_range(x * nx):
            sq = j * nx + i
            for t in range(4 * sq, 4 * sq + 4):
                lam = _barycentric(mesh, t, x, y)
                if np.all(lam >= -tol):
                    lam = np.maximum(lam, 0.0)
                    return t, lam / lam.sum()
    raise OutOfDomainError(f"no containing triangle found for ({x}, {y})")


def dump_mesh(mesh: Mesh, out: TextIO) -> None:
    """Write the plain-text mesh format: `nx nv nt`, vertex and triangle lines."""
    out.write(f"{mesh.nx} {mesh.num_vertices} {mesh.num_triangles}\n")
    for (x, y), b in zip(mesh.vertices, mesh.boundary_mask):
        out.write(f"v {float(x)!r} {float(y)!r} {int(b)}\n")
    for i, j, k in mesh.triangles:
        out.write(f"t {i} {j} {k}\n")


def load_mesh(inp: TextIO) -> Mesh:
    """Read a mesh written by dump_mesh."""
    nx, nv, nt = (int(tok) for tok in inp.readline().split())
    vertices = np.empty((nv, 2))
    mask = np.empty(nv, dtype=bool)
    for i in range(nv):
        tag, x, y, b = inp.readline().split()
        assert tag == "v"
        vertices[i] = (float(x), float(y))
        mask[i] = bool(int(b))
    triangles = np.empty((nt, 3), dtype=np.int64)
    for e in range(nt):
        tag, *idx = inp.readline().split()
        assert tag == "t"
        triangles[e] = [int(v) for v in idx]
    return Mesh(nx, vertices, triangles, mask, (nx + 1) ** 2)
