"""Uniform triangulations of the unit square and Lagrange P1/P2 dof maps.

The meshes are built from a ``J x J`` grid of squares, each cut along the
bottom-left to top-right diagonal.  All node orderings are lexicographic in
``(x2, x1)`` so that repeated constructions give identical numberings.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial

import numpy as np

__all__ = [
    "Mesh",
    "DofMap",
    "QuadratureRule",
    "build_uniform_mesh",
    "build_dofmap",
    "triangle_quadrature",
    "reference_basis",
]


@dataclass(frozen=True)
class Mesh:
    """Structured triangulation of [0, 1]^2.

    Attributes
    ----------
    J : int
        Number of subdivisions per side, ``h = 1 / J``.
    vertices : ndarray, shape (n_vertices, 2)
    triangles : ndarray, shape (n_triangles, 3)
        Counter-clockwise vertex indices.
    boundary_vertices : ndarray
        Sorted indices of vertices on the boundary of the square.
    """

    J: int
    vertices: np.ndarray = field(repr=False)
    triangles: np.ndarray = field(repr=False)
    boundary_vertices: np.ndarray = field(repr=False)

    @property
    def h(self) -> float:
        return 1.0 / self.J

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    @property
    def interior_vertices(self) -> np.ndarray:
        mask = np.ones(self.n_vertices, dtype=bool)
        mask[self.boundary_vertices] = False
        return np.flatnonzero(mask)

    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def centroids(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)


def build_uniform_mesh(J: int) -> Mesh:
    """Triangulate the unit square with ``2 J^2`` congruent right triangles."""
    if int(J) != J or J < 1:
        raise ValueError(f"J must be a positive integer, got {J!r}")
    J = int(J)
    t = np.linspace(0.0, 1.0, J + 1)
    x1, x2 = np.meshgrid(t, t)  # row index follows x2
    vertices = np.column_stack([x1.ravel(), x2.ravel()])

    i, j = np.meshgrid(np.arange(J), np.arange(J))
    v00 = (j * (J + 1) + i).ravel()
    v10 = v00 + 1
    v01 = v00 + (J + 1)
    v11 = v01 + 1
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    # interleave so the two halves of a square are adjacent
    triangles = np.empty((2 * J * J, 3), dtype=np.int64)
    triangles[0::2] = lower
    triangles[1::2] = upper

    on_bnd = (
        (vertices[:, 0] == 0.0) | (vertices[:, 0] == 1.0)
        | (vertices[:, 1] == 0.0) | (vertices[:, 1] == 1.0)
    )
    return Mesh(J, vertices, triangles, np.flatnonzero(on_bnd))


@dataclass(frozen=True)
class DofMap:
    """Scalar Lagrange nodes and free (non-Dirichlet) vector dofs.

    Nodes live on the ``(r J + 1)^2`` grid of spacing ``h / r``; for r = 2
    this grid contains exactly the vertices and edge midpoints.  Vector dofs
    are interleaved: free node ``k`` owns dofs ``2k`` (x1) and ``2k + 1``
    (x2).
    """

    degree: int
    mesh: Mesh = field(repr=False)
    scalar_node_coords: np.ndarray = field(repr=False)
    cell_nodes: np.ndarray = field(repr=False)
    free_nodes: np.ndarray = field(repr=False)
    node_to_free: np.ndarray = field(repr=False)

    @property
    def n_nodes(self) -> int:
        return self.scalar_node_coords.shape[0]

    @property
    def n_free_nodes(self) -> int:
        return self.free_nodes.size

    @property
    def total_free_dofs(self) -> int:
        return 2 * self.free_nodes.size

    @property
    def free_dof_indices(self) -> tuple[np.ndarray, np.ndarray]:
        """Global free-dof indices of the x1 and x2 components."""
        k = np.arange(self.n_free_nodes)
        return 2 * k, 2 * k + 1

    def cell_dofs(self) -> np.ndarray:
        """Free-dof index per (cell, local node, component); -1 if fixed."""
        f = self.node_to_free[self.cell_nodes]
        out = np.stack([2 * f, 2 * f + 1], axis=-1)
        out[f < 0] = -1
        return out


def build_dofmap(mesh: Mesh, degree: int) -> DofMap:
    if degree not in (1, 2):
        raise ValueError(f"unsupported polynomial degree {degree!r}; use 1 or 2")
    J = mesh.J
    n = degree * J + 1
    t = np.linspace(0.0, 1.0, n)
    x1, x2 = np.meshgrid(t, t)
    coords = np.column_stack([x1.ravel(), x2.ravel()])

    # vertex (i, j) of the coarse grid sits at fine index (r i, r j)
    row, col = np.divmod(mesh.triangles, J + 1)
    fine = degree * row * n + degree * col
    if degree == 1:
        cell_nodes = fine
    else:
        v0, v1, v2 = fine.T
        mid = lambda a, b: (a + b) // 2  # noqa: E731 - midpoint on the fine grid
        cell_nodes = np.column_stack([v0, v1, v2, mid(v0, v1), mid(v1, v2), mid(v2, v0)])

    ii, jj = np.divmod(np.arange(n * n), n)
    interior = (ii > 0) & (ii < n - 1) & (jj > 0) & (jj < n - 1)
    free_nodes = np.flatnonzero(interior)
    node_to_free = np.full(n * n, -1, dtype=np.int64)
    node_to_free[free_nodes] = np.arange(free_nodes.size)
    return DofMap(degree, mesh, coords, cell_nodes.astype(np.int64), free_nodes, node_to_free)


@dataclass(frozen=True)
class QuadratureRule:
    """Quadrature on the reference triangle (0,0), (1,0), (0,1).

    ``points`` holds barycentric coordinates; ``weights`` sum to 1/2.
    """

    points: np.ndarray
    weights: np.ndarray
    exact_degree: int

    @property
    def xi(self) -> np.ndarray:
        """Cartesian reference coordinates, shape (n_points, 2)."""
        return self.points[:, 1:3]


def _orbit3(a: float) -> np.ndarray:
    b = 1.0 - 2.0 * a
    return np.array([[b, a, a], [a, b, a], [a, a, b]])


def triangle_quadrature(exact_degree: int) -> QuadratureRule:
    """Symmetric rules exact for polynomials of total degree ``exact_degree``."""
    if exact_degree == 1:
        pts = np.full((1, 3), 1.0 / 3.0)
        w = np.array([0.5])
    elif exact_degree == 2:
        pts = _orbit3(1.0 / 6.0)
        w = np.full(3, 1.0 / 6.0)
    elif exact_degree == 4:
        # Strang-Fix / Dunavant 6-point rule
        pts = np.vstack([_orbit3(0.44594849091596488632), _orbit3(0.09157621350977074346)])
        w = 0.5 * np.repeat([0.22338158967801146570, 0.10995174365532186764], 3)
    else:
        raise ValueError(f"no triangle rule of exact degree {exact_degree!r}; use 1, 2 or 4")
    return QuadratureRule(pts, w, exact_degree)


def monomial_integral(i: int, j: int) -> float:
    """Closed form of the integral of x^i y^j over the reference triangle."""
    return factorial(i) * factorial(j) / factorial(i + j + 2)


def reference_basis(degree: int, xi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Lagrange basis values and reference gradients at points ``xi``.

    Returns ``phi`` of shape (n_points, n_local) and ``dphi`` of shape
    (n_points, n_local, 2).  Local node order: vertices, then the midpoints of
    edges (0,1), (1,2), (2,0).
    """
    xi = np.atleast_2d(xi)
    s, t = xi[:, 0], xi[:, 1]
    L = np.stack([1.0 - s - t, s, t], axis=1)
    dL = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    if degree == 1:
        phi = L
        dphi = np.broadcast_to(dL, (xi.shape[0], 3, 2)).copy()
        return phi, dphi
    if degree != 2:
        raise ValueError(f"unsupported polynomial degree {degree!r}")
    edges = [(0, 1), (1, 2), (2, 0)]
    phi = np.empty((xi.shape[0], 6))
    dphi = np.empty((xi.shape[0], 6, 2))
    for a in range(3):
        phi[:, a] = L[:, a] * (2.0 * L[:, a] - 1.0)
        dphi[:, a] = (4.0 * L[:, a] - 1.0)[:, None] * dL[a]
    for e, (a, b) in enumerate(edges):
        phi[:, 3 + e] = 4.0 * L[:, a] * L[:, b]
        dphi[:, 3 + e] = 4.0 * (L[:, a][:, None] * dL[b] + L[:, b][:, None] * dL[a])
    return phi, dphi
